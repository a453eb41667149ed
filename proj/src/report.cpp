// SPDX-License-Identifier: Apache-2.0
#include "icdbert/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "icdbert/csv.hpp"
#include "icdbert/error.hpp"

namespace icdbert {

namespace {

constexpr double kWidth = 1000.0;
constexpr double kHeight = 800.0;

constexpr std::array<std::string_view, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                       "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string metric(double v) { return fmt::format("{:.6f}", v); }

std::string optional_metric(const std::optional<double>& v) { return v ? metric(*v) : std::string(); }

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::string label_title(const LabelEntry& e) {
    return e.short_title.empty() ? e.code : e.short_title;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    csv::write_row(out, {"label", "kind", "short_title", "n_pos", "accuracy", "precision", "recall", "f1", "auc"});
    for (std::size_t i = 0; i < report.per_label.size(); ++i) {
        const auto& e = report.labels[i];
        const auto& m = report.per_label[i];
        csv::write_row(out, {e.code, std::string(to_string(e.kind)), e.short_title, std::to_string(m.n_pos),
                             metric(m.accuracy), metric(m.precision), metric(m.recall), metric(m.f1),
                             optional_metric(m.auc)});
    }
    const std::string n_pos = std::to_string(report.pooled.tp + report.pooled.fn);
    for (const auto& [name, agg] : {std::pair{"micro", &report.micro}, std::pair{"macro", &report.macro}}) {
        csv::write_row(out, {name, "aggregate", "", n_pos, metric(agg->accuracy), metric(agg->precision),
                             metric(agg->recall), metric(agg->f1), optional_metric(agg->auc)});
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::string format_range(const MetricRange& range, double aggregate) {
    return fmt::format("{:.2f}-{:.2f} ({:.2f})", 100.0 * range.lo, 100.0 * range.hi, 100.0 * aggregate);
}

nlohmann::ordered_json metrics_to_json(const MetricsReport& report) {
    using json = nlohmann::ordered_json;
    auto aggregate = [](const AggregateMetrics& a) {
        return json{{"accuracy", a.accuracy}, {"precision", a.precision}, {"recall", a.recall},
                    {"f1", a.f1},             {"auc", optional_json(a.auc)}};
    };
    auto range = [](const MetricRange& r) { return json{{"lo", r.lo}, {"hi", r.hi}}; };

    json labels = json::array();
    for (std::size_t i = 0; i < report.per_label.size(); ++i) {
        const auto& e = report.labels[i];
        const auto& m = report.per_label[i];
        labels.push_back(json{{"label", e.code},
                              {"kind", to_string(e.kind)},
                              {"short_title", e.short_title},
                              {"n_pos", m.n_pos},
                              {"tp", m.counts.tp},
                              {"fp", m.counts.fp},
                              {"tn", m.counts.tn},
                              {"fn", m.counts.fn},
                              {"accuracy", m.accuracy},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"auc", optional_json(m.auc)},
                              {"auc_missing", !m.auc.has_value()}});
    }
    json ranges{{"accuracy", range(report.accuracy_range)},
                {"precision", range(report.precision_range)},
                {"recall", range(report.recall_range)},
                {"f1", range(report.f1_range)},
                {"auc", report.auc_range ? range(*report.auc_range) : json(nullptr)}};
    json summary{{"accuracy", format_range(report.accuracy_range, report.micro.accuracy)},
                 {"f1", format_range(report.f1_range, report.macro.f1)}};
    if (report.auc_range && report.macro.auc) summary["auc"] = format_range(*report.auc_range, *report.macro.auc);

    json missing = json::array();
    for (auto i : report.missing_auc) missing.push_back(report.labels[i].code);

    return json{{"threshold", report.threshold},
                {"n_examples", report.n_examples},
                {"n_labels", report.per_label.size()},
                {"pooled_accuracy", report.micro.accuracy},
                {"pooled_counts",
                 {{"tp", report.pooled.tp}, {"fp", report.pooled.fp}, {"tn", report.pooled.tn}, {"fn", report.pooled.fn}}},
                {"micro", aggregate(report.micro)},
                {"macro", aggregate(report.macro)},
                {"ranges", ranges},
                {"summary", summary},
                {"missing_auc", missing},
                {"labels", labels}};
}

std::string roc_svg(const MetricsReport& report, std::span<const std::size_t> labels, std::string_view title) {
    const double x0 = 80, y0 = 60, side = 640;
    auto px = [&](double fpr) { return x0 + fpr * side; };
    auto py = [&](double tpr) { return y0 + (1.0 - tpr) * side; };

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n", kWidth,
        kHeight, kWidth, kHeight);
    svg += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"800\" fill=\"white\"/>\n";
    svg += fmt::format("<text x=\"{}\" y=\"35\" font-family=\"sans-serif\" font-size=\"20\" text-anchor=\"middle\">{}</text>\n",
                       x0 + side / 2, xml_escape(title));
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x0, y0,
                       side, side);
    for (int t = 0; t <= 10; t += 2) {
        const double v = t / 10.0;
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" "
                           "text-anchor=\"middle\">{:.1f}</text>\n",
                           px(v), y0 + side + 18, v);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" "
                           "text-anchor=\"end\">{:.1f}</text>\n",
                           x0 - 8, py(v) + 4, v);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" "
                       "text-anchor=\"middle\">False positive rate</text>\n",
                       x0 + side / 2, y0 + side + 45);
    svg += fmt::format("<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
                       "transform=\"rotate(-90 20 {})\">True positive rate</text>\n",
                       y0 + side / 2, y0 + side / 2);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n",
                       px(0), py(0), px(1), py(1));

    double legend_y = y0 + 10;
    std::size_t colour = 0;
    for (auto label : labels) {
        const auto& entry = report.labels.at(label);
        const auto& m = report.per_label.at(label);
        const auto stroke = kPalette[colour++ % kPalette.size()];
        const auto curve = std::find_if(report.curves.begin(), report.curves.end(),
                                        [&](const RocCurve& c) { return c.label == label; });
        if (curve != report.curves.end()) {
            std::string points;
            for (const auto& p : curve->points) {
                if (!points.empty()) points += ' ';
                points += fmt::format("{:.2f},{:.2f}", px(p.fpr), py(p.tpr));
            }
            svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", stroke,
                               points);
        }
        const std::string auc_text = m.auc ? fmt::format("{:.3f}", *m.auc) : std::string("n/a");
        svg += fmt::format("<line x1=\"740\" y1=\"{0:.1f}\" x2=\"765\" y2=\"{0:.1f}\" stroke=\"{1}\" stroke-width=\"3\"/>\n",
                           legend_y, stroke);
        svg += fmt::format("<text x=\"772\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\">{} (AUC {})</text>\n",
                           legend_y + 4, xml_escape(label_title(entry)), auc_text);
        legend_y += 20;
    }
    svg += "</svg>\n";
    return svg;
}

std::vector<std::filesystem::path> emit_reports(const MetricsReport& report, const std::filesystem::path& out_dir) {
    if (report.per_label.empty()) throw RangeError("refusing to emit an empty metrics report");
    ensure_dir(out_dir);
    std::vector<std::filesystem::path> written;

    write_metrics_csv(out_dir / kMetricsCsvFile, report);
    written.push_back(out_dir / kMetricsCsvFile);
    write_text(out_dir / kMetricsJsonFile, metrics_to_json(report).dump(2) + "\n");
    written.push_back(out_dir / kMetricsJsonFile);

    const std::size_t n = report.per_label.size();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    if (n <= kRocSingleFileLimit) {
        const auto path = out_dir / "roc.svg";
        write_text(path, roc_svg(report, all, "ROC curves"));
        written.push_back(path);
    } else {
        for (std::size_t start = 0, part = 1; start < n; start += kRocLabelsPerChunk, ++part) {
            const std::size_t end = std::min(n, start + kRocLabelsPerChunk);
            const auto path = out_dir / fmt::format("roc_{:02d}.svg", part);
            write_text(path, roc_svg(report, std::span(all).subspan(start, end - start),
                                     fmt::format("ROC curves, labels {}-{}", start + 1, end)));
            written.push_back(path);
        }
    }
    return written;
}

std::string bar_chart_svg(std::span<const std::string> names, std::span<const double> values, std::string_view title,
                          std::string_view value_label) {
    if (names.size() != values.size()) throw RangeError("bar chart needs one value per name");
    const double left = 300, top = 60, plot_w = 600, plot_h = 680;
    const double max_v = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
    const double scale = max_v > 0 ? plot_w / max_v : 0.0;
    const double slot = names.empty() ? plot_h : plot_h / static_cast<double>(names.size());
    const double bar = std::max(1.0, slot * 0.7);
    const double font = std::clamp(slot * 0.6, 6.0, 14.0);

    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n", kWidth,
        kHeight, kWidth, kHeight);
    svg += "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"800\" fill=\"white\"/>\n";
    svg += fmt::format("<text x=\"500\" y=\"35\" font-family=\"sans-serif\" font-size=\"20\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       xml_escape(title));
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = top + slot * static_cast<double>(i);
        svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n", left, y,
                           values[i] * scale, bar, kPalette[0]);
        svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"{:.1f}\" "
                           "text-anchor=\"end\">{}</text>\n",
                           left - 6, y + bar * 0.8, font, xml_escape(names[i]));
        svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"{:.1f}\">{:g}</text>\n",
                           left + values[i] * scale + 4, y + bar * 0.8, font, values[i]);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       left + plot_w / 2, top + plot_h + 40, xml_escape(value_label));
    svg += "</svg>\n";
    return svg;
}

std::vector<std::filesystem::path> emit_eda(std::span<const EdaRow> rows, const LabelVocabulary& vocab,
                                            const std::filesystem::path& out_dir) {
    if (rows.size() != vocab.size()) throw RangeError("EDA rows do not match the label vocabulary");
    ensure_dir(out_dir);
    std::vector<std::filesystem::path> written;
    write_eda_csv(out_dir / "eda.csv", rows, vocab);
    written.push_back(out_dir / "eda.csv");

    std::vector<std::string> names;
    std::vector<double> counts, words;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        names.push_back(label_title(vocab.entries[i]) + (rows[i].empty ? " (none)" : ""));
        counts.push_back(static_cast<double>(rows[i].note_count));
        words.push_back(std::round(rows[i].mean_word_count * 10.0) / 10.0);
    }
    write_text(out_dir / "eda_note_counts.svg", bar_chart_svg(names, counts, "Notes per label", "Number of notes"));
    written.push_back(out_dir / "eda_note_counts.svg");
    write_text(out_dir / "eda_word_counts.svg",
               bar_chart_svg(names, words, "Average word count per label", "Mean words per note"));
    written.push_back(out_dir / "eda_word_counts.svg");
    return written;
}

}  // namespace icdbert
