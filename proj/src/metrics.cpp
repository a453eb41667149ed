// SPDX-License-Identifier: Apache-2.0
#include "icdbert/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

namespace icdbert {

void PredictionSet::validate() const {
    if (probabilities.rows != admission_ids.size() || truth.rows != admission_ids.size()) {
        throw RangeError(fmt::format("prediction set has {} ids, {} probability rows, {} truth rows",
                                     admission_ids.size(), probabilities.rows, truth.rows));
    }
    if (probabilities.cols != truth.cols) {
        throw RangeError(fmt::format("probability width {} differs from truth width {}", probabilities.cols,
                                     truth.cols));
    }
    for (std::size_t i = 0; i < probabilities.data.size(); ++i) {
        const double p = probabilities.data[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw RangeError(fmt::format("probability {} at row {} label {} is outside [0, 1]", p,
                                         i / probabilities.cols, i % probabilities.cols));
        }
    }
    for (auto b : truth.data) {
        if (b > 1) throw RangeError("truth matrix holds a value other than 0 or 1");
    }
}

BitMatrix threshold_predictions(const Matrix& probabilities, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw RangeError(fmt::format("threshold {} is outside (0, 1)", tau));
    BitMatrix out(probabilities.rows, probabilities.cols);
    for (std::size_t i = 0; i < probabilities.data.size(); ++i) out.data[i] = probabilities.data[i] >= tau ? 1 : 0;
    return out;
}

namespace {

void require_same_shape(const BitMatrix& a, const BitMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) {
        throw RangeError(fmt::format("shape mismatch: {}x{} predictions vs {}x{} truth", a.rows, a.cols, b.rows,
                                     b.cols));
    }
}

void count_cell(ConfusionCounts& c, bool pred, bool truth) {
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
}

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

std::vector<ConfusionCounts> confusion_counts_per_label(const BitMatrix& predictions, const BitMatrix& truth) {
    require_same_shape(predictions, truth);
    std::vector<ConfusionCounts> out(truth.cols);
    for (std::size_t r = 0; r < truth.rows; ++r) {
        for (std::size_t c = 0; c < truth.cols; ++c) count_cell(out[c], predictions(r, c) != 0, truth(r, c) != 0);
    }
    return out;
}

ConfusionCounts confusion_counts_pooled(const BitMatrix& predictions, const BitMatrix& truth) {
    require_same_shape(predictions, truth);
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.data.size(); ++i) count_cell(c, predictions.data[i] != 0, truth.data[i] != 0);
    return c;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& c) {
    PrecisionRecallF1 out;
    out.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    out.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    out.f1 = ratio(2.0 * out.precision * out.recall, out.precision + out.recall);
    return out;
}

double multilabel_accuracy(const BitMatrix& predictions, const BitMatrix& truth) {
    require_same_shape(predictions, truth);
    if (truth.data.empty()) return 0.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < truth.data.size(); ++i) agree += (predictions.data[i] != 0) == (truth.data[i] != 0);
    return static_cast<double>(agree) / static_cast<double>(truth.data.size());
}

RocCurve roc_points(std::span<const double> scores, std::span<const std::uint8_t> truth, std::size_t label) {
    if (scores.size() != truth.size()) {
        throw RangeError(fmt::format("{} scores but {} truth values", scores.size(), truth.size()));
    }
    std::size_t positives = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw RangeError(fmt::format("score {} is NaN", i));
        positives += truth[i] != 0;
    }
    const std::size_t negatives = truth.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw DegenerateCurveError(fmt::format("label {}: ROC undefined with {} positives and {} negatives", label,
                                               positives, negatives));
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.label = label;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (truth[order[i]]) ++tp;
            else ++fp;
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

MetricsReport aggregate_report(const PredictionSet& predictions, const LabelVocabulary& vocab, double tau) {
    predictions.validate();
    if (predictions.size() == 0) throw RangeError("cannot report metrics on an empty prediction set");
    const std::size_t n = predictions.size();
    const std::size_t width = predictions.truth.cols;
    if (vocab.size() != width) {
        throw RangeError(fmt::format("label vocabulary has {} entries but predictions have {}", vocab.size(), width));
    }

    MetricsReport report;
    report.threshold = tau;
    report.n_examples = n;
    report.labels = vocab.entries;
    const BitMatrix bits = threshold_predictions(predictions.probabilities, tau);
    const auto counts = confusion_counts_per_label(bits, predictions.truth);

    std::vector<double> scores(n);
    std::vector<std::uint8_t> truth(n);
    for (std::size_t c = 0; c < width; ++c) {
        LabelMetrics m;
        m.counts = counts[c];
        m.n_pos = counts[c].tp + counts[c].fn;
        m.accuracy = static_cast<double>(counts[c].tp + counts[c].tn) / static_cast<double>(n);
        const auto prf = precision_recall_f1(counts[c]);
        m.precision = prf.precision;
        m.recall = prf.recall;
        m.f1 = prf.f1;
        for (std::size_t r = 0; r < n; ++r) {
            scores[r] = predictions.probabilities(r, c);
            truth[r] = predictions.truth(r, c);
        }
        if (m.n_pos > 0 && m.n_pos < n) {
            auto curve = roc_points(scores, truth, c);
            m.auc = auc(curve);
            report.curves.push_back(std::move(curve));
        } else {
            report.missing_auc.push_back(c);
        }
        report.per_label.push_back(m);
    }

    report.pooled = confusion_counts_pooled(bits, predictions.truth);
    const auto micro = precision_recall_f1(report.pooled);
    report.micro.accuracy = multilabel_accuracy(bits, predictions.truth);
    report.micro.precision = micro.precision;
    report.micro.recall = micro.recall;
    report.micro.f1 = micro.f1;
    const std::size_t pooled_pos = report.pooled.tp + report.pooled.fn;
    if (pooled_pos > 0 && pooled_pos < report.pooled.total()) {
        report.micro.auc = auc(roc_points(predictions.probabilities.data, predictions.truth.data));
    }

    auto range_of = [&](auto get) {
        MetricRange range{get(report.per_label.front()), get(report.per_label.front())};
        double sum = 0.0;
        for (const auto& m : report.per_label) {
            const double v = get(m);
            range.lo = std::min(range.lo, v);
            range.hi = std::max(range.hi, v);
            sum += v;
        }
        return std::make_pair(range, width ? sum / static_cast<double>(width) : 0.0);
    };
    if (width > 0) {
        std::tie(report.accuracy_range, report.macro.accuracy) = range_of([](const LabelMetrics& m) { return m.accuracy; });
        std::tie(report.precision_range, report.macro.precision) =
            range_of([](const LabelMetrics& m) { return m.precision; });
        std::tie(report.recall_range, report.macro.recall) = range_of([](const LabelMetrics& m) { return m.recall; });
        std::tie(report.f1_range, report.macro.f1) = range_of([](const LabelMetrics& m) { return m.f1; });
    }
    double auc_sum = 0.0;
    std::size_t auc_n = 0;
    for (const auto& m : report.per_label) {
        if (!m.auc) continue;
        if (!report.auc_range) report.auc_range = MetricRange{*m.auc, *m.auc};
        report.auc_range->lo = std::min(report.auc_range->lo, *m.auc);
        report.auc_range->hi = std::max(report.auc_range->hi, *m.auc);
        auc_sum += *m.auc;
        ++auc_n;
    }
    if (auc_n) report.macro.auc = auc_sum / static_cast<double>(auc_n);
    return report;
}

}  // namespace icdbert
