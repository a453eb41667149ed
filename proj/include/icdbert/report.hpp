// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "icdbert/labels.hpp"
#include "icdbert/metrics.hpp"

namespace icdbert {

inline constexpr std::string_view kMetricsCsvFile = "metrics.csv";
inline constexpr std::string_view kMetricsJsonFile = "metrics.json";

/// Up to this many labels share one ROC plot; above it, plots are split per `kRocLabelsPerChunk`.
inline constexpr std::size_t kRocSingleFileLimit = 20;
inline constexpr std::size_t kRocLabelsPerChunk = 10;

/// Metrics CSV with one row per label followed by "micro" and "macro" aggregate rows.
/// Columns: label, kind, short_title, n_pos, accuracy, precision, recall, f1, auc.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);

nlohmann::ordered_json metrics_to_json(const MetricsReport& report);

/// One SVG with a polyline per curve, a diagonal reference, and a legend of short titles.
std::string roc_svg(const MetricsReport& report, std::span<const std::size_t> labels, std::string_view title);

/// Writes metrics.csv, metrics.json, and roc.svg (or roc_01.svg, roc_02.svg, ... for large
/// vocabularies). Returns the written paths in order. Nothing time-dependent is embedded.
std::vector<std::filesystem::path> emit_reports(const MetricsReport& report, const std::filesystem::path& out_dir);

/// Horizontal bar chart, one bar per label.
std::string bar_chart_svg(std::span<const std::string> names, std::span<const double> values, std::string_view title,
                          std::string_view value_label);

/// eda.csv plus note-count and mean-word-count bar charts.
std::vector<std::filesystem::path> emit_eda(std::span<const EdaRow> rows, const LabelVocabulary& vocab,
                                            const std::filesystem::path& out_dir);

/// "lo-hi (agg)" with percentages to two decimals.
std::string format_range(const MetricRange& range, double aggregate);

}  // namespace icdbert
