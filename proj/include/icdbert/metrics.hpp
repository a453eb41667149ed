// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "icdbert/corpus.hpp"
#include "icdbert/error.hpp"
#include "icdbert/labels.hpp"
#include "icdbert/matrix.hpp"

namespace icdbert {

/// ROC requested for scores whose truth holds a single class.
class DegenerateCurveError : public Error {
public:
    using Error::Error;
};

/// One row per example: probabilities and truth over the label vocabulary.
struct PredictionSet {
    std::vector<AdmissionId> admission_ids;
    Matrix probabilities;
    BitMatrix truth;

    std::size_t size() const { return admission_ids.size(); }
    /// Throws RangeError on mismatched shapes or probabilities outside [0, 1].
    void validate() const;
};

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// bit = 1 iff prob >= tau. `tau` must lie in (0, 1).
BitMatrix threshold_predictions(const Matrix& probabilities, double tau = 0.5);

/// One count per label (column).
std::vector<ConfusionCounts> confusion_counts_per_label(const BitMatrix& predictions, const BitMatrix& truth);
/// All cells pooled; equals the sum of the per-label counts.
ConfusionCounts confusion_counts_pooled(const BitMatrix& predictions, const BitMatrix& truth);

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Any 0/0 ratio is reported as 0.
PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& counts);

/// Fraction of (example, label) cells where prediction equals truth.
double multilabel_accuracy(const BitMatrix& predictions, const BitMatrix& truth);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;

    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::size_t label = 0;
    std::vector<RocPoint> points;
};

/// Threshold sweep over distinct scores in descending order, tied scores sharing one step,
/// anchored at (0,0) and ending at (1,1). Throws DegenerateCurveError when truth is single-class.
RocCurve roc_points(std::span<const double> scores, std::span<const std::uint8_t> truth, std::size_t label = 0);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

struct LabelMetrics {
    std::size_t n_pos = 0;
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Missing when the label's truth column holds a single class.
    std::optional<double> auc;
};

struct AggregateMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;
};

struct MetricRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct MetricsReport {
    double threshold = 0.5;
    std::size_t n_examples = 0;
    std::vector<LabelEntry> labels;
    std::vector<LabelMetrics> per_label;
    /// Pooled confusion counts; accuracy is the pooled cell-wise accuracy and AUC is over pooled cells.
    AggregateMetrics micro;
    /// Unweighted means of the per-label values; AUC averages labels where it is defined.
    AggregateMetrics macro;
    ConfusionCounts pooled;
    /// Min-max over labels, AUC over labels where it is defined.
    MetricRange accuracy_range, precision_range, recall_range, f1_range;
    std::optional<MetricRange> auc_range;
    /// Labels whose AUC is missing.
    std::vector<std::size_t> missing_auc;
    /// ROC curves for labels where AUC is defined, in label order.
    std::vector<RocCurve> curves;

    double pooled_accuracy() const { return micro.accuracy; }
};

/// Per-label and aggregate metrics over a non-empty prediction set.
MetricsReport aggregate_report(const PredictionSet& predictions, const LabelVocabulary& vocab, double tau = 0.5);

}  // namespace icdbert
