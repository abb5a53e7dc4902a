#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nodfuse::eval {

/// ROC sweep where point k predicts positive iff score > thresholds[k].
/// thresholds are the unique scores in decreasing order followed by -inf,
/// so the curve runs from (0,0) to (1,1).
struct RocCurve {
    std::vector<double> thresholds;
    std::vector<std::int64_t> tp;
    std::vector<std::int64_t> fp;
    std::int64_t n_pos = 0;
    std::int64_t n_neg = 0;
    double auc = 0;

    std::size_t size() const { return thresholds.size(); }
    double tpr(std::size_t k) const { return double(tp[k]) / double(n_pos); }
    double fpr(std::size_t k) const { return double(fp[k]) / double(n_neg); }
};

/// Labels are 0/1. Throws ValidationError unless both classes are present or
/// a score is non-finite. Tied positive/negative pairs count one half.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

/// AUC only; 0.5 when every score is tied.
double auc(std::span<const double> scores, std::span<const int> labels);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc);

struct Confusion {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    double acc = 0;
    double sen = 0; // 0 when there are no positives
    double spe = 0; // 0 when there are no negatives
};

/// Predicts positive iff score > threshold.
Confusion confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold);

/// Accuracy-optimal ROC point: the point touched by the steepest ISO-accuracy
/// line of slope n_neg / n_pos. Ties go to the highest threshold.
struct IsoAccuracy {
    double threshold = 0;
    double slope = 0;
    double intercept = 0; // tpr = slope * fpr + intercept
    double fpr = 0;
    double tpr = 0;
    double accuracy = 0;
    std::size_t point = 0;
};
IsoAccuracy iso_accuracy_threshold(const RocCurve& roc, std::int64_t n_pos, std::int64_t n_neg);

/// Fold id per row. Each class is shuffled, the class lists are concatenated
/// and dealt round-robin, so folds differ by at most one row overall and per
/// class.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Unpaired two-sample Student t-test with pooled variance.
struct TTest {
    double t = 0;
    double p = 1;
    double dof = 0;
};
TTest t_test(std::span<const double> a, std::span<const double> b);

} // namespace nodfuse::eval
