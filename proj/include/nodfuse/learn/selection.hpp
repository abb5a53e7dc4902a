#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nodfuse/learn/feature_table.hpp"
#include "nodfuse/learn/svm.hpp"
#include "nodfuse/rng.hpp"

namespace nodfuse::learn {

struct SmoteSample {
    std::vector<double> values;
    std::size_t seed = 0;     // row of the minority table
    std::size_t neighbor = 0; // row of the minority table
    double u = 0;
};

struct SmoteResult {
    std::vector<SmoteSample> samples;
    int k_used = 0;
};

/// x + u (x_nn - x) for a random minority row x and one of its k nearest
/// minority neighbours. k is clamped to count - 1 with a warning.
SmoteResult smote(const FeatureTable& minority, int k, std::size_t n_synthetic, Rng& rng);

/// Appends SMOTE rows to the minority class until both classes are the same
/// size. Synthetic ids are `smote:<n>`.
FeatureTable balance_with_smote(const FeatureTable& rows, int k, Rng& rng);

/// Columns whose sample variance is at least the mean column variance.
std::vector<std::size_t> variance_filter(const FeatureTable& rows);

/// ReliefF weights for a two-class table. Features are min-max scaled first;
/// m sampled rows (all rows in order when m >= rows) with k nearest hits and
/// misses each.
std::vector<double> relieff_rank(const FeatureTable& rows, int k, std::size_t m, Rng& rng);
/// Top-T columns by weight (ties by index); default T = positive weights.
std::vector<std::size_t> relieff_top(std::span<const double> weights, std::optional<std::size_t> top = std::nullopt);

struct SfsConfig {
    int inner_folds = 5;  // CV folds of the AUC criterion
    int runs = 5;         // selection runs, one per split of the training rows
    int consensus = 4;    // keep features chosen in at least this many runs
    double threshold = 1e-6;
    SvmParams svm;
    bool smote = true;
    int smote_k = 5;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct SfsRun {
    std::vector<std::size_t> selected; // in selection order
    std::vector<double> auc_trace;     // criterion after each added feature
};

struct SelectionResult {
    std::vector<std::string> feature_names; // all candidate names
    std::vector<std::size_t> consensus;     // ordered by mean selection step
    std::vector<SfsRun> runs;
    std::vector<int> counts; // per candidate, runs that selected it

    std::vector<std::string> consensus_names() const;
    nlohmann::json to_json() const;
};

/// Greedy forward search from the empty set (criterion 0.5). Adds the
/// candidate with the best criterion (lowest index on ties) while it beats
/// the incumbent by more than `threshold`.
SfsRun sfs_greedy(std::size_t n_features, const std::function<double(std::span<const std::size_t>)>& criterion,
                  double threshold, unsigned workers = 1);

/// Mean held-out AUC of an SVM over stratified folds of `rows` restricted to
/// `columns`; training splits are SMOTE-balanced when enabled.
double cv_auc(const FeatureTable& rows, std::span<const std::size_t> columns, const SfsConfig& cfg,
              std::uint64_t seed);

/// One greedy run per split (trained on the other splits) and the consensus
/// across runs.
SelectionResult sfs_select(const FeatureTable& rows, const SfsConfig& cfg);

/// C in {0.1, 1, 10} and gamma multipliers {0.25, 1, 4} on the default gamma,
/// picked by cv_auc over all columns. Ties keep the earlier grid point.
SvmParams svm_grid_search(const FeatureTable& rows, const SfsConfig& cfg);

} // namespace nodfuse::learn
