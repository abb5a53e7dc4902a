#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nodfuse/eval/metrics.hpp"

namespace nodfuse::eval {

struct FoldMetrics {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double auc = 0;
    Confusion at_zero; // score > 0
    IsoAccuracy iso;
    Confusion at_iso;
    nlohmann::json extra; // pipeline details (selected features, epochs, ...)
};

struct Summary {
    double mean = 0;
    double std = 0; // sample (n - 1)
};

Summary summarize(std::span<const double> values);

struct MetricsReport {
    std::string pipeline;
    std::uint64_t seed = 0;
    std::vector<FoldMetrics> folds;

    std::vector<double> values(const std::string& metric) const;
    /// auc, acc, sen, spe (threshold 0) and iso_acc, iso_sen, iso_spe.
    std::map<std::string, Summary> aggregate() const;
    nlohmann::json to_json() const;
};

MetricsReport report_from_json(const nlohmann::json& j);

/// Scores for the test rows of one fold, in the order given.
struct FoldOutcome {
    std::vector<double> scores;
    nlohmann::json extra = nlohmann::json::object();
};

using FoldRunner = std::function<FoldOutcome(int fold, std::span<const std::size_t> train,
                                             std::span<const std::size_t> test)>;

/// Runs `runner` on each fold of `fold_of` (row -> fold id) and scores the
/// held-out rows. Folds run on up to `workers` threads; results are ordered by
/// fold. A failing fold aborts the run with an error naming it.
MetricsReport run_cv(std::span<const int> labels, std::span<const int> fold_of, int folds, const FoldRunner& runner,
                     unsigned workers = 1);

} // namespace nodfuse::eval
