#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "nodfuse/eval/report.hpp"
#include "nodfuse/pipeline/config.hpp"

namespace nodfuse::pipeline {

struct RunOutput {
    eval::MetricsReport report;
    std::filesystem::path dir;
    std::vector<int> folds; // fold id per manifest row
};

/// Cross-validated run of the configured pipeline. Writes under
/// artifact_dir(cfg): config.json, folds.csv, features_handcrafted.csv,
/// scores.csv, metrics.json and per-fold fold_<k>/ artifacts.
RunOutput run_experiment(const ExperimentConfig& cfg);

/// Handcrafted feature CSV, or the 31-column fusion table when a trained
/// model is given. Returns the CSV path.
std::filesystem::path extract_features(const ExperimentConfig& cfg,
                                       const std::optional<std::filesystem::path>& model = std::nullopt);

/// Trains the configured architecture on every nodule. Returns the model path.
std::filesystem::path train_cnn(const ExperimentConfig& cfg);

} // namespace nodfuse::pipeline
