#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "nodfuse/ingest/tensor.hpp"
#include "nodfuse/learn/selection.hpp"
#include "nodfuse/neural/train.hpp"

namespace nodfuse::pipeline {

enum class Method { ss_olhf, ss_hf, s_ffl, s_fflhf, ori_multicrop };

Method method_from(const std::string& name);
std::string method_name(Method m);
bool needs_cnn(Method m);

struct ExperimentConfig {
    std::filesystem::path data_dir = "data";
    std::filesystem::path manifest; // default <data_dir>/manifest.csv
    double target_spacing = 0.5;
    std::optional<ingest::Shape3> tensor_shape; // unset = auto
    ingest::Shape3 patch_shape{32, 32, 32};     // ori-multicrop input
    Method method = Method::ss_olhf;
    std::string architecture = "multicrop3d_toy";
    neural::TrainConfig train;
    bool augment = true;
    bool train_once = false;
    /// 0: CNN features of training rows come from the fold's CNN itself.
    /// k >= 2: they come from k inner CNNs that each left those rows out.
    int cross_fit_folds = 0;

    double svm_C = 1.0;
    std::optional<double> svm_gamma;
    bool svm_grid = false;
    double sfs_threshold = 1e-6;
    bool smote = true;
    int smote_k = 5;
    int relieff_k = 10;
    std::size_t relieff_m = 0; // 0 = every training row
    std::optional<std::size_t> relieff_top;

    int folds = 5;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::filesystem::path output_dir = "out";

    std::filesystem::path manifest_path() const { return manifest.empty() ? data_dir / "manifest.csv" : manifest; }
    learn::SfsConfig sfs(std::uint64_t seed) const;
    /// Checks ranges and, when `check_paths`, that the data paths exist.
    void validate(bool check_paths = true) const;
};

/// Unknown keys are rejected so typos surface as validation errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Every field that influences results; `workers` and `output_dir` are left
/// out so they do not change the hash.
nlohmann::json to_json(const ExperimentConfig& c);

/// 16 hex digits of FNV-1a 64 over the canonical JSON.
std::string config_hash(const ExperimentConfig& c);
std::filesystem::path artifact_dir(const ExperimentConfig& c);

} // namespace nodfuse::pipeline
