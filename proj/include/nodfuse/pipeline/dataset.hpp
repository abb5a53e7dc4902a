#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nodfuse/ingest/tensor.hpp"
#include "nodfuse/ingest/volume.hpp"
#include "nodfuse/learn/feature_table.hpp"

namespace nodfuse::pipeline {

struct SynthOptions {
    std::size_t count = 200;
    std::uint64_t seed = 0;
    double malignant_fraction = 0.35;
};

/// Two-class ellipsoid nodules in lung-like background, written as
/// `<dir>/<id>.vol.*` plus `<dir>/manifest.csv`. Malignant nodules are
/// larger, more elongated and more heterogeneous.
void synth(const std::filesystem::path& dir, const SynthOptions& opt);

struct Dataset {
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<ingest::Volume> volumes; // resampled
};

/// Reads every manifest entry and resamples it. All per-nodule failures are
/// collected into one ValidationError.
Dataset load_dataset(const std::filesystem::path& data_dir, const std::filesystem::path& manifest,
                     double target_spacing, unsigned workers = 1);

/// 29 handcrafted features per nodule.
learn::FeatureTable handcrafted_table(const Dataset& d, unsigned workers = 1);

/// Segmented tensors (ROI crop embedded at the center of `shape`) or raw
/// patches around the ROI centroid.
std::vector<ingest::NoduleTensor> build_tensors(const Dataset& d, ingest::Shape3 shape, ingest::TensorMode mode,
                                                unsigned workers = 1);

} // namespace nodfuse::pipeline
