#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nodfuse/ingest/volume.hpp"

namespace nodfuse::radiomics {

using Offset = std::array<int, 3>; // (dx, dy, dz)

/// The 13 unique 3D neighbour directions used for co-occurrence.
const std::array<Offset, 13>& glcm_directions();
const std::array<int, 5>& glcm_levels();    // 8 .. 128
const std::array<int, 4>& glcm_distances(); // 1 .. 4

struct GlcmConfig {
    int levels = 8;
    int distance = 1;
    Offset direction{0, 1, 0};
};

/// Every (levels, distance, direction) combination: 5 x 4 x 13 = 260.
std::vector<GlcmConfig> all_glcm_configs();

/// Quantized gray level (1..L) per voxel, 0 outside the mask. Linear bins
/// over the ROI's [min, max]; the maximum lands in bin L; a constant ROI maps
/// to bin 1.
std::vector<int> quantize(const ingest::Volume& v, int levels);

/// Symmetric co-occurrence counts. Entry (i, j) for gray levels i, j in
/// 1..L lives at counts[(i-1) * L + (j-1)].
struct Glcm {
    GlcmConfig config;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    int levels() const { return config.levels; }
    std::uint64_t count(int i, int j) const { return counts[std::size_t(i - 1) * config.levels + (j - 1)]; }
    double p(int i, int j) const { return total ? double(count(i, j)) / double(total) : 0.0; }
    bool empty() const { return total == 0; }
};

Glcm build_glcm(const ingest::Volume& v, const GlcmConfig& config);
/// Same, from precomputed `quantize(v, config.levels)` output.
Glcm build_glcm(const ingest::Dims& dims, std::span<const int> levels, const GlcmConfig& config);

enum TextureIndex : int {
    kEnergy,
    kEntropy,
    kCorrelation,
    kContrast,
    kTextureVariance,
    kSumMean,
    kInertia,
    kClusterShade,
    kClusterProminence,
    kHomogeneity,
    kMaxProbability,
    kInverseVariance,
    kTextureCount
};

using TextureStats = std::array<double, kTextureCount>;

/// The 12 statistics of one normalized GLCM; all zero for an empty matrix.
TextureStats glcm_statistics(const Glcm& g);

} // namespace nodfuse::radiomics
