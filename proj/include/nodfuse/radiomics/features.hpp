#pragma once

#include <array>
#include <string_view>

#include "nodfuse/ingest/volume.hpp"
#include "nodfuse/radiomics/glcm.hpp"

namespace nodfuse::radiomics {

inline constexpr std::size_t kIntensityCount = 9;
inline constexpr std::size_t kGeometricCount = 8;
inline constexpr std::size_t kHandcraftedCount = kIntensityCount + kGeometricCount + kTextureCount;

using IntensityFeatures = std::array<double, kIntensityCount>;
using GeometricFeatures = std::array<double, kGeometricCount>;

/// Column names in output order: intensity, geometric, texture.
const std::array<std::string_view, kHandcraftedCount>& handcrafted_names();

/// min, max, mean, std, sum, median, skewness, kurtosis, variance over the
/// masked voxels. Variance and std use N-1; skewness and excess kurtosis use
/// population central moments and are 0 for zero-spread input.
IntensityFeatures intensity_features(const ingest::Volume& v);

/// volume, major/minor diameter, eccentricity, elongation, orientation,
/// bounding box volume, surface area ("perimeter"). Physical units (mm).
///
/// Shape terms come from the covariance of masked voxel centres with
/// eigenvalues l1 >= l2 >= l3: diameters 4*sqrt(l), eccentricity
/// sqrt(1 - l3/l1), elongation sqrt(l1/l3), orientation the angle in degrees
/// between the major axis and z. When l3 vanishes (planar or linear ROIs)
/// elongation uses the one-voxel second moment min(s)^2/12 in its place; a
/// single voxel yields zero diameters, eccentricity 0, elongation 1.
GeometricFeatures geometric_features(const ingest::Volume& v);

/// Mean of the 12 GLCM statistics over all 260 configurations, skipping
/// configurations without any valid pair.
TextureStats texture_features(const ingest::Volume& v);

struct FeatureVector {
    std::array<double, kHandcraftedCount> values{};

    double operator[](std::string_view name) const;
};

FeatureVector handcrafted(const ingest::Volume& v);

} // namespace nodfuse::radiomics
