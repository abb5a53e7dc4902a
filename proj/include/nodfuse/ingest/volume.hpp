#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nodfuse::ingest {

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const { return std::size_t(nx) * std::size_t(ny) * std::size_t(nz); }
    int operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
    bool operator==(const Dims&) const = default;
};

/// Voxel size in mm along x, y, z.
struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    double operator[](int axis) const { return axis == 0 ? sx : axis == 1 ? sy : sz; }
    bool operator==(const Spacing&) const = default;
};

/// Inclusive voxel-index bounding box.
struct Box {
    std::array<int, 3> lo{};
    std::array<int, 3> hi{};

    int extent(int axis) const { return hi[axis] - lo[axis] + 1; }
};

/// Scalar field on a regular grid plus a binary region-of-interest mask.
///
/// Storage is x-fastest: index = x + nx * (y + ny * z). The constructor
/// rejects mismatched sizes, non-positive spacing and an empty mask.
class Volume {
public:
    Volume(Dims dims, Spacing spacing, std::vector<float> voxels, std::vector<std::uint8_t> mask);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::span<const float> voxels() const { return voxels_; }
    std::span<const std::uint8_t> mask() const { return mask_; }

    std::size_t index(int x, int y, int z) const
    {
        return std::size_t(x) + std::size_t(dims_.nx) * (std::size_t(y) + std::size_t(dims_.ny) * std::size_t(z));
    }
    float value(int x, int y, int z) const { return voxels_[index(x, y, z)]; }
    bool inside(int x, int y, int z) const { return mask_[index(x, y, z)] != 0; }
    bool in_bounds(int x, int y, int z) const
    {
        return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
    }

    std::size_t roi_count() const;
    Box roi_box() const;
    /// Intensities of masked voxels in storage order.
    std::vector<double> roi_values() const;

private:
    Dims dims_;
    Spacing spacing_;
    std::vector<float> voxels_;
    std::vector<std::uint8_t> mask_;
};

} // namespace nodfuse::ingest
