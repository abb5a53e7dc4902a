#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "nodfuse/ingest/volume.hpp"

namespace nodfuse::ingest {

struct Shape3 {
    int x = 0;
    int y = 0;
    int z = 0;

    std::size_t count() const { return std::size_t(x) * std::size_t(y) * std::size_t(z); }
    int operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
    int& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }
    bool operator==(const Shape3&) const = default;
};

enum class Axis { x, y, z };
/// Coordinate plane; flipping across a plane reverses the axis normal to it.
enum class Plane { xy, yz, xz };

/// One of the 13 lossless transforms: identity, 90/180/270 degree in-plane
/// rotations of the slices perpendicular to each axis, and three flips.
struct AugmentationTag {
    enum class Kind { identity, rotation, flip };
    Kind kind = Kind::identity;
    Axis axis = Axis::z;
    int degrees = 0;
    Plane plane = Plane::xy;

    std::string name() const;
    bool operator==(const AugmentationTag&) const = default;
};

/// The fixed tag set, identity first.
const std::array<AugmentationTag, 13>& augmentation_tags();

enum class Label : int { benign = 0, malignant = 1 };

struct NoduleTensor {
    Shape3 shape;
    std::vector<float> values; // x-fastest
    Label label = Label::benign;
    std::string nodule_id;
    AugmentationTag tag;

    float at(int x, int y, int z) const
    {
        return values[std::size_t(x) + std::size_t(shape.x) * (std::size_t(y) + std::size_t(shape.y) * z)];
    }
};

enum class TensorMode {
    segmented, // ROI bounding box centered, voxels outside the mask zeroed
    patch,     // window centered on the ROI centroid, raw intensities kept
};

NoduleTensor build_tensor(const Volume& v, Shape3 shape, TensorMode mode, Label label = Label::benign,
                          std::string id = {});

/// Segmented crop of exactly the ROI bounding box.
NoduleTensor crop_roi(const Volume& v, Label label = Label::benign, std::string id = {});

/// Places `t` at offset floor((T - S) / 2) inside a zero tensor of `shape`.
NoduleTensor embed_centered(const NoduleTensor& t, Shape3 shape);

/// Per-axis maximum ROI extent over all volumes and all 13 transforms.
Shape3 dataset_shape(std::span<const Volume> volumes);

NoduleTensor apply_augmentation(const NoduleTensor& t, const AugmentationTag& tag);

/// All 13 transforms of `t`, identity first; each output carries its tag.
std::vector<NoduleTensor> augment(const NoduleTensor& t);

} // namespace nodfuse::ingest
