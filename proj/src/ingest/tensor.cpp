#include "nodfuse/ingest/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "nodfuse/error.hpp"

namespace nodfuse::ingest {

namespace {

constexpr const char* kAxisNames = "xyz";

std::size_t flat(const Shape3& s, int x, int y, int z)
{
    return std::size_t(x) + std::size_t(s.x) * (std::size_t(y) + std::size_t(s.y) * z);
}

// In-plane quarter turn of axes (a, b): new_a = n_b - 1 - p_b, new_b = p_a.
NoduleTensor quarter_turn(const NoduleTensor& t, int a, int b)
{
    NoduleTensor out = t;
    out.shape[a] = t.shape[b];
    out.shape[b] = t.shape[a];
    for (int z = 0; z < t.shape.z; ++z)
        for (int y = 0; y < t.shape.y; ++y)
            for (int x = 0; x < t.shape.x; ++x) {
                std::array<int, 3> p{x, y, z};
                std::array<int, 3> q = p;
                q[a] = t.shape[b] - 1 - p[b];
                q[b] = p[a];
                out.values[flat(out.shape, q[0], q[1], q[2])] = t.values[flat(t.shape, x, y, z)];
            }
    return out;
}

NoduleTensor reverse_axis(const NoduleTensor& t, int axis)
{
    NoduleTensor out = t;
    for (int z = 0; z < t.shape.z; ++z)
        for (int y = 0; y < t.shape.y; ++y)
            for (int x = 0; x < t.shape.x; ++x) {
                std::array<int, 3> q{x, y, z};
                q[axis] = t.shape[axis] - 1 - q[axis];
                out.values[flat(t.shape, q[0], q[1], q[2])] = t.values[flat(t.shape, x, y, z)];
            }
    return out;
}

// Rotation about `axis` acts on the remaining two axes in cyclic order.
std::pair<int, int> rotation_plane(Axis axis)
{
    switch (axis) {
    case Axis::x: return {1, 2};
    case Axis::y: return {2, 0};
    case Axis::z: return {0, 1};
    }
    return {0, 1};
}

int flip_axis(Plane plane)
{
    switch (plane) {
    case Plane::yz: return 0;
    case Plane::xz: return 1;
    case Plane::xy: return 2;
    }
    return 2;
}

} // namespace

std::string AugmentationTag::name() const
{
    switch (kind) {
    case Kind::identity: return "identity";
    case Kind::rotation: return std::string("rot") + kAxisNames[int(axis)] + std::to_string(degrees);
    case Kind::flip: {
        static const char* names[] = {"flip_xy", "flip_yz", "flip_xz"};
        return names[int(plane)];
    }
    }
    return "?";
}

const std::array<AugmentationTag, 13>& augmentation_tags()
{
    static const std::array<AugmentationTag, 13> tags = [] {
        std::array<AugmentationTag, 13> t{};
        int i = 0;
        t[i++] = AugmentationTag{};
        for (Axis axis : {Axis::x, Axis::y, Axis::z})
            for (int deg : {90, 180, 270})
                t[i++] = AugmentationTag{AugmentationTag::Kind::rotation, axis, deg, Plane::xy};
        for (Plane plane : {Plane::xy, Plane::yz, Plane::xz})
            t[i++] = AugmentationTag{AugmentationTag::Kind::flip, Axis::z, 0, plane};
        return t;
    }();
    return tags;
}

NoduleTensor crop_roi(const Volume& v, Label label, std::string id)
{
    const Box box = v.roi_box();
    NoduleTensor t;
    t.shape = {box.extent(0), box.extent(1), box.extent(2)};
    t.values.assign(t.shape.count(), 0.0f);
    t.label = label;
    t.nodule_id = std::move(id);
    for (int z = box.lo[2]; z <= box.hi[2]; ++z)
        for (int y = box.lo[1]; y <= box.hi[1]; ++y)
            for (int x = box.lo[0]; x <= box.hi[0]; ++x)
                if (v.inside(x, y, z))
                    t.values[flat(t.shape, x - box.lo[0], y - box.lo[1], z - box.lo[2])] = v.value(x, y, z);
    return t;
}

NoduleTensor embed_centered(const NoduleTensor& t, Shape3 shape)
{
    std::array<int, 3> offset{};
    for (int a = 0; a < 3; ++a) {
        if (t.shape[a] > shape[a])
            throw ValidationError(std::string("ROI extent ") + std::to_string(t.shape[a]) + " exceeds tensor size "
                                  + std::to_string(shape[a]) + " along axis " + kAxisNames[a]);
        offset[a] = (shape[a] - t.shape[a]) / 2;
    }
    NoduleTensor out;
    out.shape = shape;
    out.values.assign(shape.count(), 0.0f);
    out.label = t.label;
    out.nodule_id = t.nodule_id;
    out.tag = t.tag;
    for (int z = 0; z < t.shape.z; ++z)
        for (int y = 0; y < t.shape.y; ++y) {
            const auto src = t.values.begin() + std::ptrdiff_t(flat(t.shape, 0, y, z));
            std::copy(src, src + t.shape.x,
                      out.values.begin() + std::ptrdiff_t(flat(shape, offset[0], y + offset[1], z + offset[2])));
        }
    return out;
}

NoduleTensor build_tensor(const Volume& v, Shape3 shape, TensorMode mode, Label label, std::string id)
{
    if (shape.x <= 0 || shape.y <= 0 || shape.z <= 0)
        throw ValidationError("tensor shape must be positive");
    if (mode == TensorMode::segmented)
        return embed_centered(crop_roi(v, label, std::move(id)), shape);

    double centroid[3] = {0, 0, 0};
    std::size_t n = 0;
    const auto& d = v.dims();
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                if (v.inside(x, y, z)) {
                    centroid[0] += x;
                    centroid[1] += y;
                    centroid[2] += z;
                    ++n;
                }
    std::array<int, 3> start{};
    for (int a = 0; a < 3; ++a)
        start[a] = static_cast<int>(std::floor(centroid[a] / double(n) + 0.5)) - shape[a] / 2;

    NoduleTensor t;
    t.shape = shape;
    t.values.assign(shape.count(), 0.0f);
    t.label = label;
    t.nodule_id = std::move(id);
    for (int z = 0; z < shape.z; ++z)
        for (int y = 0; y < shape.y; ++y)
            for (int x = 0; x < shape.x; ++x) {
                const int sx = start[0] + x, sy = start[1] + y, sz = start[2] + z;
                if (v.in_bounds(sx, sy, sz))
                    t.values[flat(shape, x, y, z)] = v.value(sx, sy, sz);
            }
    return t;
}

Shape3 dataset_shape(std::span<const Volume> volumes)
{
    if (volumes.empty())
        throw ValidationError("dataset_shape needs at least one volume");
    Shape3 shape{0, 0, 0};
    for (const auto& v : volumes) {
        const Box box = v.roi_box();
        const std::array<int, 3> e{box.extent(0), box.extent(1), box.extent(2)};
        for (const auto& tag : augmentation_tags()) {
            std::array<int, 3> p = e;
            if (tag.kind == AugmentationTag::Kind::rotation && tag.degrees != 180) {
                auto [a, b] = rotation_plane(tag.axis);
                std::swap(p[a], p[b]);
            }
            for (int a = 0; a < 3; ++a)
                shape[a] = std::max(shape[a], p[a]);
        }
    }
    return shape;
}

NoduleTensor apply_augmentation(const NoduleTensor& t, const AugmentationTag& tag)
{
    NoduleTensor out;
    switch (tag.kind) {
    case AugmentationTag::Kind::identity:
        out = t;
        break;
    case AugmentationTag::Kind::rotation: {
        auto [a, b] = rotation_plane(tag.axis);
        if (tag.degrees == 180) {
            out = reverse_axis(reverse_axis(t, a), b);
        } else {
            out = quarter_turn(t, a, b);
            if (tag.degrees == 270)
                out = reverse_axis(reverse_axis(out, a), b);
            else if (tag.degrees != 90)
                throw ValidationError("rotation angle must be 90, 180 or 270");
        }
        break;
    }
    case AugmentationTag::Kind::flip:
        out = reverse_axis(t, flip_axis(tag.plane));
        break;
    }
    out.tag = tag;
    return out;
}

std::vector<NoduleTensor> augment(const NoduleTensor& t)
{
    std::vector<NoduleTensor> out;
    out.reserve(13);
    for (const auto& tag : augmentation_tags())
        out.push_back(apply_augmentation(t, tag));
    return out;
}

} // namespace nodfuse::ingest
