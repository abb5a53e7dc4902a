#include "nodfuse/ingest/volume.hpp"

#include <algorithm>
#include <string>

#include "nodfuse/error.hpp"

namespace nodfuse::ingest {

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> voxels, std::vector<std::uint8_t> mask)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)), mask_(std::move(mask))
{
    if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0)
        throw ValidationError("volume dims must be positive");
    if (!(spacing_.sx > 0 && spacing_.sy > 0 && spacing_.sz > 0))
        throw ValidationError("volume spacing must be positive");
    if (voxels_.size() != dims_.count())
        throw ValidationError("voxel count " + std::to_string(voxels_.size()) + " does not match dims ("
                              + std::to_string(dims_.count()) + ")");
    if (mask_.size() != dims_.count())
        throw ValidationError("mask size does not match dims");
    bool any = false;
    for (auto& m : mask_) {
        if (m > 1)
            throw ValidationError("mask must be binary (0/1)");
        any = any || m != 0;
    }
    if (!any)
        throw ValidationError("mask has no voxels inside the ROI");
}

std::size_t Volume::roi_count() const
{
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

Box Volume::roi_box() const
{
    Box box;
    box.lo = {dims_.nx, dims_.ny, dims_.nz};
    box.hi = {-1, -1, -1};
    for (int z = 0; z < dims_.nz; ++z)
        for (int y = 0; y < dims_.ny; ++y)
            for (int x = 0; x < dims_.nx; ++x) {
                if (!inside(x, y, z))
                    continue;
                const std::array<int, 3> p{x, y, z};
                for (int a = 0; a < 3; ++a) {
                    box.lo[a] = std::min(box.lo[a], p[a]);
                    box.hi[a] = std::max(box.hi[a], p[a]);
                }
            }
    return box;
}

std::vector<double> Volume::roi_values() const
{
    std::vector<double> out;
    out.reserve(roi_count());
    for (std::size_t i = 0; i < voxels_.size(); ++i)
        if (mask_[i])
            out.push_back(voxels_[i]);
    return out;
}

} // namespace nodfuse::ingest
