#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nodfuse/ingest/volume.hpp"

namespace nodfuse::ingest {

// On-disk layout for one nodule `<id>`:
//   <id>.vol.json   {"dims":[nx,ny,nz],"spacing_mm":[sx,sy,sz],"dtype":"f32","order":"x-fastest"}
//   <id>.vol.raw    little-endian f32 voxels, x-fastest
//   <id>.mask.raw   u8 mask, 0/1
void write_volume(const std::filesystem::path& dir, const std::string& id, const Volume& v);
Volume read_volume(const std::filesystem::path& dir, const std::string& id);

struct LabeledId {
    std::string id;
    int label = 0;
};

/// CSV `id,label` with a header row; labels must be 0 or 1.
std::vector<LabeledId> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<LabeledId>& rows);

} // namespace nodfuse::ingest
