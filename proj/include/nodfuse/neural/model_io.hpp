#pragma once

#include <filesystem>
#include <vector>

#include "nodfuse/neural/train.hpp"

namespace nodfuse::neural {

// Model container, version 1:
//   8 bytes  magic "NDFSCNN\0"
//   u32 LE   format version
//   u64 LE   header length
//   header   JSON {"architecture": ..., "parameters": [per-layer counts], "log": [...], "diverged": bool}
//   f32 LE   parameter blobs, layer by layer in declaration order
void save_model(const std::filesystem::path& path, const TrainedNetwork& model);
TrainedNetwork load_model(const std::filesystem::path& path);

/// `epoch,loss,lr` with a header row.
void write_training_log(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

} // namespace nodfuse::neural
