#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nodfuse/ingest/tensor.hpp"

namespace nodfuse::neural {

/// Per-sample activation shape: channels x (x, y, z). Dense layers use
/// c = units with a 1x1x1 spatial extent.
struct FeatureShape {
    int c = 1;
    int x = 1;
    int y = 1;
    int z = 1;

    std::size_t spatial() const { return std::size_t(x) * std::size_t(y) * std::size_t(z); }
    std::size_t count() const { return std::size_t(c) * spatial(); }
    int operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
    bool operator==(const FeatureShape&) const = default;
};

enum class Padding { same, valid };

struct Conv3D {
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    Padding padding = Padding::same;
};

struct MaxPool3D {
    int window = 2;
    int stride = 2;
    Padding padding = Padding::same;
};

/// Concatenates center crops of the input that are max-pooled (2, stride 2)
/// a different number of times so every branch reaches the same extent.
struct MultiCrop {
    std::vector<double> crop_fractions{1.0, 0.5, 0.25};
    std::vector<int> pool_counts{2, 1, 0};
};

struct Dense {
    int units = 1;
};

/// Normalization over every unit (all channels and positions) of one sample,
/// then per-channel gain/bias and ReLU.
struct LayerNormReLU {};

struct Dropout {
    double keep_prob = 0.9;
};

/// Final linear layer producing the class logits.
struct Output {
    int units = 2;
};

using LayerSpec = std::variant<Conv3D, MaxPool3D, MultiCrop, Dense, LayerNormReLU, Dropout, Output>;

struct ArchitectureSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    ingest::Shape3 input{16, 16, 16};
};

struct LayerInfo {
    std::string kind;
    FeatureShape out;
    std::size_t parameters = 0;
};

/// Validates the stack and reports per-layer output shapes and parameter
/// counts. Throws ValidationError naming the offending layer index.
std::vector<LayerInfo> describe(const ArchitectureSpec& spec);
std::size_t parameter_count(const ArchitectureSpec& spec);

/// Spatial output size of a strided window op.
int window_output(int n, int window, int stride, Padding padding);
/// Leading padding for `same` windows (TensorFlow convention).
int window_pad_before(int n, int window, int stride, Padding padding);

/// Per-branch crop sizes for multi-crop pooling on an input of extent `n`.
struct CropPlan {
    int target = 0;
    std::vector<int> crop; // one per branch
};
CropPlan multicrop_plan(const MultiCrop& spec, int n);

/// Index of the last hidden Dense layer, or -1.
int last_hidden_dense(const ArchitectureSpec& spec);

/// Full-size presets `alexnet3d`, `vgg16_3d`, `multicrop3d` (default input
/// 105x97x129) and their `_toy` variants (default input 16^3).
ArchitectureSpec preset(std::string_view name, std::optional<ingest::Shape3> input = std::nullopt);
const std::vector<std::string>& preset_names();

nlohmann::json to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const nlohmann::json& j);

} // namespace nodfuse::neural
