#include "nodfuse/neural/architecture.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"

namespace nodfuse::neural {

using nlohmann::json;

namespace {

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

std::string layer_error(std::size_t index, const std::string& what)
{
    return "layer " + std::to_string(index) + ": " + what;
}

const char* padding_name(Padding p) { return p == Padding::same ? "same" : "valid"; }

Padding padding_from(const std::string& s)
{
    if (s == "same")
        return Padding::same;
    if (s == "valid")
        return Padding::valid;
    throw ValidationError("unknown padding '" + s + "'");
}

} // namespace

int window_output(int n, int window, int stride, Padding padding)
{
    if (padding == Padding::same)
        return (n + stride - 1) / stride;
    return n >= window ? (n - window) / stride + 1 : 0;
}

int window_pad_before(int n, int window, int stride, Padding padding)
{
    if (padding == Padding::valid)
        return 0;
    const int out = window_output(n, window, stride, padding);
    const int total = std::max((out - 1) * stride + window - n, 0);
    return total / 2;
}

CropPlan multicrop_plan(const MultiCrop& spec, int n)
{
    if (spec.crop_fractions.size() != spec.pool_counts.size() || spec.pool_counts.empty())
        throw ValidationError("multicrop: crop_fractions and pool_counts must have equal, nonzero length");
    const int deepest = *std::max_element(spec.pool_counts.begin(), spec.pool_counts.end());
    auto pooled = [](int size, int times) {
        for (int i = 0; i < times; ++i)
            size = window_output(size, 2, 2, Padding::same);
        return size;
    };
    CropPlan plan;
    plan.target = pooled(n, deepest);
    for (std::size_t b = 0; b < spec.pool_counts.size(); ++b) {
        const int k = spec.pool_counts[b];
        const double f = spec.crop_fractions[b];
        if (!(f > 0 && f <= 1) || k < 0)
            throw ValidationError("multicrop: fractions must be in (0,1] and pool counts >= 0");
        int c = f == 1.0 ? n : static_cast<int>(std::lround(n * f));
        c = std::min(n, std::max(c, plan.target << k));
        if (pooled(c, k) != plan.target)
            throw ValidationError("multicrop: extent " + std::to_string(n) + " cannot be reduced to a common shape");
        plan.crop.push_back(c);
    }
    return plan;
}

std::vector<LayerInfo> describe(const ArchitectureSpec& spec)
{
    if (spec.layers.empty())
        throw ValidationError("architecture has no layers");
    if (!std::holds_alternative<Output>(spec.layers.back()))
        throw ValidationError("architecture must end with an Output layer");
    FeatureShape cur{1, spec.input.x, spec.input.y, spec.input.z};
    if (cur.x < 1 || cur.y < 1 || cur.z < 1)
        throw ValidationError("architecture input shape must be positive");
    std::vector<LayerInfo> out;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        LayerInfo info;
        std::visit(overloaded{
                       [&](const Conv3D& c) {
                           if (c.out_channels < 1 || c.kernel < 1 || c.stride < 1)
                               throw ValidationError(layer_error(i, "conv3d needs positive channels/kernel/stride"));
                           info.kind = "conv3d";
                           info.parameters = std::size_t(c.kernel) * c.kernel * c.kernel * cur.c * c.out_channels
                                             + c.out_channels;
                           cur = {c.out_channels, window_output(cur.x, c.kernel, c.stride, c.padding),
                                  window_output(cur.y, c.kernel, c.stride, c.padding),
                                  window_output(cur.z, c.kernel, c.stride, c.padding)};
                       },
                       [&](const MaxPool3D& p) {
                           if (p.window < 1 || p.stride < 1)
                               throw ValidationError(layer_error(i, "maxpool3d needs positive window/stride"));
                           info.kind = "maxpool3d";
                           cur = {cur.c, window_output(cur.x, p.window, p.stride, p.padding),
                                  window_output(cur.y, p.window, p.stride, p.padding),
                                  window_output(cur.z, p.window, p.stride, p.padding)};
                       },
                       [&](const MultiCrop& m) {
                           info.kind = "multicrop";
                           if (cur.x < 4 || cur.y < 4 || cur.z < 4)
                               throw ValidationError(layer_error(i, "multicrop needs spatial dims >= 4"));
                           FeatureShape next{cur.c * int(m.pool_counts.size()), 0, 0, 0};
                           try {
                               next.x = multicrop_plan(m, cur.x).target;
                               next.y = multicrop_plan(m, cur.y).target;
                               next.z = multicrop_plan(m, cur.z).target;
                           } catch (const ValidationError& e) {
                               throw ValidationError(layer_error(i, e.what()));
                           }
                           cur = next;
                       },
                       [&](const Dense& d) {
                           if (d.units < 1)
                               throw ValidationError(layer_error(i, "dense needs units >= 1"));
                           info.kind = "dense";
                           info.parameters = cur.count() * d.units + d.units;
                           cur = {d.units, 1, 1, 1};
                       },
                       [&](const LayerNormReLU&) {
                           info.kind = "layernorm_relu";
                           if (cur.count() < 2)
                               throw ValidationError(layer_error(i, "layer norm needs at least 2 units"));
                           info.parameters = 2 * std::size_t(cur.c);
                       },
                       [&](const Dropout& d) {
                           if (!(d.keep_prob > 0 && d.keep_prob <= 1))
                               throw ValidationError(layer_error(i, "dropout keep_prob must be in (0,1]"));
                           info.kind = "dropout";
                       },
                       [&](const Output& o) {
                           if (i + 1 != spec.layers.size())
                               throw ValidationError(layer_error(i, "output layer must be last"));
                           if (o.units != 2)
                               throw ValidationError(layer_error(i, "output layer must have 2 units"));
                           info.kind = "output";
                           info.parameters = cur.count() * o.units + o.units;
                           cur = {o.units, 1, 1, 1};
                       },
                   },
                   spec.layers[i]);
        if (cur.x < 1 || cur.y < 1 || cur.z < 1)
            throw ValidationError(layer_error(i, info.kind + " reduces a spatial dim below 1"));
        info.out = cur;
        out.push_back(info);
    }
    return out;
}

std::size_t parameter_count(const ArchitectureSpec& spec)
{
    std::size_t n = 0;
    for (const auto& l : describe(spec))
        n += l.parameters;
    return n;
}

int last_hidden_dense(const ArchitectureSpec& spec)
{
    for (int i = int(spec.layers.size()) - 1; i >= 0; --i)
        if (std::holds_alternative<Dense>(spec.layers[i]))
            return i;
    return -1;
}

namespace {

void conv_ln(std::vector<LayerSpec>& l, int channels, int kernel = 3, int stride = 1)
{
    l.push_back(Conv3D{channels, kernel, stride, Padding::same});
    l.push_back(LayerNormReLU{});
}

void dense_ln_drop(std::vector<LayerSpec>& l, int units)
{
    l.push_back(Dense{units});
    l.push_back(LayerNormReLU{});
    l.push_back(Dropout{0.9});
}

ArchitectureSpec alexnet(int c1, int c2, int c3, int c4, int first_kernel, int first_stride, int second_kernel,
                         int fc)
{
    ArchitectureSpec s;
    auto& l = s.layers;
    conv_ln(l, c1, first_kernel, first_stride);
    l.push_back(MaxPool3D{3, 2});
    conv_ln(l, c2, second_kernel);
    l.push_back(MaxPool3D{3, 2});
    conv_ln(l, c3);
    conv_ln(l, c3);
    conv_ln(l, c4);
    l.push_back(MaxPool3D{3, 2});
    dense_ln_drop(l, fc);
    dense_ln_drop(l, fc);
    l.push_back(Output{});
    return s;
}

ArchitectureSpec vgg16(const int (&ch)[5], int first_kernel, int first_stride, int fc)
{
    ArchitectureSpec s;
    auto& l = s.layers;
    const int per_block[5] = {2, 2, 3, 3, 3};
    for (int b = 0; b < 5; ++b) {
        for (int k = 0; k < per_block[b]; ++k) {
            if (b == 0 && k == 0)
                conv_ln(l, ch[0], first_kernel, first_stride);
            else
                conv_ln(l, ch[b]);
        }
        l.push_back(MaxPool3D{2, 2});
    }
    dense_ln_drop(l, fc);
    dense_ln_drop(l, fc);
    l.push_back(Output{});
    return s;
}

ArchitectureSpec multicrop(int c1, int c2, int first_kernel, int first_stride, int fc)
{
    ArchitectureSpec s;
    auto& l = s.layers;
    conv_ln(l, c1, first_kernel, first_stride);
    l.push_back(MultiCrop{});
    conv_ln(l, c2);
    l.push_back(MaxPool3D{2, 2});
    conv_ln(l, c2);
    l.push_back(MaxPool3D{2, 2});
    dense_ln_drop(l, fc);
    l.push_back(Output{});
    return s;
}

} // namespace

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"alexnet3d",     "vgg16_3d",     "multicrop3d",
                                                "alexnet3d_toy", "vgg16_3d_toy", "multicrop3d_toy"};
    return names;
}

ArchitectureSpec preset(std::string_view name, std::optional<ingest::Shape3> input)
{
    const ingest::Shape3 full{105, 97, 129};
    const ingest::Shape3 toy{16, 16, 16};
    ArchitectureSpec s;
    if (name == "alexnet3d") {
        s = alexnet(96, 256, 384, 256, 11, 4, 5, 4096);
        s.input = full;
    } else if (name == "vgg16_3d") {
        s = vgg16({64, 128, 256, 512, 512}, 11, 4, 4096);
        s.input = full;
    } else if (name == "multicrop3d") {
        s = multicrop(64, 64, 11, 4, 32);
        s.input = full;
    } else if (name == "alexnet3d_toy") {
        s = alexnet(4, 8, 8, 8, 5, 2, 3, 16);
        s.input = toy;
    } else if (name == "vgg16_3d_toy") {
        s = vgg16({4, 8, 8, 16, 16}, 5, 2, 16);
        s.input = toy;
    } else if (name == "multicrop3d_toy") {
        s = multicrop(4, 8, 5, 2, 8);
        s.input = toy;
    } else {
        std::string valid;
        for (const auto& n : preset_names())
            valid += (valid.empty() ? "" : ", ") + n;
        throw ValidationError("unknown architecture preset '" + std::string(name) + "' (valid: " + valid + ")");
    }
    s.name = std::string(name);
    if (input)
        s.input = *input;
    describe(s);
    return s;
}

json to_json(const ArchitectureSpec& spec)
{
    json layers = json::array();
    for (const auto& layer : spec.layers)
        std::visit(overloaded{
                       [&](const Conv3D& c) {
                           layers.push_back({{"type", "conv3d"},
                                             {"out_channels", c.out_channels},
                                             {"kernel", c.kernel},
                                             {"stride", c.stride},
                                             {"padding", padding_name(c.padding)}});
                       },
                       [&](const MaxPool3D& p) {
                           layers.push_back({{"type", "maxpool3d"},
                                             {"window", p.window},
                                             {"stride", p.stride},
                                             {"padding", padding_name(p.padding)}});
                       },
                       [&](const MultiCrop& m) {
                           layers.push_back(
                               {{"type", "multicrop"}, {"crop_fractions", m.crop_fractions}, {"pool_counts", m.pool_counts}});
                       },
                       [&](const Dense& d) { layers.push_back({{"type", "dense"}, {"units", d.units}}); },
                       [&](const LayerNormReLU&) { layers.push_back({{"type", "layernorm_relu"}}); },
                       [&](const Dropout& d) { layers.push_back({{"type", "dropout"}, {"keep_prob", d.keep_prob}}); },
                       [&](const Output& o) { layers.push_back({{"type", "output"}, {"units", o.units}}); },
                   },
                   layer);
    return {{"name", spec.name}, {"input", {spec.input.x, spec.input.y, spec.input.z}}, {"layers", layers}};
}

ArchitectureSpec spec_from_json(const json& j)
{
    ArchitectureSpec s;
    try {
        s.name = j.at("name").get<std::string>();
        auto in = j.at("input").get<std::vector<int>>();
        if (in.size() != 3)
            throw ValidationError("architecture input needs 3 entries");
        s.input = {in[0], in[1], in[2]};
        for (const auto& l : j.at("layers")) {
            const auto type = l.at("type").get<std::string>();
            if (type == "conv3d")
                s.layers.push_back(Conv3D{l.at("out_channels"), l.at("kernel"), l.at("stride"),
                                          padding_from(l.at("padding"))});
            else if (type == "maxpool3d")
                s.layers.push_back(MaxPool3D{l.at("window"), l.at("stride"), padding_from(l.at("padding"))});
            else if (type == "multicrop")
                s.layers.push_back(MultiCrop{l.at("crop_fractions").get<std::vector<double>>(),
                                             l.at("pool_counts").get<std::vector<int>>()});
            else if (type == "dense")
                s.layers.push_back(Dense{l.at("units")});
            else if (type == "layernorm_relu")
                s.layers.push_back(LayerNormReLU{});
            else if (type == "dropout")
                s.layers.push_back(Dropout{l.at("keep_prob")});
            else if (type == "output")
                s.layers.push_back(Output{l.at("units")});
            else
                throw ValidationError("unknown layer type '" + type + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("architecture json: ") + e.what());
    }
    describe(s);
    return s;
}

} // namespace nodfuse::neural
