#pragma once

// Central finite-difference checks for single layers and whole networks in
// double precision. The scalar probed is L = r . forward(x) for a fixed random
// projection r, so d L / d out = r.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nodfuse/neural/layers.hpp"
#include "nodfuse/neural/loss.hpp"
#include "nodfuse/neural/network.hpp"
#include "nodfuse/rng.hpp"

namespace nodfuse::oracle {

inline double relative_error(std::span<const double> a, std::span<const double> b)
{
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::sqrt(na) + std::sqrt(nb);
    return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

struct GradCheck {
    double input_error = 0;
    double param_error = 0;
    double worst() const { return std::max(input_error, param_error); }
};

/// Compares a layer's backward pass against central differences of its
/// forward pass. Stochastic layers replay their first mask (rng = nullptr).
inline GradCheck check_layer(neural::Layer<double>& layer, Rng& rng, double h = 1e-5)
{
    const std::size_t n_in = layer.in_shape().count();
    const std::size_t n_out = layer.out_shape().count();
    std::vector<double> x(n_in), r(n_out), out(n_out);
    for (auto& v : x)
        v = rng.uniform(-1, 1);
    for (auto& v : r)
        v = rng.uniform(-1, 1);
    // Perturb initialized parameters so layer norm gain/bias are not trivial.
    for (auto& p : layer.params())
        p += rng.uniform(-0.3, 0.3);

    Rng mask_rng = rng.derive(99);
    layer.forward(x, out, true, &mask_rng);
    std::vector<double> grad_in(n_in);
    layer.zero_grad();
    layer.backward(x, out, r, grad_in);
    std::vector<double> grad_p(layer.grads().begin(), layer.grads().end());

    auto objective = [&]() {
        std::vector<double> o(n_out);
        layer.forward(x, o, true, nullptr);
        double s = 0;
        for (std::size_t i = 0; i < n_out; ++i)
            s += r[i] * o[i];
        return s;
    };
    auto numeric = [&](std::span<double> vars) {
        std::vector<double> g(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) {
            const double keep = vars[i];
            vars[i] = keep + h;
            const double up = objective();
            vars[i] = keep - h;
            const double down = objective();
            vars[i] = keep;
            g[i] = (up - down) / (2 * h);
        }
        return g;
    };
    GradCheck res;
    res.input_error = relative_error(grad_in, numeric(x));
    res.param_error = relative_error(grad_p, numeric(layer.params()));
    return res;
}

/// Whole-network check of d(cross entropy)/d(input) and d/d(parameters).
inline GradCheck check_network(neural::Network<double>& net, int label, Rng& rng, double h = 1e-5)
{
    std::vector<double> x(net.input_size());
    for (auto& v : x)
        v = rng.uniform(-1, 1);
    Rng mask_rng = rng.derive(7);
    auto loss = [&](bool first) {
        const auto y = net.forward(x, true, first ? &mask_rng : nullptr);
        return neural::cross_entropy(y[0], y[1], label);
    };
    loss(true);
    {
        const auto y = net.forward(x, true, nullptr);
        const auto g = neural::cross_entropy_gradient(y[0], y[1], label);
        net.zero_grad();
        net.backward(g);
    }
    const std::vector<double> gi(net.input_gradient().begin(), net.input_gradient().end());
    const std::vector<double> gp = net.gradients();

    std::vector<double> ni(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = loss(false);
        x[i] = keep - h;
        const double down = loss(false);
        x[i] = keep;
        ni[i] = (up - down) / (2 * h);
    }
    std::vector<double> p = net.parameters();
    std::vector<double> np(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        net.set_parameters(p);
        const double up = loss(false);
        p[i] = keep - h;
        net.set_parameters(p);
        const double down = loss(false);
        p[i] = keep;
        np[i] = (up - down) / (2 * h);
    }
    net.set_parameters(p);
    return {relative_error(gi, ni), relative_error(gp, np)};
}

/// Finite-difference check of the softmax + cross-entropy gradient at
/// random logits; returns the relative error.
inline double check_softmax_ce(Rng& rng, double h = 1e-6)
{
    const double y0 = rng.uniform(-5, 5), y1 = rng.uniform(-5, 5);
    const int label = int(rng.below(2));
    const auto g = neural::cross_entropy_gradient(y0, y1, label);
    const double n0 = (neural::cross_entropy(y0 + h, y1, label) - neural::cross_entropy(y0 - h, y1, label)) / (2 * h);
    const double n1 = (neural::cross_entropy(y0, y1 + h, label) - neural::cross_entropy(y0, y1 - h, label)) / (2 * h);
    const double a[2] = {g[0], g[1]}, n[2] = {n0, n1};
    return relative_error(a, n);
}

/// Random small layer configurations for each differentiable layer kind.
inline neural::FeatureShape random_shape(Rng& rng, int min_side, int max_side, int max_c)
{
    auto side = [&] { return min_side + int(rng.below(std::uint64_t(max_side - min_side + 1))); };
    return {1 + int(rng.below(std::uint64_t(max_c))), side(), side(), side()};
}

inline std::pair<neural::LayerSpec, neural::FeatureShape> random_layer(const std::string& kind, Rng& rng)
{
    using namespace neural;
    if (kind == "conv3d") {
        const Padding pad = rng.below(2) ? Padding::same : Padding::valid;
        const int k = 1 + int(rng.below(3));
        auto in = random_shape(rng, pad == Padding::valid ? k : 1, 5, 3);
        return {Conv3D{1 + int(rng.below(3)), k, 1 + int(rng.below(2)), pad}, in};
    }
    if (kind == "maxpool3d") {
        const Padding pad = rng.below(2) ? Padding::same : Padding::valid;
        const int w = 1 + int(rng.below(3));
        return {MaxPool3D{w, 1 + int(rng.below(3)), pad}, random_shape(rng, w, 6, 2)};
    }
    if (kind == "dense")
        return {Dense{1 + int(rng.below(5))}, random_shape(rng, 1, 3, 3)};
    if (kind == "layernorm_relu")
        return {LayerNormReLU{}, random_shape(rng, 2, 4, 3)};
    if (kind == "multicrop")
        return {MultiCrop{}, random_shape(rng, 4, 9, 2)};
    if (kind == "dropout")
        return {Dropout{0.5 + 0.5 * rng.uniform()}, random_shape(rng, 1, 3, 2)};
    return {Output{}, random_shape(rng, 1, 3, 3)};
}

} // namespace nodfuse::oracle
