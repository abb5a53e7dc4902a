#pragma once

#include <memory>
#include <span>
#include <vector>

#include "nodfuse/neural/architecture.hpp"
#include "nodfuse/rng.hpp"

namespace nodfuse::neural {

/// One differentiable stage operating on a single sample.
///
/// `forward` may cache what `backward` needs (argmax routes, dropout masks,
/// normalization statistics), so backward must follow the forward of the
/// same sample. Parameter gradients accumulate until `zero_grad`.
template <class T>
class Layer {
public:
    Layer(FeatureShape in, FeatureShape out) : in_shape_(in), out_shape_(out) {}
    virtual ~Layer() = default;

    const FeatureShape& in_shape() const { return in_shape_; }
    const FeatureShape& out_shape() const { return out_shape_; }

    /// `rng` is only consulted by stochastic layers in training mode; passing
    /// nullptr with train = true replays the previous random draw.
    virtual void forward(std::span<const T> in, std::span<T> out, bool train, Rng* rng) = 0;
    virtual void backward(std::span<const T> in, std::span<const T> out, std::span<const T> grad_out,
                          std::span<T> grad_in) = 0;

    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }
    std::span<T> grads() { return grads_; }
    std::span<const T> grads() const { return grads_; }
    void zero_grad() { std::fill(grads_.begin(), grads_.end(), T(0)); }

protected:
    void allocate(std::size_t n)
    {
        params_.assign(n, T(0));
        grads_.assign(n, T(0));
    }

    FeatureShape in_shape_;
    FeatureShape out_shape_;
    std::vector<T> params_;
    std::vector<T> grads_;
};

/// Builds the runtime layer for spec layer `spec` on input `in`. Trainable
/// layers are initialized He-uniform (fan-in) from `rng`; layer norm starts
/// at gain 1, bias 0.
template <class T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, FeatureShape in, Rng& rng);

} // namespace nodfuse::neural
