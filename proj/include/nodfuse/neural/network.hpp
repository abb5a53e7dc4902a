#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "nodfuse/neural/architecture.hpp"
#include "nodfuse/neural/layers.hpp"

namespace nodfuse::neural {

/// Sequential 3D CNN over single samples. Activations of the last forward
/// pass are kept for backward and for feature extraction.
template <class T>
class Network {
public:
    Network(ArchitectureSpec spec, std::uint64_t init_seed);

    const ArchitectureSpec& spec() const { return spec_; }
    std::size_t layer_count() const { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_[i]; }
    const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
    std::size_t input_size() const { return layers_.front()->in_shape().count(); }

    /// Returns the two output logits. `rng` feeds dropout when training.
    std::span<const T> forward(std::span<const T> input, bool train = false, Rng* rng = nullptr);
    /// Output of layer i from the last forward pass.
    std::span<const T> activation(std::size_t i) const { return acts_[i + 1]; }

    /// Accumulates parameter gradients for the last forward pass.
    void backward(std::span<const T> grad_logits);
    /// d(loss)/d(input) from the last backward pass.
    std::span<const T> input_gradient() const { return grads_[0]; }

    void zero_grad();
    std::size_t parameter_count() const;
    void set_parameters(std::span<const T> flat);
    std::vector<T> parameters() const;
    std::vector<T> gradients() const;

    template <class U>
    void copy_parameters_from(const Network<U>& other)
    {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            auto dst = layers_[i]->params();
            auto src = other.layer(i).params();
            for (std::size_t k = 0; k < dst.size(); ++k)
                dst[k] = T(src[k]);
        }
    }

private:
    ArchitectureSpec spec_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<std::vector<T>> acts_;  // acts_[0] = input
    std::vector<std::vector<T>> grads_; // same layout as acts_
};

extern template class Network<float>;
extern template class Network<double>;

} // namespace nodfuse::neural
