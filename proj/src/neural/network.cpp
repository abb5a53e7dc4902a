#include "nodfuse/neural/network.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "nodfuse/error.hpp"

namespace nodfuse::neural {

template <class T>
Network<T>::Network(ArchitectureSpec spec, std::uint64_t init_seed) : spec_(std::move(spec))
{
    describe(spec_);
    Rng rng(init_seed);
    FeatureShape cur{1, spec_.input.x, spec_.input.y, spec_.input.z};
    acts_.emplace_back(cur.count());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        Rng layer_rng = rng.derive(i);
        layers_.push_back(make_layer<T>(spec_.layers[i], cur, layer_rng));
        cur = layers_.back()->out_shape();
        acts_.emplace_back(cur.count());
    }
    grads_.resize(acts_.size());
    for (std::size_t i = 0; i < acts_.size(); ++i)
        grads_[i].resize(acts_[i].size());
}

template <class T>
std::span<const T> Network<T>::forward(std::span<const T> input, bool train, Rng* rng)
{
    if (input.size() != acts_[0].size())
        throw ValidationError("network input has " + std::to_string(input.size()) + " values, expected "
                              + std::to_string(acts_[0].size()));
    std::copy(input.begin(), input.end(), acts_[0].begin());
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->forward(acts_[i], acts_[i + 1], train, rng);
    return acts_.back();
}

template <class T>
void Network<T>::backward(std::span<const T> grad_logits)
{
    std::copy(grad_logits.begin(), grad_logits.end(), grads_.back().begin());
    for (std::size_t i = layers_.size(); i-- > 0;)
        layers_[i]->backward(acts_[i], acts_[i + 1], grads_[i + 1], grads_[i]);
}

template <class T>
void Network<T>::zero_grad()
{
    for (auto& l : layers_)
        l->zero_grad();
}

template <class T>
std::size_t Network<T>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_)
        n += l->params().size();
    return n;
}

template <class T>
void Network<T>::set_parameters(std::span<const T> flat)
{
    if (flat.size() != parameter_count())
        throw ValidationError("parameter count mismatch");
    std::size_t off = 0;
    for (auto& l : layers_) {
        auto p = l->params();
        std::copy(flat.begin() + std::ptrdiff_t(off), flat.begin() + std::ptrdiff_t(off + p.size()), p.begin());
        off += p.size();
    }
}

template <class T>
std::vector<T> Network<T>::parameters() const
{
    std::vector<T> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        auto p = l->params();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

template <class T>
std::vector<T> Network<T>::gradients() const
{
    std::vector<T> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        auto g = std::as_const(*l).grads();
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

template class Network<float>;
template class Network<double>;

} // namespace nodfuse::neural
