#include "nodfuse/neural/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nodfuse/error.hpp"
#include "nodfuse/neural/loss.hpp"

namespace nodfuse::neural {

double TrainConfig::learning_rate(int epoch) const
{
    double rate = schedule.front().rate;
    for (const auto& step : schedule)
        if (epoch >= step.first_epoch)
            rate = step.rate;
    return rate;
}

void TrainConfig::validate() const
{
    if (batch_size < 2)
        throw ValidationError("batch_size must be >= 2");
    if (schedule.empty())
        throw ValidationError("learning-rate schedule is empty");
    for (const auto& s : schedule)
        if (!(s.rate > 0) || s.first_epoch < 1)
            throw ValidationError("learning rates must be > 0 and start at epoch >= 1");
    if (max_epochs < 1)
        throw ValidationError("max_epochs must be >= 1");
    if (!(keep_prob > 0 && keep_prob <= 1))
        throw ValidationError("keep_prob must be in (0, 1]");
}

std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, int batch_size, Rng& rng)
{
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw ValidationError("training needs both classes");
    rng.shuffle(std::span(pos));
    rng.shuffle(std::span(neg));
    const std::size_t m = std::min(pos.size(), neg.size());
    const std::size_t half = std::size_t(std::max(1, batch_size / 2));
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < m; start += half) {
        const std::size_t end = std::min(m, start + half);
        std::vector<std::size_t> b;
        b.insert(b.end(), pos.begin() + std::ptrdiff_t(start), pos.begin() + std::ptrdiff_t(end));
        b.insert(b.end(), neg.begin() + std::ptrdiff_t(start), neg.begin() + std::ptrdiff_t(end));
        rng.shuffle(std::span(b));
        batches.push_back(std::move(b));
    }
    return batches;
}

TrainedNetwork train(ArchitectureSpec spec, std::span<const ingest::NoduleTensor> tensors, const TrainConfig& cfg)
{
    cfg.validate();
    for (auto& layer : spec.layers)
        if (auto* d = std::get_if<Dropout>(&layer))
            d->keep_prob = cfg.keep_prob;
    const std::size_t expect = spec.input.count();
    std::vector<int> labels;
    for (const auto& t : tensors) {
        if (!(t.shape == spec.input) || t.values.size() != expect)
            throw ValidationError("tensor " + t.nodule_id + " does not match the architecture input shape");
        labels.push_back(static_cast<int>(t.label));
    }

    Rng root(cfg.seed);
    TrainedNetwork out{Network<float>(spec, root.derive(1).next()), {}, false};
    Network<float>& net = out.net;
    Rng batch_rng = root.derive(2);
    Rng dropout_rng = root.derive(3);

    const std::size_t n_params = net.parameter_count();
    std::vector<float> m(n_params, 0.0f), v(n_params, 0.0f);
    std::vector<float> checkpoint = net.parameters();
    long step = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const double lr = cfg.learning_rate(epoch);
        const auto batches = balanced_batches(labels, cfg.batch_size, batch_rng);
        double loss_sum = 0;
        std::size_t seen = 0;
        for (const auto& batch : batches) {
            net.zero_grad();
            const float inv_n = 1.0f / float(batch.size());
            for (std::size_t idx : batch) {
                const auto logits = net.forward(tensors[idx].values, true, &dropout_rng);
                loss_sum += cross_entropy<double>(logits[0], logits[1], labels[idx]);
                auto g = cross_entropy_gradient<float>(logits[0], logits[1], labels[idx]);
                g[0] *= inv_n;
                g[1] *= inv_n;
                net.backward(g);
            }
            seen += batch.size();

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
            const float alpha = float(lr * std::sqrt(bc2) / bc1);
            const float b1 = float(cfg.beta1), b2 = float(cfg.beta2), eps = float(cfg.epsilon * std::sqrt(bc2));
            std::size_t off = 0;
            for (std::size_t li = 0; li < net.layer_count(); ++li) {
                auto p = net.layer(li).params();
                auto g = net.layer(li).grads();
                for (std::size_t k = 0; k < p.size(); ++k, ++off) {
                    m[off] = b1 * m[off] + (1 - b1) * g[k];
                    v[off] = b2 * v[off] + (1 - b2) * g[k] * g[k];
                    p[k] -= alpha * m[off] / (std::sqrt(v[off]) + eps);
                }
            }
        }
        const double epoch_loss = loss_sum / double(seen);
        bool finite = std::isfinite(epoch_loss);
        if (finite) {
            for (float x : net.parameters())
                if (!std::isfinite(x)) {
                    finite = false;
                    break;
                }
        }
        if (!finite) {
            net.set_parameters(checkpoint);
            out.diverged = true;
            break;
        }
        checkpoint = net.parameters();
        out.log.push_back({epoch, epoch_loss, lr});
        if (epoch_loss <= cfg.stop_loss)
            break;
    }
    return out;
}

OutputFeatures output_features(Network<float>& net, const ingest::NoduleTensor& t)
{
    const auto logits = net.forward(t.values);
    return {double(logits[0]), double(logits[1])};
}

std::vector<double> ffl_features(Network<float>& net, const ingest::NoduleTensor& t)
{
    const auto& spec = net.spec();
    const int dense = last_hidden_dense(spec);
    if (dense < 0)
        throw ValidationError("architecture " + spec.name + " has no hidden fully connected layer");
    std::size_t layer = std::size_t(dense);
    if (layer + 1 < spec.layers.size() && std::holds_alternative<LayerNormReLU>(spec.layers[layer + 1]))
        ++layer;
    net.forward(t.values);
    const auto act = net.activation(layer);
    return {act.begin(), act.end()};
}

double predict_probability(Network<float>& net, const ingest::NoduleTensor& t)
{
    const auto logits = net.forward(t.values);
    return softmax<double>(logits[0], logits[1])[1];
}

} // namespace nodfuse::neural
