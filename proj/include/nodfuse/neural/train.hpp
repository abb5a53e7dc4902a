#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nodfuse/ingest/tensor.hpp"
#include "nodfuse/neural/network.hpp"

namespace nodfuse::neural {

/// Learning rate `rate` applies from `first_epoch` (1-based) until the next
/// step begins.
struct LrStep {
    int first_epoch = 1;
    double rate = 1e-3;
};

struct TrainConfig {
    int batch_size = 70;
    std::vector<LrStep> schedule{{1, 0.005}, {2, 0.001}, {5, 0.0005}, {9, 1e-4}};
    double stop_loss = 0.01; // stop once the epoch loss is <= this ...
    int max_epochs = 100;    // ... or after this many epochs
    double keep_prob = 0.9;  // applied to every Dropout layer
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    double learning_rate(int epoch) const;
    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double loss = 0;
    double lr = 0;
};

struct TrainedNetwork {
    Network<float> net;
    std::vector<EpochRecord> log;
    bool diverged = false; // parameters are the last finite epoch's
};

/// Balanced mini-batches for one epoch: the majority class is subsampled to
/// the minority count, and every batch holds batch_size/2 of each class.
std::vector<std::vector<std::size_t>> balanced_batches(std::span<const int> labels, int batch_size, Rng& rng);

/// Adam on mean cross-entropy over balanced, shuffled batches with the
/// configured step schedule. Deterministic for a fixed seed.
TrainedNetwork train(ArchitectureSpec spec, std::span<const ingest::NoduleTensor> tensors, const TrainConfig& cfg);

/// Pre-softmax logits: feature_n feeds the benign probability, feature_p
/// the malignant one.
struct OutputFeatures {
    double feature_n = 0;
    double feature_p = 0;
};

OutputFeatures output_features(Network<float>& net, const ingest::NoduleTensor& t);

/// Post-activation values of the last hidden dense layer at inference.
/// Throws ValidationError if the architecture has no hidden dense layer.
std::vector<double> ffl_features(Network<float>& net, const ingest::NoduleTensor& t);

/// Malignancy probability p1 at inference.
double predict_probability(Network<float>& net, const ingest::NoduleTensor& t);

} // namespace nodfuse::neural
