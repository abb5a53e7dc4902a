#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

namespace nodfuse::neural {

using Logits = std::array<double, 2>;

/// Two-class softmax, max-shifted so large logits cannot overflow.
template <class T>
std::array<T, 2> softmax(T y0, T y1)
{
    const T m = y0 > y1 ? y0 : y1;
    const T e0 = std::exp(y0 - m);
    const T e1 = std::exp(y1 - m);
    const T z = e0 + e1;
    return {e0 / z, e1 / z};
}

/// -log p_q via log-sum-exp; finite for any finite logits.
template <class T>
T cross_entropy(T y0, T y1, int label)
{
    const T m = y0 > y1 ? y0 : y1;
    const T lse = m + std::log(std::exp(y0 - m) + std::exp(y1 - m));
    return lse - (label == 1 ? y1 : y0);
}

/// d(cross_entropy)/d(y0, y1) = p - onehot(label).
template <class T>
std::array<T, 2> cross_entropy_gradient(T y0, T y1, int label)
{
    auto p = softmax(y0, y1);
    p[label == 1 ? 1 : 0] -= T(1);
    return p;
}

/// Mean cross entropy over a batch, natural log.
inline double batch_loss(std::span<const Logits> logits, std::span<const int> labels)
{
    if (logits.size() != labels.size() || logits.empty())
        throw std::invalid_argument("batch_loss: logits and labels must be non-empty and equal length");
    double sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        sum += cross_entropy(logits[i][0], logits[i][1], labels[i]);
    return sum / double(logits.size());
}

} // namespace nodfuse::neural
