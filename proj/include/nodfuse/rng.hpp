#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace nodfuse {

/// Seeded random stream with platform-independent draws.
///
/// The std distributions are implementation-defined, so every draw here is
/// derived directly from the raw 64-bit engine output. Independent tasks get
/// their own stream through `derive`, which keeps serial and parallel runs
/// identical.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(mix(seed)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n)
    {
        // Rejection sampling removes modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    template <class T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i)
            std::swap(items[i - 1], items[below(i)]);
    }

    /// Child stream keyed by `tag`; does not advance this stream.
    Rng derive(std::uint64_t tag) const { return Rng(seed_of(tag)); }

private:
    std::uint64_t seed_of(std::uint64_t tag) const
    {
        std::mt19937_64 copy = engine_;
        return copy() ^ mix(tag + 0x9e3779b97f4a7c15ULL);
    }

    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace nodfuse
