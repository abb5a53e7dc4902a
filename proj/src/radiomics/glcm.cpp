#include "nodfuse/radiomics/glcm.hpp"

#include <algorithm>
#include <cmath>

#include "nodfuse/error.hpp"

namespace nodfuse::radiomics {

const std::array<Offset, 13>& glcm_directions()
{
    static const std::array<Offset, 13> dirs{{
        {0, 1, 0},
        {-1, 1, 0},
        {-1, 0, 0},
        {-1, -1, 0},
        {0, 1, -1},
        {0, 0, -1},
        {0, -1, -1},
        {-1, 0, -1},
        {1, 0, -1},
        {-1, 1, -1},
        {1, -1, -1},
        {-1, -1, -1},
        {1, 1, -1},
    }};
    return dirs;
}

const std::array<int, 5>& glcm_levels()
{
    static const std::array<int, 5> levels{8, 16, 32, 64, 128};
    return levels;
}

const std::array<int, 4>& glcm_distances()
{
    static const std::array<int, 4> d{1, 2, 3, 4};
    return d;
}

std::vector<GlcmConfig> all_glcm_configs()
{
    std::vector<GlcmConfig> out;
    out.reserve(260);
    for (int levels : glcm_levels())
        for (int d : glcm_distances())
            for (const auto& dir : glcm_directions())
                out.push_back({levels, d, dir});
    return out;
}

std::vector<int> quantize(const ingest::Volume& v, int levels)
{
    if (levels < 1)
        throw ValidationError("gray level count must be >= 1");
    const auto vox = v.voxels();
    const auto mask = v.mask();
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < vox.size(); ++i)
        if (mask[i]) {
            lo = std::min(lo, double(vox[i]));
            hi = std::max(hi, double(vox[i]));
        }
    std::vector<int> q(vox.size(), 0);
    const double range = hi - lo;
    for (std::size_t i = 0; i < vox.size(); ++i) {
        if (!mask[i])
            continue;
        if (!(range > 0)) {
            q[i] = 1;
            continue;
        }
        const int bin = static_cast<int>(std::floor((double(vox[i]) - lo) / range * levels)) + 1;
        q[i] = std::clamp(bin, 1, levels);
    }
    return q;
}

Glcm build_glcm(const ingest::Dims& dims, std::span<const int> levels, const GlcmConfig& config)
{
    const int L = config.levels;
    Glcm g;
    g.config = config;
    g.counts.assign(std::size_t(L) * L, 0);
    const int ox = config.distance * config.direction[0];
    const int oy = config.distance * config.direction[1];
    const int oz = config.distance * config.direction[2];
    // restrict the scan to voxels whose partner is in bounds
    const int x0 = std::max(0, -ox), x1 = std::min(dims.nx, dims.nx - ox);
    const int y0 = std::max(0, -oy), y1 = std::min(dims.ny, dims.ny - oy);
    const int z0 = std::max(0, -oz), z1 = std::min(dims.nz, dims.nz - oz);
    const std::ptrdiff_t delta = ox + std::ptrdiff_t(dims.nx) * (oy + std::ptrdiff_t(dims.ny) * oz);
    std::uint64_t* counts = g.counts.data();
    std::uint64_t pairs = 0;
    for (int z = z0; z < z1; ++z)
        for (int y = y0; y < y1; ++y) {
            const std::size_t row = std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * z);
            for (int x = x0; x < x1; ++x) {
                const std::size_t i = row + x;
                const int a = levels[i];
                const int b = levels[std::size_t(std::ptrdiff_t(i) + delta)];
                if (a == 0 || b == 0)
                    continue;
                ++counts[std::size_t(a - 1) * L + (b - 1)];
                ++counts[std::size_t(b - 1) * L + (a - 1)];
                ++pairs;
            }
        }
    g.total = 2 * pairs;
    return g;
}

Glcm build_glcm(const ingest::Volume& v, const GlcmConfig& config)
{
    const auto q = quantize(v, config.levels);
    return build_glcm(v.dims(), q, config);
}

TextureStats glcm_statistics(const Glcm& g)
{
    TextureStats s{};
    if (g.empty())
        return s;
    const int L = g.levels();
    struct Cell {
        int i, j;
        double p;
    };
    std::vector<Cell> cells;
    const double inv_total = 1.0 / double(g.total);
    for (int i = 1; i <= L; ++i)
        for (int j = 1; j <= L; ++j)
            if (auto c = g.count(i, j))
                cells.push_back({i, j, double(c) * inv_total});

    double mu_x = 0, mu_y = 0;
    for (const auto& c : cells) {
        mu_x += c.i * c.p;
        mu_y += c.j * c.p;
    }
    double var_x = 0, var_y = 0;
    for (const auto& c : cells) {
        var_x += (c.i - mu_x) * (c.i - mu_x) * c.p;
        var_y += (c.j - mu_y) * (c.j - mu_y) * c.p;
    }
    const double sigma_xy = std::sqrt(var_x) * std::sqrt(var_y);

    double corr = 0;
    for (const auto& c : cells) {
        const double p = c.p;
        const double diff = c.i - c.j;
        const double diff2 = diff * diff;
        const double centered = c.i + c.j - mu_x - mu_y;
        s[kEnergy] += p * p;
        s[kEntropy] -= p * std::log2(p);
        corr += (c.i - mu_x) * (c.j - mu_y) * p;
        s[kContrast] += diff2 * p;
        s[kSumMean] += 0.5 * (c.i + c.j) * p;
        s[kClusterShade] += centered * centered * centered * p;
        s[kClusterProminence] += centered * centered * centered * centered * p;
        s[kHomogeneity] += p / (1.0 + std::abs(diff));
        s[kMaxProbability] = std::max(s[kMaxProbability], p);
        if (c.i != c.j)
            s[kInverseVariance] += p / diff2;
    }
    s[kCorrelation] = sigma_xy > 0 ? corr / sigma_xy : 0.0;
    s[kTextureVariance] = var_x;
    s[kInertia] = s[kContrast];
    return s;
}

} // namespace nodfuse::radiomics
