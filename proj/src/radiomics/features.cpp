#include "nodfuse/radiomics/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "nodfuse/error.hpp"

namespace nodfuse::radiomics {

const std::array<std::string_view, kHandcraftedCount>& handcrafted_names()
{
    static const std::array<std::string_view, kHandcraftedCount> names{
        "minimum",       "maximum",        "mean",
        "stand_deviation", "sum",          "median",
        "skewness",      "kurtosis",       "variance",
        "volume",        "major_diameter", "minor_diameter",
        "eccentricity",  "elongation",     "orientation",
        "bounding_box_volume", "perimeter",
        "energy",        "entropy",        "correlation",
        "contrast",      "texture_variance", "sum_mean",
        "inertia",       "cluster_shade",  "cluster_prominence",
        "homogeneity",   "max_probability", "inverse_variance",
    };
    return names;
}

double FeatureVector::operator[](std::string_view name) const
{
    const auto& names = handcrafted_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return values[i];
    throw ValidationError("unknown feature " + std::string(name));
}

IntensityFeatures intensity_features(const ingest::Volume& v)
{
    std::vector<double> x = v.roi_values();
    if (x.empty())
        throw ValidationError("intensity features need at least one masked voxel");
    const double n = double(x.size());
    double sum = 0;
    for (double a : x)
        sum += a;
    const double mean = sum / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double a : x) {
        const double d = a - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double variance = x.size() > 1 ? m2 / (n - 1) : 0.0;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double skew = m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
    const double kurt = m2 > 0 ? m4 / (m2 * m2) - 3.0 : 0.0;

    std::sort(x.begin(), x.end());
    const std::size_t mid = x.size() / 2;
    const double median = x.size() % 2 ? x[mid] : 0.5 * (x[mid - 1] + x[mid]);
    return {x.front(), x.back(), mean, std::sqrt(variance), sum, median, skew, kurt, variance};
}

GeometricFeatures geometric_features(const ingest::Volume& v)
{
    const auto& d = v.dims();
    const auto& s = v.spacing();
    std::size_t n = 0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::size_t faces[3] = {0, 0, 0};
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                if (!v.inside(x, y, z))
                    continue;
                ++n;
                mean += Eigen::Vector3d(x * s.sx, y * s.sy, z * s.sz);
                const int p[3] = {x, y, z};
                for (int a = 0; a < 3; ++a)
                    for (int step : {-1, 1}) {
                        int q[3] = {p[0], p[1], p[2]};
                        q[a] += step;
                        if (!v.in_bounds(q[0], q[1], q[2]) || !v.inside(q[0], q[1], q[2]))
                            ++faces[a];
                    }
            }
    if (n == 0)
        throw ValidationError("geometric features need at least one masked voxel");
    mean /= double(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                if (v.inside(x, y, z)) {
                    const Eigen::Vector3d c = Eigen::Vector3d(x * s.sx, y * s.sy, z * s.sz) - mean;
                    cov += c * c.transpose();
                }
    cov /= double(n);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // ascending order
    const double l1 = std::max(eig.eigenvalues()(2), 0.0);
    const double l3 = std::max(eig.eigenvalues()(0), 0.0);
    const Eigen::Vector3d major = eig.eigenvectors().col(2);

    const double scale = std::max({l1, 1e-300});
    const bool point = l1 <= 0.0;
    const bool flat = !point && l3 <= 1e-12 * scale;
    const double voxel_moment = std::pow(std::min({s.sx, s.sy, s.sz}), 2) / 12.0;

    GeometricFeatures g{};
    const double voxel_volume = s.sx * s.sy * s.sz;
    g[0] = double(n) * voxel_volume;
    g[1] = 4.0 * std::sqrt(l1);
    g[2] = 4.0 * std::sqrt(l3);
    g[3] = point ? 0.0 : std::sqrt(std::max(0.0, 1.0 - l3 / l1));
    g[4] = point ? 1.0 : std::sqrt(l1 / (flat ? voxel_moment : l3));
    g[5] = point ? 0.0 : std::atan2(std::hypot(major.x(), major.y()), std::abs(major.z())) * 180.0 / M_PI;
    const ingest::Box box = v.roi_box();
    g[6] = box.extent(0) * s.sx * box.extent(1) * s.sy * box.extent(2) * s.sz;
    g[7] = faces[0] * s.sy * s.sz + faces[1] * s.sx * s.sz + faces[2] * s.sx * s.sy;
    return g;
}

TextureStats texture_features(const ingest::Volume& v)
{
    TextureStats mean{};
    std::size_t used = 0;
    for (int levels : glcm_levels()) {
        const auto q = quantize(v, levels);
        for (int dist : glcm_distances())
            for (const auto& dir : glcm_directions()) {
                const Glcm g = build_glcm(v.dims(), q, {levels, dist, dir});
                if (g.empty())
                    continue;
                const auto s = glcm_statistics(g);
                for (int k = 0; k < kTextureCount; ++k)
                    mean[k] += s[k];
                ++used;
            }
    }
    if (used)
        for (auto& m : mean)
            m /= double(used);
    return mean;
}

FeatureVector handcrafted(const ingest::Volume& v)
{
    FeatureVector f;
    const auto a = intensity_features(v);
    const auto b = geometric_features(v);
    const auto c = texture_features(v);
    auto out = std::copy(a.begin(), a.end(), f.values.begin());
    out = std::copy(b.begin(), b.end(), out);
    std::copy(c.begin(), c.end(), out);
    return f;
}

} // namespace nodfuse::radiomics
