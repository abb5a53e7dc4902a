#include <doctest.h>

#include <cmath>

#include "../oracles/radiomics_oracles.hpp"
#include "nodfuse/error.hpp"
#include "nodfuse/ingest/tensor.hpp"
#include "nodfuse/radiomics/features.hpp"
#include "test_support.hpp"

using namespace nodfuse;
using namespace nodfuse::radiomics;
using ingest::Volume;

namespace {

Volume line_volume(std::vector<float> values)
{
    const int n = int(values.size());
    return testing::full_mask_volume({n, 1, 1}, std::move(values));
}

Volume scaled_spacing(const Volume& v, double k)
{
    auto s = v.spacing();
    return {v.dims(), {s.sx * k, s.sy * k, s.sz * k}, {v.voxels().begin(), v.voxels().end()},
            {v.mask().begin(), v.mask().end()}};
}

Volume map_intensity(const Volume& v, double a, double b)
{
    std::vector<float> vox(v.voxels().begin(), v.voxels().end());
    for (auto& x : vox)
        x = float(a * x + b);
    return {v.dims(), v.spacing(), vox, {v.mask().begin(), v.mask().end()}};
}

} // namespace

TEST_CASE("intensity features of 1..5")
{
    auto f = intensity_features(line_volume({3, 1, 5, 2, 4}));
    CHECK(f[0] == 1);
    CHECK(f[1] == 5);
    CHECK(f[2] == doctest::Approx(3));
    CHECK(f[3] == doctest::Approx(std::sqrt(2.5)));
    CHECK(f[4] == doctest::Approx(15));
    CHECK(f[5] == 3);
    CHECK(std::abs(f[6]) < 1e-15);
    CHECK(f[8] == doctest::Approx(2.5));
    // excess kurtosis of a discrete uniform on 5 points: m4/m2^2 - 3 = 6.8/4 - 3
    CHECK(f[7] == doctest::Approx(6.8 / 4.0 - 3.0));
}

TEST_CASE("intensity features of a constant region")
{
    auto f = intensity_features(line_volume({4, 4, 4, 4}));
    CHECK(f[3] == 0);
    CHECK(f[8] == 0);
    CHECK(f[6] == 0);
    CHECK(f[7] == 0);
    CHECK(f[5] == 4);
}

TEST_CASE("intensity moments match a two-pass oracle")
{
    Rng rng(31);
    std::vector<float> vals(100);
    for (auto& v : vals)
        v = float(rng.normal() * 10 + 3);
    auto f = intensity_features(line_volume(vals));
    long double mean = 0;
    for (float v : vals)
        mean += v;
    mean /= 100;
    long double m2 = 0, m3 = 0, m4 = 0;
    for (float v : vals) {
        long double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double var = double(m2 / 99);
    m2 /= 100;
    m3 /= 100;
    m4 /= 100;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    CHECK(rel(f[2], double(mean)) < 1e-10);
    CHECK(rel(f[8], var) < 1e-10);
    CHECK(rel(f[6], double(m3 / std::pow(m2, 1.5L))) < 1e-10);
    CHECK(rel(f[7], double(m4 / (m2 * m2) - 3)) < 1e-10);
}

TEST_CASE("geometric features of a solid cube")
{
    auto cube = testing::full_mask_volume({10, 10, 10}, std::vector<float>(1000, 1.0f));
    auto g = geometric_features(cube);
    CHECK(g[0] == doctest::Approx(1000));
    CHECK(g[6] == doctest::Approx(1000));
    CHECK(g[7] == doctest::Approx(600));
    CHECK(g[3] == doctest::Approx(0).epsilon(1e-6));
    CHECK(g[4] == doctest::Approx(1));
    CHECK(g[1] == doctest::Approx(g[2]));
}

TEST_CASE("rod along z has orientation 0")
{
    auto rod = testing::full_mask_volume({1, 1, 9}, std::vector<float>(9, 1.0f));
    auto g = geometric_features(rod);
    CHECK(g[5] == doctest::Approx(0));
    CHECK(g[3] == doctest::Approx(1));
    CHECK(std::isfinite(g[4]));
    auto xrod = testing::full_mask_volume({9, 1, 1}, std::vector<float>(9, 1.0f));
    CHECK(geometric_features(xrod)[5] == doctest::Approx(90));
}

TEST_CASE("single voxel geometry uses the degenerate convention")
{
    auto one = testing::full_mask_volume({1, 1, 1}, {3.0f});
    auto g = geometric_features(one);
    CHECK(g[1] == 0);
    CHECK(g[2] == 0);
    CHECK(g[3] == 0);
    CHECK(g[4] == 1);
    CHECK(g[7] == doctest::Approx(6));
}

TEST_CASE("geometric features match the covariance/face-count oracle")
{
    Rng rng(41);
    for (int t = 0; t < 40; ++t) {
        auto v = testing::random_blob(rng, 12);
        auto g = geometric_features(v);
        auto o = oracle::geometry(v);
        for (int k = 0; k < 8; ++k) {
            if (k == 5 && o.eigen_gap < 1e-4)
                continue;
            CHECK(std::abs(g[k] - o.values[k]) <= 1e-9 * std::max(1.0, std::abs(o.values[k])));
        }
    }
}

TEST_CASE("doubling spacing scales lengths and volumes")
{
    Rng rng(43);
    for (int t = 0; t < 10; ++t) {
        auto v = testing::random_blob(rng, 8);
        auto a = geometric_features(v);
        auto b = geometric_features(scaled_spacing(v, 2.0));
        CHECK(b[0] == doctest::Approx(8 * a[0]));
        CHECK(b[6] == doctest::Approx(8 * a[6]));
        CHECK(b[1] == doctest::Approx(2 * a[1]));
        CHECK(b[2] == doctest::Approx(2 * a[2]).epsilon(1e-6));
        CHECK(b[7] == doctest::Approx(4 * a[7]));
    }
}

TEST_CASE("glcm hand example")
{
    // levels (rows y, cols x): [[1,2],[1,1]] -> values chosen so 8-level
    // quantization gives level 1 for 0 and level 8 for 1; use L=2 directly.
    Volume v = testing::full_mask_volume({2, 2, 1}, {0.0f, 1.0f, 0.0f, 0.0f});
    auto g = build_glcm(v, {2, 1, {0, 1, 0}});
    CHECK(g.total == 4);
    CHECK(g.count(1, 1) == 2);
    CHECK(g.count(1, 2) == 1);
    CHECK(g.count(2, 1) == 1);
    CHECK(g.count(2, 2) == 0);
    CHECK(g.p(1, 1) == 0.5);
    CHECK(g.p(1, 2) == 0.25);
    auto s = glcm_statistics(g);
    CHECK(s[kEnergy] == doctest::Approx(0.375));
}

TEST_CASE("glcm of a constant volume is a point mass")
{
    Volume v = testing::full_mask_volume({3, 3, 3}, std::vector<float>(27, 9.0f));
    for (const auto& cfg : all_glcm_configs()) {
        auto g = build_glcm(v, cfg);
        if (g.empty())
            continue;
        CHECK(g.p(1, 1) == 1.0);
    }
    auto t = texture_features(v);
    CHECK(t[kEnergy] == 1);
    CHECK(t[kEntropy] == 0);
    CHECK(t[kContrast] == 0);
    CHECK(t[kInertia] == 0);
    CHECK(t[kHomogeneity] == 1);
    CHECK(t[kMaxProbability] == 1);
}

TEST_CASE("glcm with no valid pairs is empty")
{
    Volume v = testing::full_mask_volume({1, 1, 1}, {1.0f});
    auto g = build_glcm(v, {8, 1, {0, 1, 0}});
    CHECK(g.empty());
    auto s = glcm_statistics(g);
    for (double x : s)
        CHECK(x == 0);
    for (double x : texture_features(v))
        CHECK(x == 0);
}

TEST_CASE("glcm counts equal pair enumeration and texture equals formula loops")
{
    CHECK(all_glcm_configs().size() == 260);
    Rng rng(51);
    for (int t = 0; t < 20; ++t) {
        auto v = testing::random_volume(rng, 6);
        for (int L : glcm_levels()) {
            auto ref = oracle::pair_enumeration_glcm(v, L, glcm_directions());
            const auto q = quantize(v, L);
            for (int d = 1; d <= 4; ++d)
                for (int k = 0; k < 13; ++k) {
                    auto g = build_glcm(v.dims(), q, {L, d, glcm_directions()[k]});
                    REQUIRE(g.counts == ref[d - 1][k]);
                    auto s = glcm_statistics(g);
                    auto f = oracle::texture_formulas(ref[d - 1][k], L);
                    for (int m = 0; m < kTextureCount; ++m)
                        CHECK(std::abs(s[m] - f[m]) <= 1e-9 * std::max(1.0, std::abs(f[m])));
                }
        }
    }
}

TEST_CASE("glcm invariants: symmetry and statistic ranges")
{
    Rng rng(53);
    for (int t = 0; t < 10; ++t) {
        auto v = testing::random_volume(rng, 7);
        for (const auto& cfg : all_glcm_configs()) {
            auto g = build_glcm(v, cfg);
            const int L = g.levels();
            for (int i = 1; i <= L; ++i)
                for (int j = 1; j <= L; ++j)
                    REQUIRE(g.count(i, j) == g.count(j, i));
            if (g.empty())
                continue;
            auto s = glcm_statistics(g);
            CHECK(s[kEnergy] > 0);
            CHECK(s[kEnergy] <= 1 + 1e-12);
            CHECK(s[kEntropy] >= 0);
            CHECK(s[kHomogeneity] > 0);
            CHECK(s[kHomogeneity] <= 1 + 1e-12);
            CHECK(s[kMaxProbability] > 0);
            CHECK(s[kMaxProbability] <= 1);
            CHECK(s[kContrast] >= 0);
        }
    }
}

TEST_CASE("handcrafted: arity, names, composition")
{
    CHECK(handcrafted_names().size() == 29);
    auto cube = testing::full_mask_volume({10, 10, 10}, std::vector<float>(1000, 1.0f));
    auto f = handcrafted(cube);
    for (double x : f.values)
        CHECK(std::isfinite(x));
    CHECK(f["volume"] == doctest::Approx(1000));
    CHECK_THROWS_AS(f["nope"], ValidationError);
}

TEST_CASE("handcrafted: intensity shift changes only location features")
{
    Rng rng(61);
    for (int t = 0; t < 5; ++t) {
        auto v = testing::random_volume(rng, 6, 0.7, 2);
        auto a = handcrafted(v);
        auto b = handcrafted(map_intensity(v, 1.0, 64.0));
        const auto& names = handcrafted_names();
        for (std::size_t k = 0; k < names.size(); ++k) {
            const bool location = names[k] == "minimum" || names[k] == "maximum" || names[k] == "mean"
                                  || names[k] == "median" || names[k] == "sum";
            if (location) {
                CHECK(b.values[k] != doctest::Approx(a.values[k]));
            } else {
                CAPTURE(names[k]);
                CHECK(b.values[k] == doctest::Approx(a.values[k]).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("texture features invariant under positive affine maps")
{
    Rng rng(67);
    for (int t = 0; t < 5; ++t) {
        // integer-valued intensities keep the float mapping exact
        auto base = testing::random_volume(rng, 6, 0.8, 2);
        std::vector<float> vox(base.voxels().begin(), base.voxels().end());
        for (auto& x : vox)
            x = std::round(x);
        Volume v(base.dims(), base.spacing(), vox, {base.mask().begin(), base.mask().end()});
        auto a = texture_features(v);
        auto b = texture_features(map_intensity(v, 4.0, -3.0));
        for (int k = 0; k < kTextureCount; ++k)
            CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-12));
    }
}

TEST_CASE("handcrafted features invariant under augmentation except orientation")
{
    using namespace nodfuse::ingest;
    Rng rng(71);
    for (int t = 0; t < 3; ++t) {
        auto v = testing::random_blob(rng, 7);
        Volume iso(v.dims(), {1, 1, 1}, {v.voxels().begin(), v.voxels().end()}, {v.mask().begin(), v.mask().end()});
        // carry values and mask through the same transform
        NoduleTensor vals;
        vals.shape = {v.dims().nx, v.dims().ny, v.dims().nz};
        vals.values.assign(iso.voxels().begin(), iso.voxels().end());
        NoduleTensor mask = vals;
        for (std::size_t i = 0; i < mask.values.size(); ++i)
            mask.values[i] = iso.mask()[i];
        auto a = handcrafted(iso);
        for (const auto& tag : augmentation_tags()) {
            auto tv = apply_augmentation(vals, tag);
            auto tm = apply_augmentation(mask, tag);
            std::vector<std::uint8_t> m(tm.values.size());
            for (std::size_t i = 0; i < m.size(); ++i)
                m[i] = tm.values[i] > 0.5f;
            Volume w({tv.shape.x, tv.shape.y, tv.shape.z}, {1, 1, 1}, tv.values, m);
            auto b = handcrafted(w);
            for (std::size_t k = 0; k < kHandcraftedCount; ++k) {
                if (handcrafted_names()[k] == "orientation")
                    continue;
                CAPTURE(tag.name());
                CAPTURE(handcrafted_names()[k]);
                CHECK(b.values[k] == doctest::Approx(a.values[k]).epsilon(1e-9));
            }
        }
    }
}
