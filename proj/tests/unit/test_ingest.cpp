#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <Eigen/Dense>

#include "nodfuse/error.hpp"
#include "nodfuse/ingest/resample.hpp"
#include "nodfuse/ingest/tensor.hpp"
#include "nodfuse/ingest/volume_io.hpp"
#include "test_support.hpp"

using namespace nodfuse;
using namespace nodfuse::ingest;

namespace {

// Lagrange cubic through 4 unit-spaced samples; with exactly 4 samples the
// not-a-knot spline is this single cubic.
double lagrange4(const double* y, double x)
{
    double s = 0.0;
    for (int i = 0; i < 4; ++i) {
        double l = 1.0;
        for (int j = 0; j < 4; ++j)
            if (j != i)
                l *= (x - j) / double(i - j);
        s += l * y[i];
    }
    return s;
}

// Not-a-knot spline via a dense solve for 4(n-1) polynomial coefficients.
double coefficient_spline(const std::vector<double>& y, double x)
{
    const int n = int(y.size());
    const int m = n - 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4 * m, 4 * m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(4 * m);
    int r = 0;
    // piece k: a + b t + c t^2 + d t^3, t = x - k
    for (int k = 0; k < m; ++k) {
        A(r, 4 * k) = 1;
        b(r++) = y[k];
        A(r, 4 * k) = 1;
        A(r, 4 * k + 1) = 1;
        A(r, 4 * k + 2) = 1;
        A(r, 4 * k + 3) = 1;
        b(r++) = y[k + 1];
    }
    for (int k = 0; k + 1 < m; ++k) {
        A(r, 4 * k + 1) = 1;
        A(r, 4 * k + 2) = 2;
        A(r, 4 * k + 3) = 3;
        A(r++, 4 * (k + 1) + 1) = -1;
        A(r, 4 * k + 2) = 2;
        A(r, 4 * k + 3) = 6;
        A(r++, 4 * (k + 1) + 2) = -2;
    }
    A(r, 3) = 1;
    A(r++, 7) = -1;
    A(r, 4 * (m - 2) + 3) = 1;
    A(r++, 4 * (m - 1) + 3) = -1;
    Eigen::VectorXd c = A.fullPivLu().solve(b);
    int k = std::min(int(std::floor(x)), m - 1);
    double t = x - k;
    return c(4 * k) + c(4 * k + 1) * t + c(4 * k + 2) * t * t + c(4 * k + 3) * t * t * t;
}

std::vector<float> sorted(std::vector<float> v)
{
    std::sort(v.begin(), v.end());
    return v;
}

NoduleTensor make_tensor(Shape3 s, Rng& rng)
{
    NoduleTensor t;
    t.shape = s;
    t.values.resize(s.count());
    for (auto& v : t.values)
        v = float(rng.uniform(-1, 1));
    return t;
}

} // namespace

TEST_CASE("volume rejects inconsistent input")
{
    CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, std::vector<float>(7), std::vector<std::uint8_t>(8, 1)), ValidationError);
    CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 0, 1}, std::vector<float>(8), std::vector<std::uint8_t>(8, 1)), ValidationError);
    CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, std::vector<float>(8), std::vector<std::uint8_t>(8, 0)), ValidationError);
}

TEST_CASE("volume files round-trip bit-exactly")
{
    Rng rng(3);
    const auto dir = std::filesystem::temp_directory_path() / "nodfuse_test_io";
    std::filesystem::remove_all(dir);
    for (int i = 0; i < 5; ++i) {
        auto v = testing::random_volume(rng, 7);
        write_volume(dir, "n" + std::to_string(i), v);
        auto back = read_volume(dir, "n" + std::to_string(i));
        CHECK(back.dims() == v.dims());
        CHECK(back.spacing() == v.spacing());
        CHECK(std::equal(v.voxels().begin(), v.voxels().end(), back.voxels().begin(),
                         [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }));
        CHECK(std::equal(v.mask().begin(), v.mask().end(), back.mask().begin()));
    }
    write_manifest(dir / "labels.csv", {{"a", 0}, {"b", 1}});
    auto rows = read_manifest(dir / "labels.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].id == "b");
    CHECK(rows[1].label == 1);
    CHECK_THROWS_AS(read_volume(dir, "missing"), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("resample: constant stays constant")
{
    Volume v = testing::full_mask_volume({3, 5, 4}, std::vector<float>(60, 7.25f), {1.0, 0.8, 2.0});
    auto r = resample(v, 0.5);
    CHECK(r.dims() == Dims{6, 8, 16});
    CHECK(r.spacing() == Spacing{0.5, 0.5, 0.5});
    for (float x : r.voxels())
        CHECK(x == doctest::Approx(7.25).epsilon(1e-12));
}

TEST_CASE("resample: linear ramp is reproduced exactly")
{
    Dims d{6, 3, 3};
    std::vector<float> vox(d.count());
    for (int z = 0; z < 3; ++z)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 6; ++x)
                vox[x + 6 * (y + 3 * z)] = float(x);
    auto r = resample(testing::full_mask_volume(d, vox), 0.5);
    CHECK(r.dims() == Dims{12, 6, 6});
    for (int z = 0; z < 6; ++z)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 11; ++x)
                CHECK(std::abs(r.value(x, y, z) - 0.5 * x) <= 1e-6); // f32 storage
    // the weights themselves reproduce the ramp to double precision
    auto w = spline_weights(6, 12, 0.5);
    for (int j = 0; j < 12; ++j) {
        double s = 0;
        for (int i = 0; i < 6; ++i)
            s += w[j * 6 + i] * i;
        CHECK(std::abs(s - 0.5 * j) <= 1e-9);
    }
}

TEST_CASE("resample: 4x4x4 random volume matches tensor-product cubic oracle")
{
    Rng rng(11);
    std::vector<float> vox(64);
    for (auto& v : vox)
        v = float(rng.uniform(-5, 5));
    auto r = resample(testing::full_mask_volume({4, 4, 4}, vox), 0.5);
    REQUIRE(r.dims() == Dims{8, 8, 8});
    for (int z = 0; z < 8; ++z)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                // oracle: collapse x, then y, then z with the Lagrange cubic
                double plane[4][4];
                for (int k = 0; k < 4; ++k)
                    for (int j = 0; j < 4; ++j) {
                        double line[4];
                        for (int i = 0; i < 4; ++i)
                            line[i] = vox[i + 4 * (j + 4 * k)];
                        plane[k][j] = lagrange4(line, 0.5 * x);
                    }
                double col[4];
                for (int k = 0; k < 4; ++k)
                    col[k] = lagrange4(plane[k], 0.5 * y);
                const double expect = lagrange4(col, 0.5 * z);
                // output voxels are stored as f32; compare at f32 resolution
                CHECK(std::abs(r.value(x, y, z) - expect) <= 1e-5 * (1 + std::abs(expect)));
            }
    // double-precision comparison on the weights
    auto w = spline_weights(4, 8, 0.5);
    Rng r2(5);
    double y[4];
    for (auto& v : y)
        v = r2.uniform(-3, 3);
    for (int j = 0; j < 8; ++j) {
        double s = 0;
        for (int i = 0; i < 4; ++i)
            s += w[j * 4 + i] * y[i];
        CHECK(std::abs(s - lagrange4(y, 0.5 * j)) <= 1e-9);
    }
}

TEST_CASE("spline weights match an independent coefficient solve")
{
    Rng rng(21);
    for (int n : {4, 5, 7, 10}) {
        std::vector<double> y(n);
        for (auto& v : y)
            v = rng.uniform(-2, 2);
        const double step = 0.37;
        const int n_out = int(std::ceil(n / step));
        auto w = spline_weights(n, n_out, step);
        for (int j = 0; j < n_out; ++j) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += w[j * n + i] * y[i];
            CHECK(std::abs(s - coefficient_spline(y, j * step)) <= 1e-9);
        }
    }
}

TEST_CASE("resample is idempotent at the target spacing")
{
    Rng rng(8);
    for (int i = 0; i < 5; ++i) {
        auto v = testing::random_volume(rng, 6, 0.7, 2);
        auto a = resample(v, 0.7);
        auto b = resample(a, 0.7);
        REQUIRE(a.dims() == b.dims());
        for (std::size_t k = 0; k < a.voxels().size(); ++k)
            CHECK(std::abs(a.voxels()[k] - b.voxels()[k]) <= 1e-9);
        CHECK(std::equal(a.mask().begin(), a.mask().end(), b.mask().begin()));
    }
}

TEST_CASE("resample: errors and binary mask")
{
    Volume flat = testing::full_mask_volume({4, 1, 4}, std::vector<float>(16, 1.0f));
    CHECK_THROWS_WITH_AS(resample(flat, 0.5), doctest::Contains("axis y"), ValidationError);
    Rng rng(2);
    auto v = testing::random_volume(rng, 5, 0.5, 2);
    CHECK_THROWS_AS(resample(v, 0.0), ValidationError);
    auto r = resample(v, 0.4);
    for (auto m : r.mask())
        CHECK((m == 0 || m == 1));
}

TEST_CASE("build_tensor: segmented cube is centered")
{
    Volume v = testing::full_mask_volume({3, 3, 3}, std::vector<float>(27, 2.0f));
    auto t = build_tensor(v, {7, 7, 7}, TensorMode::segmented);
    for (int z = 0; z < 7; ++z)
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 7; ++x) {
                const bool in = x >= 2 && x <= 4 && y >= 2 && y <= 4 && z >= 2 && z <= 4;
                CHECK(t.at(x, y, z) == (in ? 2.0f : 0.0f));
            }
}

TEST_CASE("build_tensor: unmasked voxels in the bounding box are zeroed")
{
    std::vector<float> vox(27, 5.0f);
    std::vector<std::uint8_t> mask(27, 1);
    mask[1 + 3 * (1 + 3 * 1)] = 0; // centre voxel
    Volume v({3, 3, 3}, {1, 1, 1}, vox, mask);
    auto t = build_tensor(v, {5, 5, 5}, TensorMode::segmented);
    CHECK(t.at(2, 2, 2) == 0.0f);
    CHECK(t.at(1, 1, 1) == 5.0f);
}

TEST_CASE("build_tensor: segmented sum equals masked sum")
{
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        auto v = testing::random_volume(rng, 6);
        auto t = build_tensor(v, {8, 8, 8}, TensorMode::segmented);
        double masked = 0, total = 0;
        for (double x : v.roi_values())
            masked += x;
        for (float x : t.values)
            total += x;
        CHECK(total == doctest::Approx(masked).epsilon(1e-9));
    }
}

TEST_CASE("build_tensor: oversized ROI names the axis")
{
    Volume v = testing::full_mask_volume({3, 6, 3}, std::vector<float>(54, 1.0f));
    CHECK_THROWS_WITH_AS(build_tensor(v, {4, 4, 4}, TensorMode::segmented), doctest::Contains("axis y"),
                         ValidationError);
}

TEST_CASE("build_tensor: patch mode keeps background intensities")
{
    Dims d{40, 40, 40};
    std::vector<float> vox(d.count());
    std::vector<std::uint8_t> mask(d.count(), 0);
    for (std::size_t i = 0; i < vox.size(); ++i)
        vox[i] = float(i % 97) + 1.0f;
    Volume tmp(d, {1, 1, 1}, vox, std::vector<std::uint8_t>(d.count(), 1));
    for (int z = 18; z <= 22; ++z)
        for (int y = 18; y <= 22; ++y)
            for (int x = 18; x <= 22; ++x)
                mask[tmp.index(x, y, z)] = 1;
    Volume v(d, {1, 1, 1}, vox, mask);
    auto t = build_tensor(v, {32, 32, 32}, TensorMode::patch);
    CHECK(t.shape == Shape3{32, 32, 32});
    // centroid 20 -> window starts at 4
    CHECK(t.at(0, 0, 0) == v.value(4, 4, 4));
    CHECK(t.at(31, 31, 31) == v.value(35, 35, 35));
    CHECK(v.inside(4, 4, 4) == false);
    CHECK(t.at(0, 0, 0) != 0.0f);
}

TEST_CASE("augment: 13 distinct tags")
{
    Rng rng(1);
    auto outs = augment(make_tensor({2, 3, 4}, rng));
    REQUIRE(outs.size() == 13);
    std::set<std::string> names;
    for (auto& o : outs)
        names.insert(o.tag.name());
    CHECK(names.size() == 13);
    CHECK(outs[0].tag.kind == AugmentationTag::Kind::identity);
}

TEST_CASE("augment: flip across yz reverses x")
{
    NoduleTensor t;
    t.shape = {2, 2, 1};
    t.values = {1, 2, 3, 4}; // (x,y): (0,0)=1 (1,0)=2 (0,1)=3 (1,1)=4
    AugmentationTag flip{AugmentationTag::Kind::flip, Axis::z, 0, Plane::yz};
    auto f = apply_augmentation(t, flip);
    CHECK(f.values == std::vector<float>{2, 1, 4, 3});
}

TEST_CASE("augment: rotation group properties and multiset preservation")
{
    Rng rng(9);
    auto t = make_tensor({2, 3, 5}, rng);
    const auto base = sorted(t.values);
    for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
        AugmentationTag r90{AugmentationTag::Kind::rotation, axis, 90, Plane::xy};
        AugmentationTag r180{AugmentationTag::Kind::rotation, axis, 180, Plane::xy};
        AugmentationTag r270{AugmentationTag::Kind::rotation, axis, 270, Plane::xy};
        auto four = t;
        for (int i = 0; i < 4; ++i)
            four = apply_augmentation(four, r90);
        CHECK(four.shape == t.shape);
        CHECK(four.values == t.values);
        auto twice = apply_augmentation(apply_augmentation(t, r180), r180);
        CHECK(twice.values == t.values);
        auto a = apply_augmentation(apply_augmentation(t, r90), r90);
        CHECK(a.values == apply_augmentation(t, r180).values);
        auto b = apply_augmentation(apply_augmentation(t, r90), r180);
        CHECK(b.values == apply_augmentation(t, r270).values);
    }
    for (auto& o : augment(t)) {
        CHECK(o.shape.count() == t.shape.count());
        CHECK(sorted(o.values) == base);
    }
}

TEST_CASE("dataset_shape covers every transform")
{
    // 5x3x2 box ROI
    Volume v = testing::full_mask_volume({5, 3, 2}, std::vector<float>(30, 1.0f));
    Shape3 expect{0, 0, 0};
    for (auto& o : augment(crop_roi(v)))
        for (int a = 0; a < 3; ++a)
            expect[a] = std::max(expect[a], o.shape[a]);
    CHECK(dataset_shape(std::span(&v, 1)) == expect);
    CHECK(expect == Shape3{5, 5, 5});

    Volume cube = testing::full_mask_volume({4, 4, 4}, std::vector<float>(64, 1.0f));
    CHECK(dataset_shape(std::span(&cube, 1)) == Shape3{4, 4, 4});
    CHECK_THROWS_AS(dataset_shape(std::span<const Volume>{}), ValidationError);
}
