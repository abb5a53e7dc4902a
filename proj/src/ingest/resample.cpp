#include "nodfuse/ingest/resample.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "nodfuse/error.hpp"

namespace nodfuse::ingest {

namespace {

// Maps sample values y to second derivatives M (unit spacing): M = S * y.
Eigen::MatrixXd second_derivative_operator(int n)
{
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    if (n == 2)
        return S;
    if (n == 3) {
        for (int r = 0; r < 3; ++r) {
            S(r, 0) = 1.0;
            S(r, 1) = -2.0;
            S(r, 2) = 1.0;
        }
        return S;
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    // not-a-knot: third derivative continuous across the second and the
    // second-to-last knot
    A(0, 0) = 1.0;
    A(0, 1) = -2.0;
    A(0, 2) = 1.0;
    A(n - 1, n - 3) = 1.0;
    A(n - 1, n - 2) = -2.0;
    A(n - 1, n - 1) = 1.0;
    for (int i = 1; i < n - 1; ++i) {
        A(i, i - 1) = 1.0;
        A(i, i) = 4.0;
        A(i, i + 1) = 1.0;
        B(i, i - 1) = 6.0;
        B(i, i) = -12.0;
        B(i, i + 1) = 6.0;
    }
    return A.partialPivLu().solve(B);
}

// Separable pass along `axis`: out has dims `out_dims`, in has `in_dims`.
void apply_axis(const std::vector<double>& in, const Dims& in_dims, std::vector<double>& out, const Dims& out_dims,
                int axis, const std::vector<double>& w)
{
    const int n_in = in_dims[axis];
    const int n_out = out_dims[axis];
    const std::size_t in_stride = axis == 0 ? 1 : axis == 1 ? std::size_t(in_dims.nx) : std::size_t(in_dims.nx) * in_dims.ny;
    const std::size_t out_stride =
        axis == 0 ? 1 : axis == 1 ? std::size_t(out_dims.nx) : std::size_t(out_dims.nx) * out_dims.ny;
    out.assign(out_dims.count(), 0.0);
    // iterate over every line along `axis`
    for (int z = 0; z < (axis == 2 ? 1 : out_dims.nz); ++z)
        for (int y = 0; y < (axis == 1 ? 1 : out_dims.ny); ++y)
            for (int x = 0; x < (axis == 0 ? 1 : out_dims.nx); ++x) {
                const std::size_t in_base = std::size_t(x) + std::size_t(in_dims.nx) * (std::size_t(y) + std::size_t(in_dims.ny) * z);
                const std::size_t out_base =
                    std::size_t(x) + std::size_t(out_dims.nx) * (std::size_t(y) + std::size_t(out_dims.ny) * z);
                for (int j = 0; j < n_out; ++j) {
                    const double* row = w.data() + std::size_t(j) * n_in;
                    double acc = 0.0;
                    for (int i = 0; i < n_in; ++i)
                        acc += row[i] * in[in_base + i * in_stride];
                    out[out_base + j * out_stride] = acc;
                }
            }
}

} // namespace

std::vector<double> spline_weights(int n_in, int n_out, double step)
{
    if (n_in < 2)
        throw ValidationError("spline needs at least 2 samples");
    const Eigen::MatrixXd S = second_derivative_operator(n_in);
    std::vector<double> w(std::size_t(n_out) * n_in, 0.0);
    for (int j = 0; j < n_out; ++j) {
        const double x = j * step;
        int k = static_cast<int>(std::floor(x));
        if (k > n_in - 2)
            k = n_in - 2;
        if (k < 0)
            k = 0;
        const double t = x - k;
        const double u = 1.0 - t;
        // S(x) = u*y_k + t*y_{k+1} + (u^3-u)/6*M_k + (t^3-t)/6*M_{k+1}
        const double cm0 = (u * u * u - u) / 6.0;
        const double cm1 = (t * t * t - t) / 6.0;
        double* row = w.data() + std::size_t(j) * n_in;
        row[k] += u;
        row[k + 1] += t;
        for (int i = 0; i < n_in; ++i)
            row[i] += cm0 * S(k, i) + cm1 * S(k + 1, i);
    }
    return w;
}

Volume resample(const Volume& v, double target_spacing)
{
    if (!(target_spacing > 0))
        throw ValidationError("target spacing must be positive");
    const Dims& d = v.dims();
    for (int a = 0; a < 3; ++a)
        if (d[a] < 2)
            throw ValidationError(std::string("cannot resample: axis ") + "xyz"[a] + " has fewer than 2 voxels");

    Dims out_dims;
    int* out_n[3] = {&out_dims.nx, &out_dims.ny, &out_dims.nz};
    double step[3];
    for (int a = 0; a < 3; ++a) {
        const double scale = v.spacing()[a] / target_spacing;
        // guard against 2.0000000004 style round-up from the division
        *out_n[a] = static_cast<int>(std::ceil(d[a] * scale - 1e-9));
        step[a] = target_spacing / v.spacing()[a];
    }

    std::vector<double> cur(v.voxels().begin(), v.voxels().end());
    Dims cur_dims = d;
    std::vector<double> next;
    for (int a = 0; a < 3; ++a) {
        Dims nd = cur_dims;
        (a == 0 ? nd.nx : a == 1 ? nd.ny : nd.nz) = out_dims[a];
        apply_axis(cur, cur_dims, next, nd, a, spline_weights(d[a], out_dims[a], step[a]));
        cur.swap(next);
        cur_dims = nd;
    }

    std::vector<float> voxels(cur.begin(), cur.end());
    std::vector<std::uint8_t> mask(out_dims.count());
    std::vector<int> nearest[3];
    for (int a = 0; a < 3; ++a) {
        nearest[a].resize(out_dims[a]);
        for (int j = 0; j < out_dims[a]; ++j) {
            int i = static_cast<int>(std::floor(j * step[a] + 0.5));
            nearest[a][j] = std::min(i, d[a] - 1);
        }
    }
    for (int z = 0; z < out_dims.nz; ++z)
        for (int y = 0; y < out_dims.ny; ++y)
            for (int x = 0; x < out_dims.nx; ++x)
                mask[std::size_t(x) + std::size_t(out_dims.nx) * (std::size_t(y) + std::size_t(out_dims.ny) * z)] =
                    v.mask()[v.index(nearest[0][x], nearest[1][y], nearest[2][z])];
    return Volume(out_dims, {target_spacing, target_spacing, target_spacing}, std::move(voxels), std::move(mask));
}

} // namespace nodfuse::ingest
