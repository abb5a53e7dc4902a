#include "nodfuse/learn/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"

namespace nodfuse::learn {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d)
{
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) {
        const double t = a[k] - b[k];
        s += t * t;
    }
    return s;
}

std::vector<double> standardized(const FeatureTable& rows, std::span<const double> mean, std::span<const double> scale)
{
    const std::size_t d = rows.cols();
    std::vector<double> z(rows.rows() * d);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c)
            z[r * d + c] = mean.empty() ? rows.at(r, c) : (rows.at(r, c) - mean[c]) / scale[c];
    return z;
}

} // namespace

void standardization(const FeatureTable& rows, std::vector<double>& mean, std::vector<double>& scale)
{
    const std::size_t n = rows.rows(), d = rows.cols();
    mean.assign(d, 0.0);
    scale.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0;
        for (std::size_t r = 0; r < n; ++r)
            m += rows.at(r, c);
        m /= double(n);
        double v = 0;
        for (std::size_t r = 0; r < n; ++r)
            v += (rows.at(r, c) - m) * (rows.at(r, c) - m);
        const double s = std::sqrt(v / double(n));
        mean[c] = m;
        scale[c] = s > 1e-12 * std::max(1.0, std::abs(m)) ? s : 1.0;
    }
}

double default_gamma(const FeatureTable& rows, std::span<const double> mean, std::span<const double> scale)
{
    const std::size_t n = rows.rows(), d = rows.cols();
    const auto z = standardized(rows, mean, scale);
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist.push_back(sq_dist(&z[i * d], &z[j * d], d));
    if (dist.empty())
        return 1.0;
    const auto mid = dist.begin() + std::ptrdiff_t(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    double med = *mid;
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), mid);
        med = 0.5 * (med + lower);
    }
    if (!(med > 0))
        med = 1;
    return 1.0 / med;
}

SvmFit svm_fit(const FeatureTable& rows, const SvmParams& params)
{
    const std::size_t n = rows.rows(), d = rows.cols();
    if (d == 0)
        throw ValidationError("svm: no feature columns");
    if (rows.count(1) == 0 || rows.count(0) == 0)
        throw ValidationError("svm: training rows must contain both classes");
    if (!(params.C > 0))
        throw ValidationError("svm: C must be > 0");
    rows.check_finite();

    SvmFit fit;
    SvmModel& m = fit.model;
    m.C = params.C;
    m.dims = d;
    if (params.standardize)
        standardization(rows, m.mean, m.scale);
    m.gamma = params.gamma ? *params.gamma : default_gamma(rows, m.mean, m.scale);
    if (!(m.gamma > 0) || !std::isfinite(m.gamma))
        throw ValidationError("svm: gamma must be finite and > 0");
    const auto z = standardized(rows, m.mean, m.scale);

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = rows.label(i) == 1 ? 1.0 : -1.0;
    std::vector<double> Q(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        Q[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double k = y[i] * y[j] * std::exp(-m.gamma * sq_dist(&z[i * d], &z[j * d], d));
            Q[i * n + j] = k;
            Q[j * n + i] = k;
        }
    }

    // Dual: minimize f(a) = 1/2 a'Qa - e'a s.t. y'a = 0, 0 <= a <= C, with
    // second-order working set selection.
    const double C = params.C;
    constexpr double tau = 1e-12;
    std::vector<double>& a = fit.alpha;
    a.assign(n, 0.0);
    std::vector<double> g(n, -1.0);
    auto up = [&](std::size_t t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
    auto low = [&](std::size_t t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };

    long iter = 0;
    double gap = 0;
    for (; iter < params.max_iterations; ++iter) {
        double gmax = -INFINITY, gmin = INFINITY;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (up(t) && -y[t] * g[t] > gmax) {
                gmax = -y[t] * g[t];
                i = t;
            }
        std::size_t j = n;
        double best = INFINITY;
        for (std::size_t t = 0; t < n; ++t) {
            if (!low(t))
                continue;
            const double v = -y[t] * g[t];
            gmin = std::min(gmin, v);
            const double b = gmax - v;
            if (i < n && b > 0) {
                double curv = Q[i * n + i] + Q[t * n + t] - 2 * y[i] * y[t] * Q[i * n + t];
                if (curv <= 0)
                    curv = tau;
                const double obj = -(b * b) / curv;
                if (obj < best) {
                    best = obj;
                    j = t;
                }
            }
        }
        gap = gmax - gmin;
        if (i == n || j == n || gap < params.tolerance)
            break;

        const double old_ai = a[i], old_aj = a[j];
        double curv = Q[i * n + i] + Q[j * n + j] - 2 * y[i] * y[j] * Q[i * n + j];
        if (curv <= 0)
            curv = tau;
        if (y[i] != y[j]) {
            const double delta = (-g[i] - g[j]) / curv;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) {
                    a[j] = 0;
                    a[i] = diff;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = -diff;
            }
            if (diff > 0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else if (a[j] > C) {
                a[j] = C;
                a[i] = C + diff;
            }
        } else {
            const double delta = (g[i] - g[j]) / curv;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
            } else if (a[j] < 0) {
                a[j] = 0;
                a[i] = sum;
            }
            if (sum > C) {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = sum;
            }
        }
        const double di = a[i] - old_ai, dj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t)
            g[t] += Q[t * n + i] * di + Q[t * n + j] * dj;
    }
    if (iter >= params.max_iterations)
        throw ComputeError(fmt::format("svm: SMO did not converge in {} iterations (gap {:.3g})", iter, gap));
    fit.iterations = iter;

    // Bias from free vectors, else the midpoint of the feasible interval.
    double ub = INFINITY, lb = -INFINITY, sum_free = 0;
    int n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * g[t];
        if (a[t] >= C) {
            if (y[t] < 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (a[t] <= 0) {
            if (y[t] > 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2;
    m.bias = -rho;

    double obj = 0;
    for (std::size_t t = 0; t < n; ++t)
        obj += a[t] * (g[t] - 1.0);
    fit.dual_objective = -0.5 * obj;

    // KKT residual of each multiplier against the decision function.
    double viol = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yf = g[t] + 1.0 + y[t] * m.bias; // y_t f(x_t)
        if (a[t] <= 0)
            viol = std::max(viol, 1 - yf);
        else if (a[t] >= C)
            viol = std::max(viol, yf - 1);
        else
            viol = std::max(viol, std::abs(yf - 1));
    }
    fit.max_kkt_violation = viol;

    for (std::size_t t = 0; t < n; ++t) {
        if (a[t] <= 0)
            continue;
        m.support.insert(m.support.end(), z.begin() + std::ptrdiff_t(t * d), z.begin() + std::ptrdiff_t((t + 1) * d));
        m.coef.push_back(a[t] * y[t]);
    }
    return fit;
}

SvmModel svm_train(const FeatureTable& rows, const SvmParams& params) { return svm_fit(rows, params).model; }

double SvmModel::score(std::span<const double> x) const
{
    if (x.size() != dims)
        throw ValidationError(fmt::format("svm: expected {} features, got {}", dims, x.size()));
    std::vector<double> z(x.begin(), x.end());
    if (!mean.empty())
        for (std::size_t c = 0; c < dims; ++c)
            z[c] = (z[c] - mean[c]) / scale[c];
    double f = bias;
    for (std::size_t s = 0; s < coef.size(); ++s)
        f += coef[s] * std::exp(-gamma * sq_dist(&support[s * dims], z.data(), dims));
    return f;
}

std::vector<double> SvmModel::score(const FeatureTable& rows) const
{
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r)
        out[r] = score(rows.row(r));
    return out;
}

double svm_score(const SvmModel& m, std::span<const double> x) { return m.score(x); }

namespace {

constexpr char kMagic[8] = {'N', 'D', 'F', 'S', 'S', 'V', 'M', '\0'};

void put_f64(std::ostream& out, double v)
{
    auto u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int k = 0; k < 8; ++k)
        b[k] = char((u >> (8 * k)) & 0xff);
    out.write(b, 8);
}

double get_f64(std::istream& in)
{
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw ValidationError("svm model: truncated data");
    std::uint64_t u = 0;
    for (int k = 7; k >= 0; --k)
        u = (u << 8) | b[k];
    return std::bit_cast<double>(u);
}

} // namespace

void save_svm(const std::filesystem::path& path, const SvmModel& m)
{
    const std::string header = nlohmann::json{{"version", 1},
                                              {"C", m.C},
                                              {"gamma", m.gamma},
                                              {"dims", m.dims},
                                              {"support_count", m.support_count()},
                                              {"bias", m.bias},
                                              {"mean", m.mean},
                                              {"scale", m.scale}}
                                   .dump();
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out.write(kMagic, 8);
    const std::uint64_t len = header.size();
    for (int k = 0; k < 8; ++k)
        out.put(char((len >> (8 * k)) & 0xff));
    out << header;
    for (double v : m.support)
        put_f64(out, v);
    for (double v : m.coef)
        put_f64(out, v);
}

SvmModel load_svm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open svm model " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError(path.string() + ": not an svm model");
    std::uint64_t len = 0;
    for (int k = 0; k < 8; ++k) {
        const int c = in.get();
        if (c == EOF)
            throw ValidationError(path.string() + ": truncated header");
        len |= std::uint64_t(std::uint8_t(c)) << (8 * k);
    }
    std::string text(len, '\0');
    if (!in.read(text.data(), std::streamsize(len)))
        throw ValidationError(path.string() + ": truncated header");
    SvmModel m;
    std::size_t count = 0;
    try {
        const auto j = nlohmann::json::parse(text);
        m.C = j.at("C");
        m.gamma = j.at("gamma");
        m.dims = j.at("dims");
        m.bias = j.at("bias");
        m.mean = j.at("mean").get<std::vector<double>>();
        m.scale = j.at("scale").get<std::vector<double>>();
        count = j.at("support_count");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    m.support.resize(count * m.dims);
    for (auto& v : m.support)
        v = get_f64(in);
    m.coef.resize(count);
    for (auto& v : m.coef)
        v = get_f64(in);
    return m;
}

} // namespace nodfuse::learn
