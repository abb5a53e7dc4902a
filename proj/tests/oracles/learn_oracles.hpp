#pragma once

// Independent reference computations for the learn and eval modules.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nodfuse::oracle {

struct QpSolution {
    double objective = -std::numeric_limits<double>::infinity(); // maximized dual
    std::vector<double> alpha;
};

/// Exact SVM dual for tiny problems: every assignment of each multiplier to
/// {0, C, free} is solved as an equality-constrained system; the best
/// feasible point is the optimum because one assignment matches it.
/// `x` is row-major n x d and is standardized here (population std).
inline QpSolution svm_dual_bruteforce(std::span<const double> x, std::size_t d, std::span<const int> labels, double C,
                                      double gamma)
{
    const std::size_t n = labels.size();
    std::vector<double> z(x.begin(), x.end());
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0, v = 0;
        for (std::size_t i = 0; i < n; ++i)
            m += x[i * d + c];
        m /= double(n);
        for (std::size_t i = 0; i < n; ++i)
            v += (x[i * d + c] - m) * (x[i * d + c] - m);
        double s = std::sqrt(v / double(n));
        if (!(s > 1e-12 * std::max(1.0, std::abs(m))))
            s = 1;
        for (std::size_t i = 0; i < n; ++i)
            z[i * d + c] = (x[i * d + c] - m) / s;
    }
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = labels[i] == 1 ? 1 : -1;
    Eigen::MatrixXd Q(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t c = 0; c < d; ++c)
                s += (z[i * d + c] - z[j * d + c]) * (z[i * d + c] - z[j * d + c]);
            Q(i, j) = y[i] * y[j] * std::exp(-gamma * s);
        }
    auto objective = [&](const Eigen::VectorXd& a) { return a.sum() - 0.5 * a.dot(Q * a); };

    QpSolution best;
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i)
        total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<int> state(n);
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i, c /= 3)
            state[i] = int(c % 3); // 0: at zero, 1: at C, 2: free
        std::vector<std::size_t> free;
        Eigen::VectorXd a = Eigen::VectorXd::Zero(Eigen::Index(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == 1)
                a[Eigen::Index(i)] = C;
            if (state[i] == 2)
                free.push_back(i);
        }
        const auto f = Eigen::Index(free.size());
        if (f > 0) {
            // [Q_FF y_F; y_F' 0] [a_F; b] = [1 - Q_FB a_B; -y_B' a_B]
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(f + 1, f + 1);
            Eigen::VectorXd rhs(f + 1);
            const Eigen::VectorXd qa = Q * a;
            for (Eigen::Index p = 0; p < f; ++p) {
                for (Eigen::Index q = 0; q < f; ++q)
                    K(p, q) = Q(Eigen::Index(free[p]), Eigen::Index(free[q]));
                K(p, f) = y[Eigen::Index(free[p])];
                K(f, p) = y[Eigen::Index(free[p])];
                rhs[p] = 1 - qa[Eigen::Index(free[p])];
            }
            rhs[f] = -y.dot(a);
            const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
            if ((K * sol - rhs).norm() > 1e-9)
                continue;
            for (Eigen::Index p = 0; p < f; ++p)
                a[Eigen::Index(free[p])] = sol[p];
        }
        if (std::abs(y.dot(a)) > 1e-9)
            continue;
        if ((a.array() < -1e-12).any() || (a.array() > C + 1e-12).any())
            continue;
        a = a.cwiseMax(0.0).cwiseMin(C);
        const double obj = objective(a);
        if (obj > best.objective) {
            best.objective = obj;
            best.alpha.assign(a.data(), a.data() + a.size());
        }
    }
    return best;
}

/// 2U / (2 n+ n-) counted over all pairs, ties worth one half.
inline double mann_whitney_auc(std::span<const double> scores, std::span<const int> labels)
{
    std::int64_t twice_u = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (labels[i] == 1 ? pos : neg)++;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1)
            continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] == 1)
                continue;
            twice_u += scores[i] > scores[j] ? 2 : scores[i] == scores[j] ? 1 : 0;
        }
    }
    return double(twice_u) / (2.0 * double(pos) * double(neg));
}

/// Best accuracy of "positive iff score > t" over every distinct decision
/// rule: t below all scores and t at each score.
inline double best_sweep_accuracy(std::span<const double> scores, std::span<const int> labels)
{
    std::vector<double> ts(scores.begin(), scores.end());
    ts.push_back(-std::numeric_limits<double>::infinity());
    std::int64_t best = -1;
    for (double t : ts) {
        std::int64_t correct = 0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            correct += (scores[i] > t) == (labels[i] == 1);
        best = std::max(best, correct);
    }
    return double(best) / double(scores.size());
}

/// Distance from p to the segment a + u (b - a), and the u of the projection.
inline std::pair<double, double> segment_residual(std::span<const double> p, std::span<const double> a,
                                                  std::span<const double> b)
{
    double dd = 0, dp = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dd += (b[k] - a[k]) * (b[k] - a[k]);
        dp += (p[k] - a[k]) * (b[k] - a[k]);
    }
    const double u = dd > 0 ? dp / dd : 0;
    double r = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double q = a[k] + u * (b[k] - a[k]) - p[k];
        r += q * q;
    }
    return {std::sqrt(r), u};
}

} // namespace nodfuse::oracle
