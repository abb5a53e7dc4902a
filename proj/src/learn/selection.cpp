#include "nodfuse/learn/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"
#include "nodfuse/eval/metrics.hpp"
#include "nodfuse/log.hpp"
#include "nodfuse/parallel.hpp"

namespace nodfuse::learn {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

/// Indices of the k nearest candidates to `from` (distance, then index).
std::vector<std::size_t> nearest(std::size_t from, std::span<const std::size_t> candidates, std::size_t k,
                                 const std::function<double(std::size_t, std::size_t)>& dist)
{
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t c : candidates)
        if (c != from)
            d.emplace_back(dist(from, c), c);
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + std::ptrdiff_t(k), d.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i)
        out[i] = d[i].second;
    return out;
}

} // namespace

SmoteResult smote(const FeatureTable& minority, int k, std::size_t n_synthetic, Rng& rng)
{
    const std::size_t n = minority.rows();
    if (n == 0)
        throw ValidationError("smote: no minority rows");
    if (k < 1)
        throw ValidationError("smote: k must be >= 1");
    SmoteResult res;
    res.k_used = k;
    if (std::size_t(k) >= n) {
        res.k_used = int(n) - 1;
        warn(fmt::format("smote: {} minority rows, k reduced from {} to {}", n, k, res.k_used));
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    auto dist = [&](std::size_t a, std::size_t b) { return sq_dist(minority.row(a), minority.row(b)); };
    std::vector<std::vector<std::size_t>> nn(n);
    for (std::size_t i = 0; i < n; ++i)
        nn[i] = nearest(i, all, std::size_t(res.k_used), dist);

    for (std::size_t s = 0; s < n_synthetic; ++s) {
        SmoteSample out;
        out.seed = rng.below(n);
        const auto& cand = nn[out.seed];
        out.neighbor = cand.empty() ? out.seed : cand[rng.below(cand.size())];
        out.u = rng.uniform();
        const auto x = minority.row(out.seed), y = minority.row(out.neighbor);
        out.values.resize(x.size());
        for (std::size_t c = 0; c < x.size(); ++c)
            out.values[c] = x[c] + out.u * (y[c] - x[c]);
        res.samples.push_back(std::move(out));
    }
    return res;
}

FeatureTable balance_with_smote(const FeatureTable& rows, int k, Rng& rng)
{
    const std::size_t pos = rows.count(1), neg = rows.count(0);
    if (pos == neg || pos == 0 || neg == 0)
        return rows;
    const int minority_label = pos < neg ? 1 : 0;
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < rows.rows(); ++r)
        if (rows.label(r) == minority_label)
            idx.push_back(r);
    const auto minority = rows.select_rows(idx);
    const auto synth = smote(minority, k, std::max(pos, neg) - idx.size(), rng);
    FeatureTable out = rows;
    for (std::size_t s = 0; s < synth.samples.size(); ++s)
        out.add_row(fmt::format("smote:{}", s), minority_label, synth.samples[s].values);
    return out;
}

std::vector<std::size_t> variance_filter(const FeatureTable& rows)
{
    const std::size_t n = rows.rows(), d = rows.cols();
    if (d == 0)
        return {};
    std::vector<double> var(d, 0.0);
    if (n >= 2) {
        for (std::size_t c = 0; c < d; ++c) {
            const auto col = rows.column(c);
            const double m = std::accumulate(col.begin(), col.end(), 0.0) / double(n);
            double s = 0;
            for (double v : col)
                s += (v - m) * (v - m);
            var[c] = s / double(n - 1);
        }
    }
    const double mean = std::accumulate(var.begin(), var.end(), 0.0) / double(d);
    // Relative slack so equal variances survive the rounding of their mean.
    const double cut = mean * (1 - 1e-12);
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < d; ++c)
        if (var[c] >= cut)
            keep.push_back(c);
    return keep;
}

std::vector<double> relieff_rank(const FeatureTable& rows, int k, std::size_t m, Rng& rng)
{
    const std::size_t n = rows.rows(), d = rows.cols();
    if (rows.count(0) == 0 || rows.count(1) == 0)
        throw ValidationError("relieff: both classes are required");
    if (k < 1 || m == 0)
        throw ValidationError("relieff: k and m must be >= 1");
    rows.check_finite();

    std::vector<double> lo(d, INFINITY), range(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double hi = -INFINITY;
        for (std::size_t r = 0; r < n; ++r) {
            lo[c] = std::min(lo[c], rows.at(r, c));
            hi = std::max(hi, rows.at(r, c));
        }
        range[c] = hi - lo[c];
    }
    std::vector<double> scaled(n * d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
            scaled[r * d + c] = range[c] > 0 ? (rows.at(r, c) - lo[c]) / range[c] : 0.0;
    auto row = [&](std::size_t r) { return std::span<const double>(&scaled[r * d], d); };
    auto dist = [&](std::size_t a, std::size_t b) { return sq_dist(row(a), row(b)); };

    std::vector<std::size_t> by_class[2];
    for (std::size_t r = 0; r < n; ++r)
        by_class[rows.label(r)].push_back(r);
    for (int c = 0; c < 2; ++c)
        if (by_class[c].size() <= std::size_t(k))
            warn(fmt::format("relieff: class {} has {} rows, k clamped", c, by_class[c].size()));

    std::vector<std::size_t> samples(n);
    std::iota(samples.begin(), samples.end(), 0);
    if (m < n) {
        rng.shuffle(std::span(samples));
        samples.resize(m);
    }
    const double draws = double(samples.size());
    std::vector<double> w(d, 0.0);
    for (std::size_t r : samples) {
        const int cls = rows.label(r);
        const auto hits = nearest(r, by_class[cls], std::size_t(k), dist);
        const auto misses = nearest(r, by_class[1 - cls], std::size_t(k), dist);
        for (std::size_t c = 0; c < d; ++c) {
            double h = 0, mi = 0;
            for (std::size_t x : hits)
                h += std::abs(scaled[r * d + c] - scaled[x * d + c]);
            for (std::size_t x : misses)
                mi += std::abs(scaled[r * d + c] - scaled[x * d + c]);
            if (!hits.empty())
                w[c] -= h / (draws * double(hits.size()));
            w[c] += mi / (draws * double(misses.size()));
        }
    }
    return w;
}

std::vector<std::size_t> relieff_top(std::span<const double> weights, std::optional<std::size_t> top)
{
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    std::size_t t = 0;
    if (top)
        t = std::min(*top, order.size());
    else
        while (t < order.size() && weights[order[t]] > 0)
            ++t;
    order.resize(t);
    return order;
}

SfsRun sfs_greedy(std::size_t n_features, const std::function<double(std::span<const std::size_t>)>& criterion,
                  double threshold, unsigned workers)
{
    SfsRun run;
    double incumbent = 0.5;
    std::vector<bool> used(n_features, false);
    while (run.selected.size() < n_features) {
        std::vector<std::size_t> candidates;
        for (std::size_t f = 0; f < n_features; ++f)
            if (!used[f])
                candidates.push_back(f);
        std::vector<double> score(candidates.size());
        parallel_for(candidates.size(), workers, [&](std::size_t i) {
            auto subset = run.selected;
            subset.push_back(candidates[i]);
            score[i] = criterion(subset);
        });
        std::size_t best = 0;
        for (std::size_t i = 1; i < score.size(); ++i)
            if (score[i] > score[best])
                best = i;
        if (!(score[best] > incumbent + threshold))
            break;
        incumbent = score[best];
        used[candidates[best]] = true;
        run.selected.push_back(candidates[best]);
        run.auc_trace.push_back(incumbent);
    }
    return run;
}

double cv_auc(const FeatureTable& rows, std::span<const std::size_t> columns, const SfsConfig& cfg,
              std::uint64_t seed)
{
    const auto sub = rows.select_columns(columns);
    const auto fold = eval::stratified_folds(rows.labels(), cfg.inner_folds, seed);
    double total = 0;
    for (int f = 0; f < cfg.inner_folds; ++f) {
        std::vector<std::size_t> tr, te;
        for (std::size_t r = 0; r < rows.rows(); ++r)
            (fold[r] == f ? te : tr).push_back(r);
        auto train = sub.select_rows(tr);
        if (cfg.smote) {
            Rng rng = Rng(seed).derive(std::uint64_t(f) + 1);
            train = balance_with_smote(train, cfg.smote_k, rng);
        }
        const auto model = svm_train(train, cfg.svm);
        const auto test = sub.select_rows(te);
        total += eval::auc(model.score(test), test.labels());
    }
    return total / cfg.inner_folds;
}

SelectionResult sfs_select(const FeatureTable& rows, const SfsConfig& cfg)
{
    if (rows.cols() < 1)
        throw ValidationError("sfs: no candidate features");
    if (cfg.runs < 2 || cfg.consensus < 1 || cfg.consensus > cfg.runs)
        throw ValidationError("sfs: need runs >= 2 and 1 <= consensus <= runs");
    rows.check_finite();
    SelectionResult res;
    res.feature_names = rows.names();
    res.counts.assign(rows.cols(), 0);
    const Rng root(cfg.seed);
    const auto split = eval::stratified_folds(rows.labels(), cfg.runs, root.derive(1).next());
    std::vector<double> step_sum(rows.cols(), 0.0);
    for (int r = 0; r < cfg.runs; ++r) {
        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < rows.rows(); ++i)
            if (split[i] != r)
                keep.push_back(i);
        const auto subset = rows.select_rows(keep);
        const std::uint64_t inner_seed = root.derive(100 + std::uint64_t(r)).next();
        auto run = sfs_greedy(
            rows.cols(), [&](std::span<const std::size_t> cols) { return cv_auc(subset, cols, cfg, inner_seed); },
            cfg.threshold, cfg.workers);
        for (std::size_t s = 0; s < run.selected.size(); ++s) {
            res.counts[run.selected[s]]++;
            step_sum[run.selected[s]] += double(s);
        }
        res.runs.push_back(std::move(run));
    }
    for (std::size_t c = 0; c < rows.cols(); ++c)
        if (res.counts[c] >= cfg.consensus)
            res.consensus.push_back(c);
    std::stable_sort(res.consensus.begin(), res.consensus.end(), [&](std::size_t a, std::size_t b) {
        return step_sum[a] / res.counts[a] < step_sum[b] / res.counts[b];
    });
    return res;
}

std::vector<std::string> SelectionResult::consensus_names() const
{
    std::vector<std::string> out;
    for (std::size_t c : consensus)
        out.push_back(feature_names[c]);
    return out;
}

nlohmann::json SelectionResult::to_json() const
{
    nlohmann::json runs_j = nlohmann::json::array();
    for (const auto& r : runs) {
        std::vector<std::string> names;
        for (std::size_t c : r.selected)
            names.push_back(feature_names[c]);
        runs_j.push_back({{"selected", names}, {"auc_trace", r.auc_trace}});
    }
    nlohmann::json counts_j = nlohmann::json::object();
    for (std::size_t c = 0; c < feature_names.size(); ++c)
        counts_j[feature_names[c]] = counts[c];
    return {{"consensus", consensus_names()}, {"runs", runs_j}, {"counts", counts_j}};
}

SvmParams svm_grid_search(const FeatureTable& rows, const SfsConfig& cfg)
{
    std::vector<double> mean, scale;
    standardization(rows, mean, scale);
    const double g0 = default_gamma(rows, mean, scale);
    std::vector<std::size_t> all(rows.cols());
    std::iota(all.begin(), all.end(), 0);
    SvmParams best = cfg.svm;
    double best_auc = -1;
    const Rng root(cfg.seed);
    for (double C : {0.1, 1.0, 10.0})
        for (double mult : {0.25, 1.0, 4.0}) {
            SfsConfig trial = cfg;
            trial.svm.C = C;
            trial.svm.gamma = g0 * mult;
            const double a = cv_auc(rows, all, trial, root.derive(7).next());
            if (a > best_auc) {
                best_auc = a;
                best = trial.svm;
            }
        }
    return best;
}

} // namespace nodfuse::learn
