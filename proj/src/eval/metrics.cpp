#include "nodfuse/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "nodfuse/error.hpp"
#include "nodfuse/rng.hpp"

namespace nodfuse::eval {

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size())
        throw ValidationError("roc: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    RocCurve roc;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw ValidationError(fmt::format("roc: non-finite score at row {}", i));
        (labels[i] == 1 ? roc.n_pos : roc.n_neg)++;
    }
    if (roc.n_pos == 0 || roc.n_neg == 0)
        throw ValidationError("roc: both classes must be present");
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    // Twice the trapezoid area in units of one pos/neg pair.
    std::int64_t area2 = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        roc.thresholds.push_back(s);
        roc.tp.push_back(tp);
        roc.fp.push_back(fp);
        const std::int64_t tp0 = tp, fp0 = fp;
        for (; i < order.size() && scores[order[i]] == s; ++i)
            (labels[order[i]] == 1 ? tp : fp)++;
        area2 += (fp - fp0) * (tp + tp0);
    }
    roc.thresholds.push_back(-INFINITY);
    roc.tp.push_back(tp);
    roc.fp.push_back(fp);
    roc.auc = double(area2) / (2.0 * double(roc.n_pos) * double(roc.n_neg));
    return roc;
}

double auc(std::span<const double> scores, std::span<const int> labels) { return roc_auc(scores, labels).auc; }

void write_roc_csv(const std::filesystem::path& path, const RocCurve& roc)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out << "threshold,fpr,tpr\n";
    for (std::size_t k = 0; k < roc.size(); ++k)
        out << fmt::format("{:.17g},{:.17g},{:.17g}\n", roc.thresholds[k], roc.fpr(k), roc.tpr(k));
}

Confusion confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold)
{
    if (scores.size() != labels.size())
        throw ValidationError("confusion: scores and labels differ in length");
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] > threshold;
        if (labels[i] == 1)
            (predicted ? c.tp : c.fn)++;
        else
            (predicted ? c.fp : c.tn)++;
    }
    const auto n = c.tp + c.fp + c.tn + c.fn;
    c.acc = n ? double(c.tp + c.tn) / double(n) : 0;
    c.sen = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0;
    c.spe = c.tn + c.fp ? double(c.tn) / double(c.tn + c.fp) : 0;
    return c;
}

IsoAccuracy iso_accuracy_threshold(const RocCurve& roc, std::int64_t n_pos, std::int64_t n_neg)
{
    if (n_pos <= 0 || n_neg <= 0 || roc.size() == 0)
        throw ValidationError("iso-accuracy: needs a valid ROC and positive class counts");
    // tpr - slope * fpr is proportional to tp - fp when the ROC counts match
    // the class counts, so compare exactly in integers.
    std::size_t best = 0;
    const bool exact = n_pos == roc.n_pos && n_neg == roc.n_neg;
    double best_val = -INFINITY;
    const double slope = double(n_neg) / double(n_pos);
    for (std::size_t k = 0; k < roc.size(); ++k) {
        const double v = exact ? double(roc.tp[k] - roc.fp[k]) : roc.tpr(k) - slope * roc.fpr(k);
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    IsoAccuracy r;
    r.point = best;
    r.threshold = roc.thresholds[best];
    r.slope = slope;
    r.fpr = roc.fpr(best);
    r.tpr = roc.tpr(best);
    r.intercept = r.tpr - slope * r.fpr;
    r.accuracy = double(roc.tp[best] + roc.n_neg - roc.fp[best]) / double(roc.n_pos + roc.n_neg);
    return r;
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed)
{
    if (k < 2)
        throw ValidationError("folds must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.size() < std::size_t(k) || neg.size() < std::size_t(k))
        throw ValidationError(fmt::format("stratified {}-fold split needs at least {} rows per class ({} pos, {} neg)",
                                          k, k, pos.size(), neg.size()));
    Rng rng(seed);
    rng.shuffle(std::span(pos));
    rng.shuffle(std::span(neg));
    std::vector<int> fold(labels.size());
    std::size_t j = 0;
    for (auto list : {&pos, &neg})
        for (std::size_t i : *list)
            fold[i] = int(j++ % std::size_t(k));
    return fold;
}

TTest t_test(std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 2 || b.size() < 2)
        throw ValidationError("t-test needs at least two values per group");
    auto mean = [](std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size()); };
    const double ma = mean(a), mb = mean(b);
    double ss = 0;
    for (double x : a)
        ss += (x - ma) * (x - ma);
    for (double x : b)
        ss += (x - mb) * (x - mb);
    TTest r;
    r.dof = double(a.size() + b.size() - 2);
    const double se = std::sqrt(ss / r.dof * (1.0 / double(a.size()) + 1.0 / double(b.size())));
    if (se == 0) {
        r.t = ma == mb ? 0 : std::copysign(INFINITY, ma - mb);
        r.p = ma == mb ? 1 : 0;
        return r;
    }
    r.t = (ma - mb) / se;
    boost::math::students_t dist(r.dof);
    r.p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
    return r;
}

} // namespace nodfuse::eval
