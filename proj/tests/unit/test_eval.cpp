#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../oracles/learn_oracles.hpp"
#include "nodfuse/error.hpp"
#include "nodfuse/eval/metrics.hpp"
#include "nodfuse/rng.hpp"

using namespace nodfuse;
using namespace nodfuse::eval;

namespace {

void random_scores(Rng& rng, std::size_t n, std::vector<double>& s, std::vector<int>& l)
{
    s.resize(n);
    l.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        l[i] = i < 2 ? int(i) : int(rng.below(2));
        // Coarse grid so ties are common.
        s[i] = double(rng.below(8)) + 0.7 * l[i] * rng.uniform();
    }
}

} // namespace

TEST_CASE("auc examples")
{
    const std::vector<double> s{0.9, 0.2, 0.5, 0.1};
    const std::vector<int> l{1, 1, 0, 0};
    CHECK(auc(s, l) == 0.75);
    CHECK(auc(std::vector<double>{3, 4, 1, 2}, l) == 1.0);
    CHECK(auc(std::vector<double>{1, 1, 1, 1}, l) == 0.5);
    CHECK_THROWS_AS(auc(s, std::vector<int>{1, 1, 1, 1}), ValidationError);
}

TEST_CASE("auc equals mann whitney")
{
    Rng rng(7);
    std::vector<double> s;
    std::vector<int> l;
    for (int t = 0; t < 500; ++t) {
        random_scores(rng, 2 + rng.below(60), s, l);
        const auto roc = roc_auc(s, l);
        CHECK(roc.auc == oracle::mann_whitney_auc(s, l));
        // Stored points integrate to the same area and are monotone.
        double area = 0;
        for (std::size_t k = 1; k < roc.size(); ++k) {
            CHECK(roc.tpr(k) >= roc.tpr(k - 1));
            CHECK(roc.fpr(k) >= roc.fpr(k - 1));
            area += (roc.fpr(k) - roc.fpr(k - 1)) * (roc.tpr(k) + roc.tpr(k - 1)) / 2;
        }
        CHECK(area == doctest::Approx(roc.auc).epsilon(1e-12));
        CHECK(roc.tpr(0) == 0);
        CHECK(roc.fpr(roc.size() - 1) == 1);
    }
}

TEST_CASE("auc transforms")
{
    Rng rng(2);
    std::vector<double> s;
    std::vector<int> l;
    for (int t = 0; t < 50; ++t) {
        random_scores(rng, 30, s, l);
        const double a = auc(s, l);
        std::vector<double> e(s.size());
        std::transform(s.begin(), s.end(), e.begin(), [](double x) { return std::exp(3 * x) - 5; });
        CHECK(auc(e, l) == a);
        std::vector<int> flip(l.size());
        std::transform(l.begin(), l.end(), flip.begin(), [](int x) { return 1 - x; });
        CHECK(auc(s, flip) == doctest::Approx(1 - a).epsilon(1e-12));
    }
}

TEST_CASE("confusion metrics")
{
    const std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.55, 0.4, 0.3, 0.2, 0.1, 0.05};
    const std::vector<int> l{1, 1, 0, 1, 0, 1, 0, 0, 0, 0};
    // Threshold 0.5: predicted positive = first five -> TP 3, FP 2, FN 1, TN 4.
    const auto c = confusion_metrics(s, l, 0.5);
    CHECK(c.tp == 3);
    CHECK(c.fp == 2);
    CHECK(c.fn == 1);
    CHECK(c.tn == 4);
    CHECK(c.acc == doctest::Approx(0.7));
    CHECK(c.sen == doctest::Approx(0.75));
    CHECK(c.spe == doctest::Approx(4.0 / 6.0));
    const auto all = confusion_metrics(s, l, -1);
    CHECK(all.sen == 1);
    CHECK(all.spe == 0);
    const std::vector<int> right{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    const auto perfect = confusion_metrics(s, right, 0.5);
    CHECK(perfect.acc == 1);
    CHECK(perfect.sen == 1);
    CHECK(perfect.spe == 1);
}

TEST_CASE("iso accuracy threshold")
{
    RocCurve dummy;
    dummy.thresholds = {1, -INFINITY};
    dummy.tp = {0, 431};
    dummy.fp = {0, 795};
    dummy.n_pos = 431;
    dummy.n_neg = 795;
    CHECK(iso_accuracy_threshold(dummy, 431, 795).slope == doctest::Approx(795.0 / 431.0));

    Rng rng(13);
    std::vector<double> s;
    std::vector<int> l;
    for (int t = 0; t < 100; ++t) {
        random_scores(rng, 5 + rng.below(80), s, l);
        const auto roc = roc_auc(s, l);
        const auto iso = iso_accuracy_threshold(roc, roc.n_pos, roc.n_neg);
        const auto c = confusion_metrics(s, l, iso.threshold);
        CHECK(c.acc == oracle::best_sweep_accuracy(s, l));
        CHECK(iso.accuracy == c.acc);
        CHECK(iso.intercept == doctest::Approx(iso.tpr - iso.slope * iso.fpr));
    }

    // Balanced classes: the Youden point.
    const std::vector<double> bs{0.9, 0.8, 0.6, 0.4, 0.3, 0.1};
    const std::vector<int> bl{1, 0, 1, 1, 0, 0};
    const auto roc = roc_auc(bs, bl);
    const auto iso = iso_accuracy_threshold(roc, 3, 3);
    double best = -1;
    for (std::size_t k = 0; k < roc.size(); ++k)
        best = std::max(best, roc.tpr(k) - roc.fpr(k));
    CHECK(iso.tpr - iso.fpr == doctest::Approx(best));
}

TEST_CASE("stratified folds")
{
    std::vector<int> labels(250);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = i % 5 < 2;
    const auto f = stratified_folds(labels, 5, 3);
    const double ratio = 100.0 / 250.0;
    for (int k = 0; k < 5; ++k) {
        int n = 0, pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (f[i] == k) {
                ++n;
                pos += labels[i];
            }
        CHECK(n == 50);
        CHECK(std::abs(pos - ratio * n) <= 1);
    }
    CHECK(stratified_folds(labels, 5, 3) == f);
    CHECK(stratified_folds(labels, 5, 4) != f);

    std::vector<int> odd(1226, 0);
    std::fill(odd.begin(), odd.begin() + 431, 1);
    const auto g = stratified_folds(odd, 5, 1);
    for (int k = 0; k < 5; ++k) {
        const auto n = std::count(g.begin(), g.end(), k);
        CHECK((n == 245 || n == 246));
    }
}

TEST_CASE("t test")
{
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
    const auto r = t_test(a, b);
    CHECK(r.t == doctest::Approx(-1.0));
    CHECK(r.dof == 8);
    CHECK(r.p == doctest::Approx(0.346594).epsilon(1e-5));
    CHECK(t_test(a, a).p == doctest::Approx(1.0));
}
