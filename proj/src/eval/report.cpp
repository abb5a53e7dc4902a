#include "nodfuse/eval/report.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "nodfuse/error.hpp"
#include "nodfuse/parallel.hpp"

namespace nodfuse::eval {

using nlohmann::json;

Summary summarize(std::span<const double> values)
{
    Summary s;
    if (values.empty())
        return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (double v : values)
            ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / double(values.size() - 1));
    }
    return s;
}

std::vector<double> MetricsReport::values(const std::string& metric) const
{
    std::vector<double> out;
    for (const auto& f : folds) {
        if (metric == "auc")
            out.push_back(f.auc);
        else if (metric == "acc")
            out.push_back(f.at_zero.acc);
        else if (metric == "sen")
            out.push_back(f.at_zero.sen);
        else if (metric == "spe")
            out.push_back(f.at_zero.spe);
        else if (metric == "iso_acc")
            out.push_back(f.at_iso.acc);
        else if (metric == "iso_sen")
            out.push_back(f.at_iso.sen);
        else if (metric == "iso_spe")
            out.push_back(f.at_iso.spe);
        else
            throw ValidationError("unknown metric '" + metric + "'");
    }
    return out;
}

std::map<std::string, Summary> MetricsReport::aggregate() const
{
    std::map<std::string, Summary> out;
    for (const char* m : {"auc", "acc", "sen", "spe", "iso_acc", "iso_sen", "iso_spe"})
        out[m] = summarize(values(m));
    return out;
}

namespace {

json confusion_json(const Confusion& c)
{
    return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}, {"acc", c.acc}, {"sen", c.sen}, {"spe", c.spe}};
}

Confusion confusion_from(const json& j)
{
    Confusion c;
    c.tp = j.at("tp");
    c.fp = j.at("fp");
    c.tn = j.at("tn");
    c.fn = j.at("fn");
    c.acc = j.at("acc");
    c.sen = j.at("sen");
    c.spe = j.at("spe");
    return c;
}

} // namespace

json MetricsReport::to_json() const
{
    json fj = json::array();
    for (const auto& f : folds)
        fj.push_back({{"fold", f.fold},
                      {"n_train", f.n_train},
                      {"n_test", f.n_test},
                      {"auc", f.auc},
                      {"threshold_zero", confusion_json(f.at_zero)},
                      {"iso",
                       {{"threshold", f.iso.threshold},
                        {"slope", f.iso.slope},
                        {"intercept", f.iso.intercept},
                        {"fpr", f.iso.fpr},
                        {"tpr", f.iso.tpr},
                        {"metrics", confusion_json(f.at_iso)}}},
                      {"details", f.extra}});
    json agg = json::object();
    for (const auto& [k, s] : aggregate())
        agg[k] = {{"mean", s.mean}, {"std", s.std}};
    return {{"pipeline", pipeline}, {"seed", seed}, {"folds", fj}, {"aggregate", agg}};
}

MetricsReport report_from_json(const json& j)
{
    MetricsReport r;
    try {
        r.pipeline = j.at("pipeline");
        r.seed = j.value("seed", std::uint64_t(0));
        for (const auto& f : j.at("folds")) {
            FoldMetrics m;
            m.fold = f.at("fold");
            m.n_train = f.at("n_train");
            m.n_test = f.at("n_test");
            m.auc = f.at("auc");
            m.at_zero = confusion_from(f.at("threshold_zero"));
            const auto& iso = f.at("iso");
            // Infinite thresholds are written as null.
            m.iso.threshold = iso.at("threshold").is_null() ? -INFINITY : iso.at("threshold").get<double>();
            m.iso.slope = iso.at("slope");
            m.iso.intercept = iso.at("intercept");
            m.iso.fpr = iso.at("fpr");
            m.iso.tpr = iso.at("tpr");
            m.at_iso = confusion_from(iso.at("metrics"));
            m.iso.accuracy = m.at_iso.acc;
            m.extra = f.value("details", json::object());
            r.folds.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("metrics report: ") + e.what());
    }
    return r;
}

MetricsReport run_cv(std::span<const int> labels, std::span<const int> fold_of, int folds, const FoldRunner& runner,
                     unsigned workers)
{
    if (labels.size() != fold_of.size())
        throw ValidationError("run_cv: labels and fold ids differ in length");
    MetricsReport report;
    report.folds.resize(std::size_t(folds));
    parallel_for(std::size_t(folds), workers, [&](std::size_t f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < labels.size(); ++i)
            (fold_of[i] == int(f) ? test : train).push_back(i);
        FoldOutcome out;
        try {
            out = runner(int(f), train, test);
            if (out.scores.size() != test.size())
                throw ComputeError(fmt::format("{} scores for {} test rows", out.scores.size(), test.size()));
        } catch (const ValidationError& e) {
            throw ValidationError(fmt::format("fold {}: {}", f, e.what()));
        } catch (const std::exception& e) {
            throw ComputeError(fmt::format("fold {}: {}", f, e.what()));
        }
        std::vector<int> y;
        for (std::size_t i : test)
            y.push_back(labels[i]);
        FoldMetrics m;
        m.fold = int(f);
        m.n_train = train.size();
        m.n_test = test.size();
        const auto roc = roc_auc(out.scores, y);
        m.auc = roc.auc;
        m.at_zero = confusion_metrics(out.scores, y, 0.0);
        m.iso = iso_accuracy_threshold(roc, roc.n_pos, roc.n_neg);
        m.at_iso = confusion_metrics(out.scores, y, m.iso.threshold);
        m.extra = std::move(out.extra);
        report.folds[f] = std::move(m);
    });
    return report;
}

} // namespace nodfuse::eval
