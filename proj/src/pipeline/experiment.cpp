#include "nodfuse/pipeline/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "nodfuse/error.hpp"
#include "nodfuse/eval/metrics.hpp"
#include "nodfuse/learn/selection.hpp"
#include "nodfuse/learn/svm.hpp"
#include "nodfuse/log.hpp"
#include "nodfuse/neural/model_io.hpp"
#include "nodfuse/parallel.hpp"
#include "nodfuse/pipeline/dataset.hpp"

namespace nodfuse::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed stream tags.
constexpr std::uint64_t kFoldsTag = 1;
constexpr std::uint64_t kTrainOnceTag = 2;
constexpr std::uint64_t kFoldTag = 100;

void write_json(const fs::path& path, const json& j)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// CNN inputs for every nodule: the unaugmented tensor used for feature
/// extraction and, for training, the source the augmentations start from.
struct TensorSet {
    ingest::Shape3 shape;
    ingest::TensorMode mode = ingest::TensorMode::segmented;
    std::vector<ingest::NoduleTensor> base;
    std::vector<ingest::NoduleTensor> crops; // segmented ROI crops
};

TensorSet prepare_tensors(const ExperimentConfig& cfg, const Dataset& data)
{
    TensorSet ts;
    if (cfg.method == Method::ori_multicrop) {
        ts.mode = ingest::TensorMode::patch;
        ts.shape = cfg.patch_shape;
        ts.base = build_tensors(data, ts.shape, ts.mode, cfg.workers);
        return ts;
    }
    ts.shape = cfg.tensor_shape ? *cfg.tensor_shape : ingest::dataset_shape(data.volumes);
    ts.crops.resize(data.volumes.size());
    ts.base.resize(data.volumes.size());
    parallel_for(data.volumes.size(), cfg.workers, [&](std::size_t i) {
        const auto label = data.labels[i] == 1 ? ingest::Label::malignant : ingest::Label::benign;
        ts.crops[i] = ingest::crop_roi(data.volumes[i], label, data.ids[i]);
        try {
            ts.base[i] = ingest::embed_centered(ts.crops[i], ts.shape);
        } catch (const ValidationError& e) {
            throw ValidationError(data.ids[i] + ": " + e.what());
        }
    });
    return ts;
}

std::vector<ingest::NoduleTensor> training_tensors(const ExperimentConfig& cfg, const TensorSet& ts,
                                                   std::span<const std::size_t> rows)
{
    std::vector<ingest::NoduleTensor> out;
    for (std::size_t r : rows) {
        if (!cfg.augment) {
            out.push_back(ts.base[r]);
            continue;
        }
        if (ts.mode == ingest::TensorMode::patch) {
            if (!(ts.shape.x == ts.shape.y && ts.shape.y == ts.shape.z))
                throw ValidationError("augmenting patches needs a cubic patch_shape");
            for (auto& t : ingest::augment(ts.base[r]))
                out.push_back(std::move(t));
        } else {
            for (const auto& t : ingest::augment(ts.crops[r]))
                out.push_back(ingest::embed_centered(t, ts.shape));
        }
    }
    return out;
}

neural::TrainedNetwork fit_cnn(const ExperimentConfig& cfg, const TensorSet& ts, std::span<const std::size_t> rows,
                               std::uint64_t seed, const fs::path& dir)
{
    auto spec = neural::preset(cfg.architecture, ts.shape);
    auto tcfg = cfg.train;
    tcfg.seed = seed;
    const auto tensors = training_tensors(cfg, ts, rows);
    auto model = neural::train(spec, tensors, tcfg);
    neural::save_model(dir / "model.bin", model);
    neural::write_training_log(dir / "training_log.csv", model.log);
    if (model.diverged)
        warn(fmt::format("{}: training diverged, kept the last finite epoch", dir.string()));
    return model;
}

using CnnFeatures = std::vector<double> (*)(neural::Network<float>&, const ingest::NoduleTensor&);

std::vector<double> output_layer(neural::Network<float>& net, const ingest::NoduleTensor& t)
{
    const auto f = neural::output_features(net, t);
    return {f.feature_p, f.feature_n};
}

std::vector<std::string> feature_names(CnnFeatures fn, std::size_t n)
{
    if (fn == &output_layer)
        return {"cnn_feature_p", "cnn_feature_n"};
    std::vector<std::string> names;
    for (std::size_t k = 0; k < n; ++k)
        names.push_back(fmt::format("ffl_{}", k));
    return names;
}

/// Per-row CNN features from `net`, or from `per_row[i]` where set.
learn::FeatureTable cnn_table(CnnFeatures fn, neural::Network<float>& net, const TensorSet& ts, const Dataset& data,
                              const std::vector<std::vector<double>>& per_row = {})
{
    std::vector<std::vector<double>> rows(ts.base.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i] = i < per_row.size() && !per_row[i].empty() ? per_row[i] : fn(net, ts.base[i]);
    learn::FeatureTable t(feature_names(fn, rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        t.add_row(data.ids[i], data.labels[i], rows[i]);
    return t;
}

/// Columns chosen by SFS consensus; when no feature reaches consensus the most
/// often selected one is used, and all columns if nothing was ever selected.
std::vector<std::size_t> consensus_or_fallback(const learn::SelectionResult& sel)
{
    if (!sel.consensus.empty())
        return sel.consensus;
    const auto best = std::max_element(sel.counts.begin(), sel.counts.end());
    if (*best > 0)
        return {std::size_t(best - sel.counts.begin())};
    std::vector<std::size_t> all(sel.counts.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
}

/// Final SVM on the training rows restricted to `cols`; returns test scores.
std::vector<double> svm_scores(const ExperimentConfig& cfg, const learn::FeatureTable& table,
                               std::span<const std::size_t> cols, std::span<const std::size_t> train,
                               std::span<const std::size_t> test, std::uint64_t seed, const fs::path& dir,
                               json& extra)
{
    const auto sub = table.select_columns(cols);
    auto tr = sub.select_rows(train);
    auto sfs = cfg.sfs(seed);
    learn::SvmParams params = sfs.svm;
    if (cfg.svm_grid) {
        params = learn::svm_grid_search(tr, sfs);
        extra["svm_grid"] = {{"C", params.C}, {"gamma", *params.gamma}};
    }
    if (cfg.smote) {
        Rng rng = Rng(seed).derive(3);
        tr = learn::balance_with_smote(tr, cfg.smote_k, rng);
    }
    const auto model = learn::svm_train(tr, params);
    learn::save_svm(dir / "svm.bin", model);
    extra["support_vectors"] = model.support_count();
    return model.score(sub.select_rows(test));
}

void write_scores(const fs::path& path, const Dataset& data, std::span<const std::size_t> rows,
                  std::span<const double> scores, std::span<const int> fold_of)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out << "id,label,fold,score\n";
    for (std::size_t k = 0; k < rows.size(); ++k)
        out << fmt::format("{},{},{},{:.17g}\n", data.ids[rows[k]], data.labels[rows[k]], fold_of[rows[k]], scores[k]);
}

} // namespace

RunOutput run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    RunOutput out;
    out.dir = artifact_dir(cfg);
    fs::create_directories(out.dir);
    write_json(out.dir / "config.json", to_json(cfg));
    const Rng root(cfg.seed);

    info(fmt::format("[{}] loading {}", method_name(cfg.method), cfg.manifest_path().string()));
    const auto data = load_dataset(cfg.data_dir, cfg.manifest_path(), cfg.target_spacing, cfg.workers);
    out.folds = eval::stratified_folds(data.labels, cfg.folds, root.derive(kFoldsTag).next());
    {
        std::ofstream f(out.dir / "folds.csv", std::ios::trunc);
        f << "id,label,fold\n";
        for (std::size_t i = 0; i < data.ids.size(); ++i)
            f << fmt::format("{},{},{}\n", data.ids[i], data.labels[i], out.folds[i]);
    }

    const bool hand = cfg.method == Method::ss_hf || cfg.method == Method::ss_olhf || cfg.method == Method::s_fflhf;
    learn::FeatureTable handcrafted;
    if (hand) {
        info("extracting handcrafted features");
        handcrafted = handcrafted_table(data, cfg.workers);
        learn::write_feature_csv(out.dir / "features_handcrafted.csv", handcrafted);
    }

    TensorSet tensors;
    std::optional<neural::TrainedNetwork> shared;
    if (needs_cnn(cfg.method)) {
        tensors = prepare_tensors(cfg, data);
        info(fmt::format("tensor shape {}x{}x{}", tensors.shape.x, tensors.shape.y, tensors.shape.z));
        if (cfg.train_once) {
            warn("train_once: the CNN sees every test fold during training");
            std::vector<std::size_t> all(data.ids.size());
            std::iota(all.begin(), all.end(), 0);
            shared = fit_cnn(cfg, tensors, all, root.derive(kTrainOnceTag).next(), out.dir);
        }
    }

    std::vector<double> pooled(data.ids.size(), 0.0);
    auto fold_scores = [&](int fold, std::span<const std::size_t> train, std::span<const std::size_t> test,
                           const fs::path& dir, eval::FoldOutcome& res) {
        const Rng fr = root.derive(kFoldTag + std::uint64_t(fold));
        std::optional<neural::TrainedNetwork> local;
        neural::Network<float>* net = nullptr;
        if (needs_cnn(cfg.method)) {
            if (shared) {
                // Each fold needs its own activation buffers.
                local.emplace(neural::TrainedNetwork{neural::Network<float>(shared->net.spec(), 0), shared->log,
                                                     shared->diverged});
                local->net.copy_parameters_from(shared->net);
            } else {
                info(fmt::format("fold {}: training {} on {} nodules", fold, cfg.architecture, train.size()));
                local = fit_cnn(cfg, tensors, train, fr.derive(1).next(), dir);
            }
            net = &local->net;
            res.extra["cnn_epochs"] = local->log.size();
            res.extra["cnn_final_loss"] = local->log.empty() ? 0.0 : local->log.back().loss;
            res.extra["cnn_diverged"] = local->diverged;
        }

        // Out-of-fold CNN features for the training rows.
        std::vector<std::vector<double>> oof;
        const CnnFeatures fn = cfg.method == Method::ss_olhf ? &output_layer : &neural::ffl_features;
        if (cfg.cross_fit_folds >= 2 && needs_cnn(cfg.method) && cfg.method != Method::ori_multicrop) {
            std::vector<int> labels;
            for (std::size_t r : train)
                labels.push_back(data.labels[r]);
            const auto inner = eval::stratified_folds(labels, cfg.cross_fit_folds, fr.derive(6).next());
            oof.resize(data.ids.size());
            for (int k = 0; k < cfg.cross_fit_folds; ++k) {
                std::vector<std::size_t> fit_rows, held;
                for (std::size_t i = 0; i < train.size(); ++i)
                    (inner[i] == k ? held : fit_rows).push_back(train[i]);
                info(fmt::format("fold {}: cross-fit CNN {} of {}", fold, k + 1, cfg.cross_fit_folds));
                const auto sub = dir / fmt::format("cross_fit_{}", k);
                auto m = fit_cnn(cfg, tensors, fit_rows, fr.derive(10 + std::uint64_t(k)).next(), sub);
                for (std::size_t r : held)
                    oof[r] = fn(m.net, tensors.base[r]);
            }
        }

        learn::FeatureTable table;
        std::vector<std::size_t> cols;
        switch (cfg.method) {
        case Method::ori_multicrop:
            for (std::size_t r : test) {
                const auto f = neural::output_features(*net, tensors.base[r]);
                res.scores.push_back(f.feature_p - f.feature_n);
            }
            return;
        case Method::ss_hf:
        case Method::ss_olhf: {
            table = cfg.method == Method::ss_hf ? handcrafted
                                                : handcrafted.join(cnn_table(fn, *net, tensors, data, oof));
            info(fmt::format("fold {}: feature selection over {} features", fold, table.cols()));
            auto sfs = cfg.sfs(fr.derive(2).next());
            sfs.workers = 1;
            const auto sel = learn::sfs_select(table.select_rows(train), sfs);
            write_json(dir / "selection.json", sel.to_json());
            cols = consensus_or_fallback(sel);
            break;
        }
        case Method::s_ffl:
            table = cnn_table(fn, *net, tensors, data, oof);
            cols = learn::variance_filter(table.select_rows(train));
            break;
        case Method::s_fflhf: {
            table = handcrafted.join(cnn_table(fn, *net, tensors, data, oof));
            Rng rng = fr.derive(4);
            const auto tr = table.select_rows(train);
            const auto w = learn::relieff_rank(tr, cfg.relieff_k, cfg.relieff_m ? cfg.relieff_m : tr.rows(), rng);
            cols = learn::relieff_top(w, cfg.relieff_top);
            if (cols.empty())
                cols = learn::relieff_top(w, 1);
            json wj = json::object();
            for (std::size_t c = 0; c < w.size(); ++c)
                wj[table.names()[c]] = w[c];
            write_json(dir / "relieff.json", wj);
            break;
        }
        }
        if (cols.empty())
            throw ComputeError("no features left after selection");
        if (needs_cnn(cfg.method))
            learn::write_feature_csv(dir / "features.csv", table);
        std::vector<std::string> names;
        for (std::size_t c : cols)
            names.push_back(table.names()[c]);
        res.extra["features"] = names;
        res.scores = svm_scores(cfg, table, cols, train, test, fr.derive(5).next(), dir, res.extra);
    };

    auto runner = [&](int fold, std::span<const std::size_t> train,
                      std::span<const std::size_t> test) -> eval::FoldOutcome {
        const auto dir = out.dir / fmt::format("fold_{}", fold);
        fs::create_directories(dir);
        eval::FoldOutcome res;
        fold_scores(fold, train, test, dir, res);
        std::vector<int> y;
        for (std::size_t k = 0; k < test.size(); ++k) {
            pooled[test[k]] = res.scores[k];
            y.push_back(data.labels[test[k]]);
        }
        write_scores(dir / "scores.csv", data, test, res.scores, out.folds);
        eval::write_roc_csv(dir / "roc.csv", eval::roc_auc(res.scores, y));
        return res;
    };

    out.report = eval::run_cv(data.labels, out.folds, cfg.folds, runner, cfg.workers);
    out.report.pipeline = method_name(cfg.method);
    out.report.seed = cfg.seed;

    std::vector<std::size_t> all(data.ids.size());
    std::iota(all.begin(), all.end(), 0);
    write_scores(out.dir / "scores.csv", data, all, pooled, out.folds);
    eval::write_roc_csv(out.dir / "roc_pooled.csv", eval::roc_auc(pooled, data.labels));
    write_json(out.dir / "metrics.json", out.report.to_json());
    info(fmt::format("[{}] AUC {:.4f} +- {:.4f}", out.report.pipeline, out.report.aggregate().at("auc").mean,
                     out.report.aggregate().at("auc").std));
    return out;
}

std::filesystem::path extract_features(const ExperimentConfig& cfg, const std::optional<fs::path>& model)
{
    cfg.validate();
    const auto dir = artifact_dir(cfg);
    fs::create_directories(dir);
    const auto data = load_dataset(cfg.data_dir, cfg.manifest_path(), cfg.target_spacing, cfg.workers);
    auto table = handcrafted_table(data, cfg.workers);
    fs::path path = dir / "features_handcrafted.csv";
    if (model) {
        auto trained = neural::load_model(*model);
        ExperimentConfig seg = cfg;
        seg.method = Method::ss_olhf;
        seg.tensor_shape = ingest::Shape3{trained.net.spec().input};
        const auto ts = prepare_tensors(seg, data);
        table = table.join(cnn_table(&output_layer, trained.net, ts, data));
        path = dir / "features_fusion.csv";
    }
    learn::write_feature_csv(path, table);
    return path;
}

std::filesystem::path train_cnn(const ExperimentConfig& cfg)
{
    cfg.validate();
    if (!needs_cnn(cfg.method))
        throw ValidationError("pipeline " + method_name(cfg.method) + " does not use a CNN");
    const auto dir = artifact_dir(cfg);
    fs::create_directories(dir);
    write_json(dir / "config.json", to_json(cfg));
    const auto data = load_dataset(cfg.data_dir, cfg.manifest_path(), cfg.target_spacing, cfg.workers);
    const auto ts = prepare_tensors(cfg, data);
    std::vector<std::size_t> all(data.ids.size());
    std::iota(all.begin(), all.end(), 0);
    const auto model = fit_cnn(cfg, ts, all, Rng(cfg.seed).derive(kTrainOnceTag).next(), dir);
    info(fmt::format("trained {} epochs, final loss {:.5f}", model.log.size(),
                     model.log.empty() ? 0.0 : model.log.back().loss));
    return dir / "model.bin";
}

} // namespace nodfuse::pipeline
