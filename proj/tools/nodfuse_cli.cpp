#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"
#include "nodfuse/eval/metrics.hpp"
#include "nodfuse/eval/report.hpp"
#include "nodfuse/log.hpp"
#include "nodfuse/pipeline/config.hpp"
#include "nodfuse/pipeline/dataset.hpp"
#include "nodfuse/pipeline/experiment.hpp"

namespace fs = std::filesystem;
using namespace nodfuse;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> data;
    std::optional<std::string> out;
    std::optional<std::string> pipeline;
    std::optional<std::string> architecture;
    std::optional<int> folds;
    std::optional<int> epochs;
    std::optional<double> spacing;
    bool train_once = false;
    bool quiet = false;

    void attach(CLI::App& cmd)
    {
        cmd.add_option("--config", config, "experiment config JSON");
        cmd.add_option("--seed", seed, "random seed (overrides eval.seed)");
        cmd.add_option("--workers", workers, "worker threads");
        cmd.add_option("--data", data, "data directory with manifest.csv");
        cmd.add_option("--out", out, "output directory");
        cmd.add_option("--pipeline", pipeline, "ss-olhf | ss-hf | s-ffl | s-fflhf | ori-multicrop");
        cmd.add_option("--architecture", architecture, "CNN preset");
        cmd.add_option("--folds", folds, "cross-validation folds");
        cmd.add_option("--epochs", epochs, "maximum training epochs");
        cmd.add_option("--target-spacing", spacing, "isotropic resampling spacing in mm");
        cmd.add_flag("--quiet", quiet, "no progress output");
    }

    pipeline::ExperimentConfig resolve() const
    {
        pipeline::ExperimentConfig c = config.empty() ? pipeline::ExperimentConfig{} : pipeline::load_config(config);
        if (seed) {
            c.seed = *seed;
            c.train.seed = *seed;
        }
        if (workers)
            c.workers = std::max(1u, *workers);
        if (data) {
            c.data_dir = *data;
            c.manifest.clear();
        }
        if (out)
            c.output_dir = *out;
        if (pipeline)
            c.method = pipeline::method_from(*pipeline);
        if (architecture)
            c.architecture = *architecture;
        if (folds)
            c.folds = *folds;
        if (epochs)
            c.train.max_epochs = *epochs;
        if (spacing)
            c.target_spacing = *spacing;
        if (train_once)
            c.train_once = true;
        return c;
    }
};

int print_report(const std::string& path, const std::optional<std::string>& compare)
{
    auto load = [](const std::string& p) {
        std::ifstream in(p);
        if (!in)
            throw ValidationError("cannot open " + p);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(p + ": " + e.what());
        }
        return eval::report_from_json(j);
    };
    const auto a = load(path);
    fmt::print("pipeline {}  seed {}  folds {}\n", a.pipeline, a.seed, a.folds.size());
    fmt::print("{:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "fold", "AUC", "ACC", "SEN", "SPE", "ISO-ACC");
    for (const auto& f : a.folds)
        fmt::print("{:>6} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f}\n", f.fold, f.auc, f.at_zero.acc, f.at_zero.sen,
                   f.at_zero.spe, f.at_iso.acc);
    const auto agg = a.aggregate();
    fmt::print("{:>6} ", "mean");
    for (const char* m : {"auc", "acc", "sen", "spe", "iso_acc"})
        fmt::print("{:>8} ", fmt::format("{:.2f}±{:.2f}", 100 * agg.at(m).mean, 100 * agg.at(m).std));
    fmt::print("\n");
    if (compare) {
        const auto b = load(*compare);
        fmt::print("\nunpaired t-test {} vs {}\n", a.pipeline, b.pipeline);
        for (const char* m : {"auc", "acc", "sen", "spe"}) {
            const auto t = eval::t_test(a.values(m), b.values(m));
            fmt::print("  {:<4} t = {:>8.4f}  p = {:.4f}\n", m, t.t, t.p);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Lung nodule malignancy pipeline: radiomics + 3D CNN output-layer fusion"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic two-class nodule dataset");
    pipeline::SynthOptions synth_opt;
    std::string synth_out = "data";
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();
    synth->add_option("--count", synth_opt.count, "number of nodules")->capture_default_str();
    synth->add_option("--seed", synth_opt.seed, "random seed")->capture_default_str();
    synth->add_option("--malignant-fraction", synth_opt.malignant_fraction, "share of malignant nodules")
        ->capture_default_str();

    Overrides ex_o, tr_o, run_o;
    auto* extract = app.add_subcommand("extract-features", "write the handcrafted (or fusion) feature CSV");
    ex_o.attach(*extract);
    std::optional<std::string> model_path;
    extract->add_option("--model", model_path, "trained model; adds cnn_feature_p and cnn_feature_n");

    auto* train = app.add_subcommand("train-cnn", "train the configured CNN on every nodule");
    tr_o.attach(*train);

    auto* run = app.add_subcommand("run", "cross-validated run of the configured pipeline");
    run_o.attach(*run);
    run->add_flag("--train-once", run_o.train_once,
                  "train one CNN on all nodules before CV (test folds leak into the CNN)");

    auto* report = app.add_subcommand("report", "summarize a metrics.json");
    std::string report_path;
    std::optional<std::string> compare_path;
    report->add_option("metrics", report_path, "metrics.json from `run`")->required();
    report->add_option("--compare", compare_path, "second metrics.json for an unpaired t-test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) {
            pipeline::synth(synth_out, synth_opt);
            fmt::print("{}\n", (fs::path(synth_out) / "manifest.csv").string());
        } else if (extract->parsed()) {
            set_quiet(ex_o.quiet);
            const auto cfg = ex_o.resolve();
            std::optional<fs::path> m;
            if (model_path)
                m = *model_path;
            fmt::print("{}\n", pipeline::extract_features(cfg, m).string());
        } else if (train->parsed()) {
            set_quiet(tr_o.quiet);
            fmt::print("{}\n", pipeline::train_cnn(tr_o.resolve()).string());
        } else if (run->parsed()) {
            set_quiet(run_o.quiet);
            const auto out = pipeline::run_experiment(run_o.resolve());
            fmt::print("{}\n", (out.dir / "metrics.json").string());
        } else if (report->parsed()) {
            return print_report(report_path, compare_path);
        }
    } catch (const ValidationError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
