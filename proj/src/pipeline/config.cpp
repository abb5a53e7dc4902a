#include "nodfuse/pipeline/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "nodfuse/error.hpp"
#include "nodfuse/neural/architecture.hpp"

namespace nodfuse::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::pair<Method, const char*> kMethods[] = {
    {Method::ss_olhf, "ss-olhf"}, {Method::ss_hf, "ss-hf"}, {Method::s_ffl, "s-ffl"},
    {Method::s_fflhf, "s-fflhf"}, {Method::ori_multicrop, "ori-multicrop"},
};

ingest::Shape3 shape_from(const json& j, const char* what)
{
    const auto v = j.get<std::vector<int>>();
    if (v.size() != 3 || v[0] < 1 || v[1] < 1 || v[2] < 1)
        throw ValidationError(fmt::format("{} must be three positive integers", what));
    return {v[0], v[1], v[2]};
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw ValidationError(fmt::format("unknown config key '{}{}'", where, key));
}

} // namespace

Method method_from(const std::string& name)
{
    for (const auto& [m, n] : kMethods)
        if (name == n)
            return m;
    throw ValidationError("unknown pipeline '" + name + "' (valid: ss-olhf, ss-hf, s-ffl, s-fflhf, ori-multicrop)");
}

std::string method_name(Method m)
{
    for (const auto& [k, n] : kMethods)
        if (k == m)
            return n;
    return "?";
}

bool needs_cnn(Method m) { return m != Method::ss_hf; }

learn::SfsConfig ExperimentConfig::sfs(std::uint64_t s) const
{
    learn::SfsConfig c;
    c.threshold = sfs_threshold;
    c.svm.C = svm_C;
    c.svm.gamma = svm_gamma;
    c.smote = smote;
    c.smote_k = smote_k;
    c.seed = s;
    c.workers = workers;
    return c;
}

void ExperimentConfig::validate(bool check_paths) const
{
    if (!(target_spacing > 0))
        throw ValidationError("target_spacing_mm must be > 0");
    if (folds < 2)
        throw ValidationError("eval.folds must be >= 2");
    if (!(svm_C > 0))
        throw ValidationError("learn.C must be > 0");
    if (svm_gamma && !(*svm_gamma > 0))
        throw ValidationError("learn.gamma must be > 0");
    if (cross_fit_folds == 1 || cross_fit_folds < 0)
        throw ValidationError("train.cross_fit_folds must be 0 or >= 2");
    if (smote_k < 1 || relieff_k < 1)
        throw ValidationError("learn.smote_k and learn.relieff_k must be >= 1");
    if (needs_cnn(method)) {
        if (architecture.empty())
            throw ValidationError("pipeline " + method_name(method) + " needs an architecture");
        neural::preset(architecture);
        train.validate();
    }
    if (check_paths) {
        if (!fs::is_directory(data_dir))
            throw ValidationError("data directory does not exist: " + data_dir.string());
        if (!fs::is_regular_file(manifest_path()))
            throw ValidationError("manifest does not exist: " + manifest_path().string());
    }
}

ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    try {
        reject_unknown(j,
                       {"data_dir", "manifest", "target_spacing_mm", "tensor_shape", "patch_shape", "pipeline",
                        "architecture", "train", "learn", "eval", "train_once", "output_dir", "workers"},
                       "");
        if (j.contains("data_dir"))
            c.data_dir = j["data_dir"].get<std::string>();
        if (j.contains("manifest"))
            c.manifest = j["manifest"].get<std::string>();
        c.target_spacing = j.value("target_spacing_mm", c.target_spacing);
        if (j.contains("tensor_shape") && !(j["tensor_shape"].is_string() && j["tensor_shape"] == "auto"))
            c.tensor_shape = shape_from(j["tensor_shape"], "tensor_shape");
        if (j.contains("patch_shape"))
            c.patch_shape = shape_from(j["patch_shape"], "patch_shape");
        if (j.contains("pipeline"))
            c.method = method_from(j["pipeline"].get<std::string>());
        c.architecture = j.value("architecture", c.architecture);
        c.train_once = j.value("train_once", c.train_once);
        if (j.contains("output_dir"))
            c.output_dir = j["output_dir"].get<std::string>();
        c.workers = j.value("workers", c.workers);
        if (j.contains("train")) {
            const auto& t = j["train"];
            reject_unknown(t,
                           {"batch_size", "schedule", "stop_loss", "max_epochs", "keep_prob", "beta1", "beta2",
                            "epsilon", "augment", "cross_fit_folds"},
                           "train.");
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            if (t.contains("schedule")) {
                c.train.schedule.clear();
                for (const auto& s : t["schedule"])
                    c.train.schedule.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
            }
            c.train.stop_loss = t.value("stop_loss", c.train.stop_loss);
            c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
            c.train.keep_prob = t.value("keep_prob", c.train.keep_prob);
            c.train.beta1 = t.value("beta1", c.train.beta1);
            c.train.beta2 = t.value("beta2", c.train.beta2);
            c.train.epsilon = t.value("epsilon", c.train.epsilon);
            c.augment = t.value("augment", c.augment);
            c.cross_fit_folds = t.value("cross_fit_folds", c.cross_fit_folds);
        }
        if (j.contains("learn")) {
            const auto& l = j["learn"];
            reject_unknown(l,
                           {"C", "gamma", "grid_search", "sfs_threshold", "smote", "smote_k", "relieff_k", "relieff_m",
                            "relieff_top"},
                           "learn.");
            c.svm_C = l.value("C", c.svm_C);
            if (l.contains("gamma") && !l["gamma"].is_null())
                c.svm_gamma = l["gamma"].get<double>();
            c.svm_grid = l.value("grid_search", c.svm_grid);
            c.sfs_threshold = l.value("sfs_threshold", c.sfs_threshold);
            c.smote = l.value("smote", c.smote);
            c.smote_k = l.value("smote_k", c.smote_k);
            c.relieff_k = l.value("relieff_k", c.relieff_k);
            c.relieff_m = l.value("relieff_m", c.relieff_m);
            if (l.contains("relieff_top") && !l["relieff_top"].is_null())
                c.relieff_top = l["relieff_top"].get<std::size_t>();
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            reject_unknown(e, {"folds", "seed"}, "eval.");
            c.folds = e.value("folds", c.folds);
            c.seed = e.value("seed", c.seed);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.train.seed = c.seed;
    return c;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    auto c = config_from_json(j);
    // Relative data paths are relative to the config file.
    const auto base = path.parent_path();
    if (c.data_dir.is_relative())
        c.data_dir = base / c.data_dir;
    if (!c.manifest.empty() && c.manifest.is_relative())
        c.manifest = base / c.manifest;
    return c;
}

json to_json(const ExperimentConfig& c)
{
    json schedule = json::array();
    for (const auto& s : c.train.schedule)
        schedule.push_back({s.first_epoch, s.rate});
    json j{
        {"data_dir", c.data_dir.generic_string()},
        {"manifest", c.manifest_path().generic_string()},
        {"target_spacing_mm", c.target_spacing},
        {"patch_shape", {c.patch_shape.x, c.patch_shape.y, c.patch_shape.z}},
        {"pipeline", method_name(c.method)},
        {"architecture", c.architecture},
        {"train_once", c.train_once},
        {"train",
         {{"batch_size", c.train.batch_size},
          {"schedule", schedule},
          {"stop_loss", c.train.stop_loss},
          {"max_epochs", c.train.max_epochs},
          {"keep_prob", c.train.keep_prob},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"epsilon", c.train.epsilon},
          {"augment", c.augment},
          {"cross_fit_folds", c.cross_fit_folds}}},
        {"learn",
         {{"C", c.svm_C},
          {"gamma", c.svm_gamma ? json(*c.svm_gamma) : json(nullptr)},
          {"grid_search", c.svm_grid},
          {"sfs_threshold", c.sfs_threshold},
          {"smote", c.smote},
          {"smote_k", c.smote_k},
          {"relieff_k", c.relieff_k},
          {"relieff_m", c.relieff_m},
          {"relieff_top", c.relieff_top ? json(*c.relieff_top) : json(nullptr)}}},
        {"eval", {{"folds", c.folds}, {"seed", c.seed}}},
    };
    if (c.tensor_shape)
        j["tensor_shape"] = {c.tensor_shape->x, c.tensor_shape->y, c.tensor_shape->z};
    else
        j["tensor_shape"] = "auto";
    return j;
}

std::string config_hash(const ExperimentConfig& c)
{
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

fs::path artifact_dir(const ExperimentConfig& c) { return c.output_dir / config_hash(c); }

} // namespace nodfuse::pipeline
