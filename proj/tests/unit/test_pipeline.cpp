#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"
#include "nodfuse/learn/feature_table.hpp"
#include "nodfuse/log.hpp"
#include "nodfuse/pipeline/config.hpp"
#include "nodfuse/pipeline/dataset.hpp"
#include "nodfuse/pipeline/experiment.hpp"

using namespace nodfuse;
using namespace nodfuse::pipeline;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("nodfuse_test_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config(const fs::path& root)
{
    ExperimentConfig c;
    c.data_dir = root / "data";
    c.output_dir = root / "out";
    c.target_spacing = 1.0;
    c.tensor_shape = ingest::Shape3{16, 16, 16};
    c.method = Method::ss_hf;
    c.train.max_epochs = 2;
    c.train.batch_size = 10;
    c.cross_fit_folds = 2;
    c.folds = 3;
    c.seed = 5;
    return c;
}

int cli(const std::string& args)
{
    const int rc = std::system((std::string(NODFUSE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("config json round trip and hash")
{
    ExperimentConfig c;
    c.seed = 3;
    c.method = Method::s_fflhf;
    c.tensor_shape = ingest::Shape3{16, 16, 16};
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 16);

    ExperimentConfig w = c;
    w.workers = 8;
    w.output_dir = "elsewhere";
    CHECK(config_hash(w) == config_hash(c));
    ExperimentConfig s = c;
    s.seed = 4;
    CHECK(config_hash(s) != config_hash(c));

    auto j = to_json(c);
    j["bogus"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ValidationError);
    CHECK_THROWS_AS(method_from("ss-xx"), ValidationError);
    CHECK(method_name(method_from("ori-multicrop")) == "ori-multicrop");
}

TEST_CASE("config validation")
{
    ExperimentConfig c;
    c.folds = 1;
    CHECK_THROWS_AS(c.validate(false), ValidationError);
    c.folds = 5;
    c.cross_fit_folds = 1;
    CHECK_THROWS_AS(c.validate(false), ValidationError);
    c.cross_fit_folds = 0;
    c.architecture = "resnet";
    try {
        c.validate(false);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("multicrop3d_toy") != std::string::npos);
    }
}

TEST_CASE("synthetic data is deterministic and separable by intensity spread")
{
    const auto a = scratch("synth_a"), b = scratch("synth_b");
    synth(a, {40, 9, 0.35});
    synth(b, {40, 9, 0.35});
    CHECK(slurp(a / "manifest.csv") == slurp(b / "manifest.csv"));
    const auto d = load_dataset(a, a / "manifest.csv", 1.0);
    REQUIRE(d.ids.size() == 40);
    double vol[2] = {0, 0};
    int n[2] = {0, 0};
    for (std::size_t i = 0; i < d.ids.size(); ++i) {
        std::size_t count = 0;
        for (auto m : d.volumes[i].mask())
            count += m;
        vol[d.labels[i]] += double(count);
        ++n[d.labels[i]];
    }
    REQUIRE(n[0] > 0);
    REQUIRE(n[1] > 0);
    CHECK(vol[1] / n[1] > vol[0] / n[0]);
}

TEST_CASE("missing data is a validation error")
{
    const auto root = scratch("missing");
    auto c = small_config(root);
    CHECK_THROWS_AS(run_experiment(c), ValidationError);
}

TEST_CASE("extract features and cross-validated runs")
{
    set_quiet(true);
    const auto root = scratch("run");
    synth(root / "data", {30, 2, 0.4});
    auto c = small_config(root);

    const auto hc = learn::read_feature_csv(extract_features(c));
    CHECK(hc.rows() == 30);
    CHECK(hc.cols() == 29);

    const auto first = run_experiment(c);
    CHECK(first.report.folds.size() == 3);
    CHECK(!fs::exists(first.dir / "fold_0" / "model.bin"));
    CHECK(!fs::exists(first.dir / "fold_0" / "cross_fit_0"));
    CHECK(fs::exists(first.dir / "fold_0" / "selection.json"));
    const std::string metrics = slurp(first.dir / "metrics.json");
    const std::string features = slurp(first.dir / "features_handcrafted.csv");
    const auto again = run_experiment(c);
    CHECK(slurp(again.dir / "metrics.json") == metrics);
    CHECK(slurp(again.dir / "features_handcrafted.csv") == features);

    auto olhf = c;
    olhf.method = Method::ss_olhf;
    const auto fused = run_experiment(olhf);
    CHECK(fused.folds == first.folds);
    CHECK(fused.dir != first.dir);
    CHECK(fs::exists(fused.dir / "fold_0" / "model.bin"));
    CHECK(fs::exists(fused.dir / "fold_0" / "training_log.csv"));
    CHECK(fs::exists(fused.dir / "fold_0" / "cross_fit_1" / "model.bin"));
    const auto table = learn::read_feature_csv(fused.dir / "fold_0" / "features.csv");
    CHECK(table.cols() == 31);
    CHECK(table.names().back() == "cnn_feature_n");

    const auto model = train_cnn(olhf);
    const auto fusion = learn::read_feature_csv(extract_features(c, model));
    CHECK(fusion.cols() == 31);
    set_quiet(false);
}

TEST_CASE("command line exit codes")
{
    const auto root = scratch("cli");
    CHECK(cli("synth --out " + (root / "data").string() + " --count 12 --seed 1") == 0);
    CHECK(fs::exists(root / "data" / "manifest.csv"));
    CHECK(cli("frobnicate") == 2);
    CHECK(cli("run --data " + (root / "nowhere").string()) == 2);
    CHECK(cli("run --data " + (root / "data").string() + " --architecture resnet") == 2);
    CHECK(cli("report " + (root / "absent.json").string()) != 0);
}
