#include "nodfuse/pipeline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <fmt/format.h>

#include "nodfuse/error.hpp"
#include "nodfuse/ingest/resample.hpp"
#include "nodfuse/ingest/volume_io.hpp"
#include "nodfuse/parallel.hpp"
#include "nodfuse/radiomics/features.hpp"
#include "nodfuse/rng.hpp"

namespace nodfuse::pipeline {

namespace fs = std::filesystem;

namespace {

ingest::Volume synth_nodule(Rng& rng, bool malignant)
{
    const ingest::Dims dims{20, 20, 14};
    const ingest::Spacing sp{0.8, 0.8, 1.1};
    double a, b, c, mean, sd;
    if (malignant) {
        a = rng.uniform(3.4, 5.2);
        b = a * rng.uniform(0.6, 0.9);
        c = a * rng.uniform(0.6, 0.9);
        mean = 30;
        sd = 30;
    } else {
        a = rng.uniform(2.2, 3.4);
        b = a * rng.uniform(0.8, 1.0);
        c = a * rng.uniform(0.8, 1.0);
        mean = 50;
        sd = 8;
    }
    const double theta = rng.uniform(0, M_PI);
    const double cx = dims.nx * sp.sx / 2 + rng.uniform(-1, 1);
    const double cy = dims.ny * sp.sy / 2 + rng.uniform(-1, 1);
    const double cz = dims.nz * sp.sz / 2 + rng.uniform(-1, 1);
    const double ct = std::cos(theta), st = std::sin(theta);

    std::vector<float> vox(dims.count());
    std::vector<std::uint8_t> mask(dims.count());
    std::size_t i = 0;
    for (int z = 0; z < dims.nz; ++z)
        for (int y = 0; y < dims.ny; ++y)
            for (int x = 0; x < dims.nx; ++x, ++i) {
                const double px = x * sp.sx - cx, py = y * sp.sy - cy, pz = z * sp.sz - cz;
                const double u = ct * px + st * py, v = -st * px + ct * py;
                const bool inside = (u * u) / (a * a) + (v * v) / (b * b) + (pz * pz) / (c * c) <= 1.0;
                mask[i] = inside;
                vox[i] = float(inside ? mean + sd * rng.normal() : -750 + 25 * rng.normal());
            }
    return ingest::Volume(dims, sp, std::move(vox), std::move(mask));
}

} // namespace

void synth(const fs::path& dir, const SynthOptions& opt)
{
    if (opt.count < 2)
        throw ValidationError("synth: count must be >= 2");
    if (!(opt.malignant_fraction > 0 && opt.malignant_fraction < 1))
        throw ValidationError("synth: malignant fraction must be in (0, 1)");
    const Rng root(opt.seed);
    std::size_t n_pos = std::size_t(std::lround(double(opt.count) * opt.malignant_fraction));
    n_pos = std::clamp<std::size_t>(n_pos, 1, opt.count - 1);
    std::vector<int> labels(opt.count, 0);
    std::fill(labels.begin(), labels.begin() + std::ptrdiff_t(n_pos), 1);
    Rng order = root.derive(1);
    order.shuffle(std::span(labels));

    fs::create_directories(dir);
    std::vector<ingest::LabeledId> manifest;
    const int width = int(std::to_string(opt.count - 1).size());
    for (std::size_t k = 0; k < opt.count; ++k) {
        Rng rng = root.derive(1000 + k);
        const std::string id = fmt::format("nod{:0{}}", k, std::max(width, 3));
        ingest::write_volume(dir, id, synth_nodule(rng, labels[k] == 1));
        manifest.push_back({id, labels[k]});
    }
    ingest::write_manifest(dir / "manifest.csv", manifest);
}

Dataset load_dataset(const fs::path& data_dir, const fs::path& manifest, double target_spacing, unsigned workers)
{
    const auto rows = ingest::read_manifest(manifest);
    if (rows.empty())
        throw ValidationError("manifest has no rows: " + manifest.string());
    std::vector<std::optional<ingest::Volume>> vols(rows.size());
    std::vector<std::string> errors(rows.size());
    parallel_for(rows.size(), workers, [&](std::size_t i) {
        try {
            vols[i] = ingest::resample(ingest::read_volume(data_dir, rows[i].id), target_spacing);
        } catch (const std::exception& e) {
            errors[i] = fmt::format("{}: {}", rows[i].id, e.what());
        }
    });
    std::string all;
    std::size_t failed = 0;
    for (const auto& e : errors)
        if (!e.empty()) {
            all += "\n  " + e;
            ++failed;
        }
    if (failed)
        throw ValidationError(fmt::format("{} of {} nodules failed to load:{}", failed, rows.size(), all));
    Dataset d;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        d.ids.push_back(rows[i].id);
        d.labels.push_back(rows[i].label);
        d.volumes.push_back(std::move(*vols[i]));
    }
    return d;
}

learn::FeatureTable handcrafted_table(const Dataset& d, unsigned workers)
{
    std::vector<std::string> names;
    for (auto n : radiomics::handcrafted_names())
        names.emplace_back(n);
    std::vector<radiomics::FeatureVector> feats(d.volumes.size());
    parallel_for(d.volumes.size(), workers, [&](std::size_t i) { feats[i] = radiomics::handcrafted(d.volumes[i]); });
    learn::FeatureTable t(names);
    for (std::size_t i = 0; i < feats.size(); ++i)
        t.add_row(d.ids[i], d.labels[i], feats[i].values);
    t.check_finite();
    return t;
}

std::vector<ingest::NoduleTensor> build_tensors(const Dataset& d, ingest::Shape3 shape, ingest::TensorMode mode,
                                                unsigned workers)
{
    std::vector<ingest::NoduleTensor> out(d.volumes.size());
    parallel_for(d.volumes.size(), workers, [&](std::size_t i) {
        const auto label = d.labels[i] == 1 ? ingest::Label::malignant : ingest::Label::benign;
        try {
            out[i] = ingest::build_tensor(d.volumes[i], shape, mode, label, d.ids[i]);
        } catch (const ValidationError& e) {
            throw ValidationError(d.ids[i] + ": " + e.what());
        }
    });
    return out;
}

} // namespace nodfuse::pipeline
