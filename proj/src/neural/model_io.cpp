#include "nodfuse/neural/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"

namespace nodfuse::neural {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'N', 'D', 'F', 'S', 'C', 'N', 'N', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class U>
U to_le(U v)
{
    if constexpr (std::endian::native == std::endian::big) {
        U out = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            out = (out << 8) | ((v >> (8 * i)) & 0xff);
        return out;
    }
    return v;
}

template <class U>
void put(std::ostream& out, U v)
{
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
U get(std::istream& in, const fs::path& path)
{
    U v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw ValidationError(path.string() + ": truncated model file");
    return to_le(v);
}

} // namespace

void save_model(const fs::path& path, const TrainedNetwork& model)
{
    const auto& net = model.net;
    json counts = json::array();
    for (std::size_t i = 0; i < net.layer_count(); ++i)
        counts.push_back(net.layer(i).params().size());
    json log = json::array();
    for (const auto& e : model.log)
        log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"lr", e.lr}});
    const std::string header =
        json{{"architecture", to_json(net.spec())}, {"parameters", counts}, {"log", log}, {"diverged", model.diverged}}
            .dump();

    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write model " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), std::streamsize(header.size()));
    for (std::size_t i = 0; i < net.layer_count(); ++i)
        for (float p : net.layer(i).params())
            put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(p));
    if (!out)
        throw ComputeError("short write to " + path.string());
}

TrainedNetwork load_model(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open model " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw ValidationError(path.string() + ": not a model file");
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion)
        throw ValidationError(path.string() + ": unsupported model version " + std::to_string(version));
    const auto len = get<std::uint64_t>(in, path);
    std::string text(len, '\0');
    if (!in.read(text.data(), std::streamsize(len)))
        throw ValidationError(path.string() + ": truncated header");
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    TrainedNetwork model{Network<float>(spec_from_json(header.at("architecture")), 0), {}, false};
    for (const auto& e : header.value("log", json::array()))
        model.log.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(), e.at("lr").get<double>()});
    model.diverged = header.value("diverged", false);
    const auto counts = header.at("parameters").get<std::vector<std::size_t>>();
    if (counts.size() != model.net.layer_count())
        throw ValidationError(path.string() + ": layer count mismatch");
    for (std::size_t i = 0; i < model.net.layer_count(); ++i) {
        auto p = model.net.layer(i).params();
        if (p.size() != counts[i])
            throw ValidationError(path.string() + ": parameter count mismatch at layer " + std::to_string(i));
        for (auto& x : p)
            x = std::bit_cast<float>(get<std::uint32_t>(in, path));
    }
    return model;
}

void write_training_log(const fs::path& path, const std::vector<EpochRecord>& log)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out << "epoch,loss,lr\n";
    for (const auto& e : log)
        out << fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.loss, e.lr);
}

} // namespace nodfuse::neural
