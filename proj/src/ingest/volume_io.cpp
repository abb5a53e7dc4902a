#include "nodfuse/ingest/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nodfuse/error.hpp"

namespace nodfuse::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<char> slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& path, const void* data, std::size_t bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out)
        throw ComputeError("short write to " + path.string());
}

std::uint32_t to_le(std::uint32_t v)
{
    if constexpr (std::endian::native == std::endian::big)
        v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

} // namespace

void write_volume(const fs::path& dir, const std::string& id, const Volume& v)
{
    fs::create_directories(dir);
    const auto& d = v.dims();
    const auto& s = v.spacing();
    json header = {{"dims", {d.nx, d.ny, d.nz}},
                   {"spacing_mm", {s.sx, s.sy, s.sz}},
                   {"dtype", "f32"},
                   {"order", "x-fastest"}};
    const std::string text = header.dump() + "\n";
    spit(dir / (id + ".vol.json"), text.data(), text.size());

    std::vector<std::uint32_t> words(v.voxels().size());
    for (std::size_t i = 0; i < words.size(); ++i)
        words[i] = to_le(std::bit_cast<std::uint32_t>(v.voxels()[i]));
    spit(dir / (id + ".vol.raw"), words.data(), words.size() * 4);
    spit(dir / (id + ".mask.raw"), v.mask().data(), v.mask().size());
}

Volume read_volume(const fs::path& dir, const std::string& id)
{
    const auto header_path = dir / (id + ".vol.json");
    const auto raw = slurp(header_path);
    json header;
    try {
        header = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        throw ValidationError(header_path.string() + ": " + e.what());
    }
    if (header.value("dtype", "") != "f32" || header.value("order", "") != "x-fastest")
        throw ValidationError(header_path.string() + ": expected dtype f32 and order x-fastest");
    Dims dims;
    Spacing spacing;
    try {
        auto dv = header.at("dims").get<std::vector<int>>();
        auto sv = header.at("spacing_mm").get<std::vector<double>>();
        if (dv.size() != 3 || sv.size() != 3)
            throw ValidationError(header_path.string() + ": dims and spacing_mm need 3 entries");
        dims = {dv[0], dv[1], dv[2]};
        spacing = {sv[0], sv[1], sv[2]};
    } catch (const json::exception& e) {
        throw ValidationError(header_path.string() + ": " + e.what());
    }
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw ValidationError(header_path.string() + ": dims must be positive");

    const auto vox_bytes = slurp(dir / (id + ".vol.raw"));
    const auto mask_bytes = slurp(dir / (id + ".mask.raw"));
    if (vox_bytes.size() != dims.count() * 4)
        throw ValidationError(id + ".vol.raw: expected " + std::to_string(dims.count() * 4) + " bytes");
    if (mask_bytes.size() != dims.count())
        throw ValidationError(id + ".mask.raw: expected " + std::to_string(dims.count()) + " bytes");

    std::vector<float> voxels(dims.count());
    for (std::size_t i = 0; i < voxels.size(); ++i) {
        std::uint32_t w;
        std::memcpy(&w, vox_bytes.data() + 4 * i, 4);
        voxels[i] = std::bit_cast<float>(to_le(w));
    }
    std::vector<std::uint8_t> mask(mask_bytes.begin(), mask_bytes.end());
    try {
        return Volume(dims, spacing, std::move(voxels), std::move(mask));
    } catch (const ValidationError& e) {
        throw ValidationError(id + ": " + e.what());
    }
}

std::vector<LabeledId> read_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open manifest " + path.string());
    std::vector<LabeledId> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line_no == 1 && line.rfind("id,", 0) == 0)
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected id,label");
        const std::string label = line.substr(comma + 1);
        if (label != "0" && label != "1")
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
        rows.push_back({line.substr(0, comma), label == "1" ? 1 : 0});
    }
    return rows;
}

void write_manifest(const fs::path& path, const std::vector<LabeledId>& rows)
{
    std::ostringstream out;
    out << "id,label\n";
    for (const auto& r : rows)
        out << r.id << ',' << r.label << '\n';
    const auto text = out.str();
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    spit(path, text.data(), text.size());
}

} // namespace nodfuse::ingest
