#include "nodfuse/learn/feature_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "nodfuse/error.hpp"

namespace nodfuse::learn {

FeatureTable::FeatureTable(std::vector<std::string> names) : names_(std::move(names)) {}

void FeatureTable::add_row(std::string id, int label, std::span<const double> values)
{
    if (values.size() != cols())
        throw ValidationError(fmt::format("row {} has {} values, expected {}", id, values.size(), cols()));
    if (label != 0 && label != 1)
        throw ValidationError(fmt::format("row {} has label {}, expected 0 or 1", id, label));
    ids_.push_back(std::move(id));
    labels_.push_back(label);
    values_.insert(values_.end(), values.begin(), values.end());
}

std::vector<double> FeatureTable::column(std::size_t c) const
{
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r)
        out[r] = at(r, c);
    return out;
}

std::size_t FeatureTable::column_index(const std::string& name) const
{
    for (std::size_t c = 0; c < names_.size(); ++c)
        if (names_[c] == name)
            return c;
    throw ValidationError("no feature column named '" + name + "'");
}

FeatureTable FeatureTable::select_rows(std::span<const std::size_t> rows) const
{
    FeatureTable out(names_);
    for (std::size_t r : rows)
        out.add_row(ids_.at(r), labels_[r], row(r));
    return out;
}

FeatureTable FeatureTable::select_columns(std::span<const std::size_t> cols) const
{
    std::vector<std::string> names;
    for (std::size_t c : cols)
        names.push_back(names_.at(c));
    FeatureTable out(std::move(names));
    std::vector<double> buf(cols.size());
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t k = 0; k < cols.size(); ++k)
            buf[k] = at(r, cols[k]);
        out.add_row(ids_[r], labels_[r], buf);
    }
    return out;
}

FeatureTable FeatureTable::join(const FeatureTable& other) const
{
    if (other.rows() != rows())
        throw ValidationError("cannot join feature tables with different row counts");
    auto names = names_;
    names.insert(names.end(), other.names_.begin(), other.names_.end());
    FeatureTable out(std::move(names));
    std::vector<double> buf;
    for (std::size_t r = 0; r < rows(); ++r) {
        if (ids_[r] != other.ids_[r])
            throw ValidationError("feature tables disagree on row " + std::to_string(r) + ": " + ids_[r] + " vs "
                                  + other.ids_[r]);
        buf.assign(row(r).begin(), row(r).end());
        buf.insert(buf.end(), other.row(r).begin(), other.row(r).end());
        out.add_row(ids_[r], labels_[r], buf);
    }
    return out;
}

std::size_t FeatureTable::count(int label) const
{
    std::size_t n = 0;
    for (int l : labels_)
        n += l == label;
    return n;
}

void FeatureTable::check_finite() const
{
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t c = 0; c < cols(); ++c)
            if (!std::isfinite(at(r, c)))
                throw ValidationError(fmt::format("non-finite value at row {} ({}), column {} ({})", r, ids_[r], c,
                                                  names_[c]));
}

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw ComputeError("cannot write " + path.string());
    out << "id,label";
    for (const auto& n : table.names())
        out << ',' << n;
    out << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        std::string line = fmt::format("{},{}", table.id(r), table.label(r));
        for (double v : table.row(r))
            line += fmt::format(",{:.17g}", v);
        out << line << '\n';
    }
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

FeatureTable read_feature_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open feature table " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path.string() + ": empty feature table");
    auto header = split(line);
    if (header.size() < 2 || header[0] != "id" || header[1] != "label")
        throw ValidationError(path.string() + ": header must start with id,label");
    FeatureTable table(std::vector<std::string>(header.begin() + 2, header.end()));
    std::vector<double> values(table.cols());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        auto cells = split(line);
        if (cells.size() != header.size())
            throw ValidationError(fmt::format("{}:{}: expected {} cells, got {}", path.string(), lineno, header.size(),
                                              cells.size()));
        for (std::size_t c = 0; c < values.size(); ++c) {
            const std::string& s = cells[c + 2];
            const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), values[c]);
            if (s.empty() || ec != std::errc{} || end != s.data() + s.size())
                throw ValidationError(fmt::format("{}:{}: bad number '{}'", path.string(), lineno, s));
        }
        int label = 0;
        const auto& ls = cells[1];
        if (std::from_chars(ls.data(), ls.data() + ls.size(), label).ec != std::errc{})
            throw ValidationError(fmt::format("{}:{}: bad label '{}'", path.string(), lineno, ls));
        table.add_row(cells[0], label, values);
    }
    return table;
}

} // namespace nodfuse::learn
