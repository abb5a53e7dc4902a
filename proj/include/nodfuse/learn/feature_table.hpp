#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace nodfuse::learn {

/// Labeled rows of named real-valued features, stored row-major.
class FeatureTable {
public:
    FeatureTable() = default;
    explicit FeatureTable(std::vector<std::string> names);

    void add_row(std::string id, int label, std::span<const double> values);

    std::size_t rows() const { return ids_.size(); }
    std::size_t cols() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<int>& labels() const { return labels_; }
    int label(std::size_t r) const { return labels_[r]; }
    const std::string& id(std::size_t r) const { return ids_[r]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
    std::vector<double> column(std::size_t c) const;
    std::size_t column_index(const std::string& name) const;

    FeatureTable select_rows(std::span<const std::size_t> rows) const;
    FeatureTable select_columns(std::span<const std::size_t> cols) const;
    /// Column-wise concatenation; ids must match row by row.
    FeatureTable join(const FeatureTable& other) const;

    std::size_t count(int label) const;
    /// Throws ValidationError naming the first non-finite cell.
    void check_finite() const;

private:
    std::vector<std::string> names_;
    std::vector<std::string> ids_;
    std::vector<int> labels_;
    std::vector<double> values_;
};

/// CSV `id,label,<feature names...>`, values printed with 17 significant
/// digits so reads round-trip exactly.
void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable read_feature_csv(const std::filesystem::path& path);

} // namespace nodfuse::learn
