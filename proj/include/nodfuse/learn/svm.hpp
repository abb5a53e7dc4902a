#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nodfuse/learn/feature_table.hpp"

namespace nodfuse::learn {

struct SvmParams {
    double C = 1.0;
    /// Unset: 1 / (median pairwise squared distance of standardized rows).
    /// Duplicating columns leaves this kernel unchanged.
    std::optional<double> gamma;
    bool standardize = true;
    /// Stop once the maximal violating pair gap is below this. Well inside
    /// the 1e-3 KKT tolerance so dual objectives are accurate too.
    double tolerance = 1e-6;
    long max_iterations = 10'000'000;
};

/// RBF soft-margin SVM. Labels are mapped 1 -> +1, 0 -> -1.
struct SvmModel {
    double C = 1;
    double gamma = 1;
    std::vector<double> mean;  // per feature; empty when not standardizing
    std::vector<double> scale; // population std, 1 for constant columns
    std::size_t dims = 0;
    std::vector<double> support; // standardized support vectors, row-major
    std::vector<double> coef;    // alpha_i * y_i
    double bias = 0;

    std::size_t support_count() const { return coef.size(); }
    /// Decision value sum coef_i * exp(-gamma |s_i - z(x)|^2) + bias.
    double score(std::span<const double> x) const;
    std::vector<double> score(const FeatureTable& rows) const;
};

struct SvmFit {
    SvmModel model;
    std::vector<double> alpha; // one per training row
    double dual_objective = 0; // sum alpha - 1/2 alpha' Q alpha, maximized
    long iterations = 0;
    double max_kkt_violation = 0;
};

SvmFit svm_fit(const FeatureTable& rows, const SvmParams& params = {});
SvmModel svm_train(const FeatureTable& rows, const SvmParams& params = {});
double svm_score(const SvmModel& m, std::span<const double> x);

/// z-score statistics (population std, constant columns scale 1).
void standardization(const FeatureTable& rows, std::vector<double>& mean, std::vector<double>& scale);
double default_gamma(const FeatureTable& rows, std::span<const double> mean, std::span<const double> scale);

/// JSON header {C, gamma, dims, support_count, bias, mean, scale} followed by
/// little-endian f64 support vectors then coefficients.
void save_svm(const std::filesystem::path& path, const SvmModel& m);
SvmModel load_svm(const std::filesystem::path& path);

} // namespace nodfuse::learn
