#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedevo/gaussian.hpp"
#include "fedevo/stats.hpp"

namespace fedevo {

struct Dataset {
    Matrix X;  // n x D, one sample per row
    std::optional<std::vector<int>> y;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::size_t dropped_rows = 0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
    [[nodiscard]] Eigen::Index dim() const { return X.cols(); }
    [[nodiscard]] int n_classes() const { return static_cast<int>(class_names.size()); }
    [[nodiscard]] Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Column selector: by header name or zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

/// Parses a comma-separated file. Numeric columns are read as-is, any column
/// holding a non-numeric value is one-hot encoded in order of first
/// appearance, and the label column is factorized the same way. Rows with an
/// empty, "?" or "NA" cell are dropped (counted in dropped_rows).
Dataset load_csv(const std::filesystem::path& path, bool has_header = true,
                 std::optional<ColumnRef> label_column = std::nullopt);

Dataset parse_csv(const std::string& text, bool has_header = true, std::optional<ColumnRef> label_column = std::nullopt);

/// Per-feature affine map (x - mean) / std with zero-variance features removed.
struct Standardizer {
    Eigen::Index input_dim = 0;
    std::vector<Eigen::Index> kept;
    Vector mean;   // over kept features
    Vector scale;  // sample std (n - 1 denominator), kept features

    [[nodiscard]] Eigen::Index output_dim() const { return static_cast<Eigen::Index>(kept.size()); }
    [[nodiscard]] Matrix apply(const Eigen::Ref<const Matrix>& X) const;
    [[nodiscard]] Vector apply_one(const Vector& x) const;
    /// Summary statistics as seen after the transform.
    [[nodiscard]] StatsSummary transform(const StatsSummary& s) const;
};

/// Fits from summary statistics; constant features are dropped with a warning.
/// Throws InvalidArgument when every feature is constant.
Standardizer fit_standardizer(const StatsSummary& stats);

Matrix zscore(const Eigen::Ref<const Matrix>& X, const StatsSummary& stats);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// K folds, stratified by label when labels are given and every class has at
/// least K members (otherwise unstratified, with a warning).
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed,
                              const std::vector<int>* labels = nullptr);

std::string fnv1a64_hex(const std::string& bytes);

/// Dataset entry from data/manifest.json.
struct ManifestEntry {
    std::string name;
    std::filesystem::path path;
    std::string label_column;
    std::string checksum;
    std::string kind;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest_path);

/// Loads a bundled dataset by name after verifying its checksum.
Dataset load_bundled(const std::filesystem::path& data_dir, const std::string& name);

/// Per-dataset settings from data/defaults.json (found by grid search).
struct TunedDefaults {
    std::optional<double> n_r, kappa_m, kappa_v, kappa_f;
    std::optional<std::int64_t> kappa_n;
};

/// Entry for `name`, or nullopt when the table or the entry is missing.
std::optional<TunedDefaults> read_tuned_defaults(const std::filesystem::path& data_dir, const std::string& name);

}  // namespace fedevo
