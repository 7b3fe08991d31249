#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bottleneck/grid.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

inline constexpr double kStdFloor = 1e-8;

/// Features, labels, split and the training-split statistics used for
/// standardization and masking. Immutable once finalized.
struct Dataset {
  Eigen::MatrixXd raw;       // k x n, as generated or loaded
  Eigen::MatrixXd features;  // k x n, standardized with training-split statistics
  std::vector<int> labels;
  int classes = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  Eigen::VectorXd mean;      // training-split mean of raw features
  Eigen::VectorXd stddev;    // training-split std of raw features (floored)
  Eigen::VectorXd baseline;  // training-split mean of standardized features
  std::vector<int> train_indices;
  std::vector<int> test_indices;
  std::optional<GridSpec> grid;
  std::optional<double> reference_accuracy;
  nlohmann::json provenance;
  std::vector<std::string> warnings;

  int n() const { return static_cast<int>(raw.cols()); }
  int size() const { return static_cast<int>(raw.rows()); }
  std::vector<double> sample(int k) const;
  std::vector<double> baseline_vector() const;

  /// Columns = the selected samples (standardized), for batched model calls.
  Eigen::MatrixXd batch(std::span<const int> indices) const;

  /// SHA-256 over raw values and labels.
  std::string digest() const;
  /// Provenance, split seed, baseline and standardization constants.
  nlohmann::json manifest() const;
};

/// Splits with a seeded shuffle, computes training statistics, standardizes
/// every row and sets the baseline. Constant columns get std 1e-8 and a warning.
void finalize_dataset(Dataset& data, std::uint64_t split_seed, double train_fraction = 0.8);

/// Mixture weights for the synthetic tabular rule. Class scores combine a
/// linear part, random pairwise products, and a high-order part built from
/// sums over many features; the label is the top-scoring class, then flipped
/// to another class with probability label_noise.
struct TabularSignal {
  double linear = 1.0;
  double pairwise = 1.0;
  double high_order = 1.0;
  int pair_terms = 8;
  double label_noise = 0.0;

  nlohmann::json to_json() const;
  static TabularSignal from_json(const nlohmann::json& j);
};

Dataset gen_tabular(int n, int classes, int samples, std::uint64_t seed, const TabularSignal& signal = {});

/// Four fixed shape templates on a square grid with an even side, drawn inside
/// the boundary ring so the outer ring carries texture only: a horizontal band
/// through the middle rows, a vertical band through the middle columns, the
/// hollow square at ring side/4, and both diagonals. On an 8x8 grid each has 12
/// cells. A sample is amplitude * template plus i.i.d. Gaussian texture noise.
struct GridSignal {
  double amplitude = 1.0;
  double texture_noise = 1.0;

  nlohmann::json to_json() const;
  static GridSignal from_json(const nlohmann::json& j);
};

std::vector<std::vector<double>> grid_templates(const GridSpec& grid, int classes);

Dataset gen_grid(const GridSpec& grid, int classes, int samples, std::uint64_t seed, const GridSignal& signal = {});

/// Header row required; `label_column` names the categorical label column and
/// every other column must be numeric. Labels are numbered in sorted order of
/// their distinct values.
Dataset load_csv(const std::string& path, const std::string& label_column, std::uint64_t split_seed = 0,
                 double train_fraction = 0.8);
Dataset read_csv(std::istream& in, const std::string& label_column, std::uint64_t split_seed = 0,
                 double train_fraction = 0.8, const std::string& source = "<stream>");
/// Raw features plus a trailing "label" column of class names.
void write_csv(const Dataset& data, std::ostream& out);

/// Cells masked by the surrounding scheme, boundary ring first, ties by
/// row-major index.
std::vector<int> surround_order(const GridSpec& grid);

/// Replaces m uniformly chosen variables by the baseline.
std::vector<double> mask_random(std::span<const double> x, int m, Rng& rng, std::span<const double> baseline);
/// Replaces the first m cells of surround_order by the baseline.
std::vector<double> mask_surround(std::span<const double> x, int m, const GridSpec& grid, std::span<const double> baseline);

}  // namespace bottleneck
