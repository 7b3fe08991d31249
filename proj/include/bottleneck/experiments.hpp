#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bottleneck/attack.hpp"
#include "bottleneck/dataset.hpp"
#include "bottleneck/mlp.hpp"
#include "bottleneck/order_profile.hpp"
#include "bottleneck/theory.hpp"
#include "bottleneck/train.hpp"

namespace bottleneck {

inline constexpr int kResultFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

/// A trained model plus the standardization it expects.
struct ModelBundle {
  Mlp model;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  Eigen::VectorXd baseline;
  nlohmann::json train_config;
  std::string data_digest;

  static ModelBundle from_training(Mlp model, const Dataset& data, const TrainConfig& config);
  nlohmann::json to_json() const;
  static ModelBundle from_json(const nlohmann::json& j);

  /// Re-standardizes `data` with this bundle's constants and baseline, so the
  /// model sees the same feature scale it was trained on.
  Dataset adapt(const Dataset& data) const;
};

struct TabularPreset {
  int n = 12;
  int classes = 2;
  int samples = 4000;
  TabularSignal signal{1.0, 1.0, 1.0, 8, 0.1};
};

struct GridPreset {
  int height = 8;
  int width = 8;
  int classes = 4;
  int samples = 6000;
  GridSignal signal{1.0, 0.7};
};

struct AttackPreset {
  double epsilon = 0.2;
  int steps = 50;
};

/// Everything the experiments read. Mirrors the JSON config file; CLI flags
/// override individual fields after loading.
struct HarnessConfig {
  TabularPreset tabular;
  GridPreset grid;
  TrainConfig train{4, 100, 30, 64, 0.01, 0.9, 0, 0.0, 0.0, {0.3, 0.7}, {0.0, 0.5}};
  TrainConfig grid_train{4, 100, 8, 64, 0.01, 0.9, 0, 0.0, 0.0, {0.3, 0.7}, {0.0, 0.5}};
  int seeds = 3;
  int max_samples = 100;
  int contexts = 100;
  int instability_repeats = 5;
  std::vector<AttackPreset> attacks{{0.6, 100}, {0.2, 50}};
  double attack_step_size = 0.01;
  bool attack_clamp = false;
  std::vector<int> robustness_layers{4, 7};
  int masking_steps = 8;
  int theorem1_n = 12;
  double theorem1_sigma = 1.0;
  std::uint64_t theorem1_trials = 100000;
  double fit_lower = 2.0;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a config error.
  static HarnessConfig from_json(const nlohmann::json& j);
  std::string digest() const;
};

/// One output table; cells are JSON numbers or strings.
struct Table {
  std::string name;  // file stem, may contain '/'
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

std::string table_csv(const Table& table);
nlohmann::json table_json(const Table& table);

struct ExperimentResult {
  std::string id;
  nlohmann::json config;
  nlohmann::json metrics;
  std::vector<Table> tables;
  std::string started;
  std::string finished;
  std::string tool_version = kToolVersion;

  /// Digest of {id, config, metrics}; timestamps excluded.
  std::string digest() const;
  nlohmann::json to_json() const;
};

enum class OutputFormat { Csv, Json };

/// Writes result.json and every table under `dir` atomically. Returns the
/// SHA-256 of each written table file keyed by its path relative to `dir`.
std::map<std::string, std::string> write_result(const ExperimentResult& result, const std::string& dir,
                                                OutputFormat format);

Table profile_table(const OrderProfile& profile, const std::string& name);

/// Correctly classified samples among `indices`, in order.
std::vector<int> correct_indices(const Mlp& model, const Dataset& data, std::span<const int> indices);

/// Profile over every order with exact interactions (each selected game is
/// tabulated once). Samples: up to max_samples correctly classified test samples.
OrderProfile exact_profile(const Mlp& model, const Dataset& data, int max_samples, std::uint64_t seed, int workers);

/// Repeated sampled profiles (all pairs, `contexts` contexts per estimate),
/// identical samples across repeats and independent context draws.
std::vector<OrderProfile> sampled_profiles(const Mlp& model, const Dataset& data, int max_samples, int contexts,
                                           int repeats, std::uint64_t seed, int workers);

/// Σ J over orders m with lo·n <= m <= hi·n.
double band_sum(const OrderProfile& profile, double lo, double hi);

/// J at round((n−2)/2) strictly below J at the two lowest and two highest orders.
bool bottleneck_shape(const OrderProfile& profile);

struct MaskingCurves {
  std::vector<int> m;
  std::vector<double> accuracy_random;
  std::vector<double> accuracy_surround;
  double area = 0.0;
};

/// Σ over consecutive m of the trapezoid of (surround − random).
double masking_area(const std::vector<int>& m, const std::vector<double>& random, const std::vector<double>& surround);

/// Accuracy curves on the test split; random masks are drawn per (seed, m, sample).
MaskingCurves masking_curves(const Mlp& model, const Dataset& data, const std::vector<int>& counts, std::uint64_t seed);

ExperimentResult exp_bottleneck(const HarnessConfig& config, std::uint64_t seed, int workers,
                                std::vector<OrderProfile>* final_profiles = nullptr);
ExperimentResult exp_order_control(const HarnessConfig& config, std::uint64_t seed, int workers);
ExperimentResult exp_robustness(const HarnessConfig& config, std::uint64_t seed, int workers);
ExperimentResult exp_masking(const HarnessConfig& config, std::uint64_t seed, int workers);
ExperimentResult exp_theory(const HarnessConfig& config, const std::vector<OrderProfile>& profiles, std::uint64_t seed,
                            int workers);
ExperimentResult exp_instability(const HarnessConfig& config, std::uint64_t seed, int workers);

/// Every experiment in turn, each under `out_dir/<id>`, then digests.json.
/// Returns the digests document.
nlohmann::json run_all(const HarnessConfig& config, std::uint64_t seed, int workers, const std::string& out_dir,
                       OutputFormat format);

std::string utc_timestamp();

}  // namespace bottleneck
