#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bottleneck/game.hpp"
#include "bottleneck/grid.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

struct PlanConfig {
  int n = 0;
  /// Number of candidate samples (games) available; ids are 0..available-1.
  int available_samples = 0;
  int max_samples = 100;
  /// Pairs drawn per sample; ignored when every pair is used (tabular n <= 12
  /// or all_pairs set).
  int pairs_per_sample = 200;
  bool all_pairs = false;
  /// Relative orders ρ in [0, 1]; empty means every order 0..n−2.
  std::vector<double> relative_orders;
  int contexts = 100;
  std::optional<GridSpec> grid;
  std::optional<int> radius;
};

/// Sampling plan for J^(m) estimation. Fully determined by (config, seed).
struct SamplingPlan {
  std::uint64_t seed = 0;
  int n = 0;
  std::vector<int> samples;
  std::vector<std::vector<std::pair<int, int>>> pairs;  // one list per entry of `samples`
  std::vector<double> relative_orders;                  // as configured (may be empty)
  std::vector<int> orders;                              // distinct integer orders, ascending
  int contexts = 0;
  std::optional<int> radius;

  nlohmann::json to_json() const;
  static SamplingPlan from_json(const nlohmann::json& j);
  /// SHA-256 of the canonical JSON form.
  std::string digest() const;
};

/// The relative ρ list used for sampled profiles: 0, 0.05, 0.1, ..., 0.9, 0.95, 1.
std::vector<double> default_relative_orders();

/// m = clamp(round(ρ n), 0, n−2).
int order_from_relative(int n, double rho);

SamplingPlan build_plan(const PlanConfig& config, std::uint64_t seed);

struct InteractionEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  bool exact = false;
  std::uint64_t contexts_used = 0;
};

/// Mean of delta_v over `contexts` size-m contexts drawn uniformly without
/// replacement from N∖{i,j}; exact enumeration once contexts >= C(n−2, m).
InteractionEstimate estimate_interaction(const GameEvaluator& game, int i, int j, int m, int contexts, Rng& rng);

struct OrderProfile {
  int n = 0;
  std::vector<int> orders;
  std::vector<double> relative_orders;  // m / (n − 2)
  std::vector<double> raw_strength;     // E_x E_{i,j} |I^(m)|
  std::vector<double> J;                // raw / mean over the order set
  /// Per-sample raw strengths and per-sample normalized J (samples x orders).
  std::vector<std::vector<double>> per_sample_raw;
  std::vector<std::vector<double>> per_sample_J;
  std::string plan_digest;
  std::uint64_t seed = 0;
  std::string normalization = "mean over the plan's order set";

  nlohmann::json to_json() const;
  static OrderProfile from_json(const nlohmann::json& j);
};

/// Builds a profile from raw per-order strengths (normalizing by their mean).
OrderProfile profile_from_raw(int n, std::vector<int> orders, std::vector<double> raw);

/// J^(m) over the games selected by the plan. `workers` parallelizes over
/// samples; the result does not depend on it.
OrderProfile strength_profile(std::span<const GameEvaluator* const> games, const SamplingPlan& plan, int workers = 1);

/// E_x E_m [ E_{u≠v} |J_u − J_v| / E_w |J_w| ] over repeated per-sample profiles.
double instability(std::span<const OrderProfile> repeats);

/// CSV with columns order_m, relative_order, raw_strength, J.
void write_profile_csv(const OrderProfile& profile, std::ostream& out);
OrderProfile read_profile_csv(std::istream& in, int n);

}  // namespace bottleneck
