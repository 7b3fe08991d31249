#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bottleneck/order_profile.hpp"

namespace bottleneck {

/// F^(m) = w^(m) / sqrt(C(n−2, m)); real n and m use the log-gamma binomial.
double training_strength_F(double n, double m);

struct TheoryCurve {
  double n_eff = 0.0;
  std::vector<double> relative_orders;
  std::vector<double> f_hat;
};

/// F̂ at m = ρ (n_eff − 2), normalized by its ρ = 0 value.
TheoryCurve normalized_curve(double n_eff, const std::vector<double>& relative_orders);

/// w̃^(m) for Δv(r1, r2); r1 = 0 leaves only the second and third branches.
double theorem2_weight(int n, double r1, double r2, int m);

struct Theorem1Table {
  int n = 0;
  double sigma = 0.0;
  std::uint64_t trials = 0;
  std::vector<int> orders;
  std::vector<double> predicted_std;  // w^(m) σ / sqrt(C(n−2, m))
  std::vector<double> empirical_std;
};

inline constexpr int kTheorem1MaxVariables = 14;

/// Monte Carlo spread of per-order interaction updates from one gradient step,
/// with η ∂L/∂v(N) = 1.
Theorem1Table simulate_theorem1(int n, double sigma, std::uint64_t trials, std::uint64_t seed, int workers = 1);

struct EffectiveDimensionFit {
  double n_eff = 0.0;
  /// Residual sum of squares over total sum of squares of log Ĵ (infinite for
  /// a flat profile, which has nothing to explain).
  double fit_error = 0.0;
  double rms_log_error = 0.0;
  bool at_boundary = false;
  std::vector<std::string> warnings;
};

/// n′ minimizing Σ (log F̂(n′, ρ) − log Ĵ(ρ))² over n′ in (lower, upper].
/// `upper <= 0` means the profile's own n.
EffectiveDimensionFit fit_effective_dimension(const OrderProfile& empirical, double lower = 2.0, double upper = 0.0);

void write_theory_csv(const OrderProfile& empirical, const TheoryCurve& curve, std::ostream& out);
void write_theorem1_csv(const Theorem1Table& table, std::ostream& out);

}  // namespace bottleneck
