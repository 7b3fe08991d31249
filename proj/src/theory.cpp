#include "bottleneck/theory.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "bottleneck/errors.hpp"
#include "bottleneck/parallel.hpp"
#include "bottleneck/rng.hpp"
#include "bottleneck/text.hpp"

namespace bottleneck {
namespace {

constexpr double kBranchTolerance = 1e-9;
constexpr std::uint64_t kTrialsPerBlock = 1000;
constexpr double kStrengthFloor = 1e-12;

double log_f_hat(double n_eff, double rho) {
  const double m = rho * (n_eff - 2.0);
  return std::log(training_strength_F(n_eff, m)) - std::log(training_strength_F(n_eff, 0.0));
}

}  // namespace

double training_strength_F(double n, double m) {
  if (!(n > 1.0)) throw ArgumentError("training_strength_F: need n > 1");
  if (!(m >= 0.0 && m <= n - 2.0 + 1e-12)) throw ArgumentError("training_strength_F: order outside [0, n−2]");
  const double w = (n - m - 1.0) / (n * (n - 1.0));
  return w / std::exp(0.5 * log_binomial(n - 2.0, m));
}

TheoryCurve normalized_curve(double n_eff, const std::vector<double>& relative_orders) {
  if (!(n_eff > 2.0)) throw ArgumentError("normalized_curve: need n_eff > 2");
  TheoryCurve curve;
  curve.n_eff = n_eff;
  curve.relative_orders = relative_orders;
  const double f0 = training_strength_F(n_eff, 0.0);
  for (double rho : relative_orders) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ArgumentError("normalized_curve: ρ outside [0, 1]");
    curve.f_hat.push_back(training_strength_F(n_eff, rho * (n_eff - 2.0)) / f0);
  }
  return curve;
}

double theorem2_weight(int n, double r1, double r2, int m) {
  if (!(r1 >= 0.0 && r1 < r2 && r2 <= 1.0)) throw ArgumentError("theorem2_weight: need 0 <= r1 < r2 <= 1");
  if (n < 2 || m < 0 || m > n - 2) throw ArgumentError("theorem2_weight: order m outside [0, n−2]");
  const double denom = static_cast<double>(n) * (n - 1);
  const double low_edge = r1 * n - 2.0;
  const double high_edge = r2 * n - 2.0;
  if (r1 > 0.0 && m <= low_edge + kBranchTolerance) return (r2 / r1 - 1.0) * (m + 1) / denom;
  if (m <= high_edge + kBranchTolerance) return (r2 * n - m - 1.0) / denom;
  return 0.0;
}

Theorem1Table simulate_theorem1(int n, double sigma, std::uint64_t trials, std::uint64_t seed, int workers) {
  if (n < 2) throw ArgumentError("simulate_theorem1: need n >= 2");
  if (n > kTheorem1MaxVariables) {
    throw CapacityError("simulate_theorem1: n <= " + std::to_string(kTheorem1MaxVariables) + " only");
  }
  if (sigma < 0.0) throw ArgumentError("simulate_theorem1: σ must be non-negative");
  if (trials < 2) throw ArgumentError("simulate_theorem1: need at least two trials");

  Theorem1Table table;
  table.n = n;
  table.sigma = sigma;
  table.trials = trials;
  const int orders = n - 1;
  for (int m = 0; m < orders; ++m) {
    table.orders.push_back(m);
    table.predicted_std.push_back(training_strength_F(n, m) * sigma);
  }

  // Per-block sums of x and x², reduced in block order afterwards.
  const std::uint64_t blocks = (trials + kTrialsPerBlock - 1) / kTrialsPerBlock;
  std::vector<std::vector<double>> sum(blocks, std::vector<double>(orders, 0.0));
  std::vector<std::vector<double>> sum_sq(blocks, std::vector<double>(orders, 0.0));
  parallel_for(blocks, workers, [&](std::size_t b) {
    Rng rng = make_rng(seed, 0x7E01, b);
    std::normal_distribution<double> gradient(0.0, 1.0);
    const std::uint64_t first = b * kTrialsPerBlock;
    const std::uint64_t last = std::min(trials, first + kTrialsPerBlock);
    for (std::uint64_t t = first; t < last; ++t) {
      for (int m = 0; m < orders; ++m) {
        const std::uint64_t contexts = binomial(n - 2, m);
        double acc = 0.0;
        for (std::uint64_t c = 0; c < contexts; ++c) acc += sigma * gradient(rng);
        // ∂I^(m)/∂W is the context average; scaling by w^(m) gives ΔW^(m).
        const double delta_w = (n - m - 1.0) / (n * (n - 1.0)) * acc / static_cast<double>(contexts);
        sum[b][m] += delta_w;
        sum_sq[b][m] += delta_w * delta_w;
      }
    }
  });

  for (int m = 0; m < orders; ++m) {
    double s = 0.0;
    double ss = 0.0;
    for (std::uint64_t b = 0; b < blocks; ++b) {
      s += sum[b][m];
      ss += sum_sq[b][m];
    }
    const double count = static_cast<double>(trials);
    const double mean = s / count;
    const double var = std::max(0.0, (ss - count * mean * mean) / (count - 1.0));
    table.empirical_std.push_back(std::sqrt(var));
  }
  return table;
}

EffectiveDimensionFit fit_effective_dimension(const OrderProfile& empirical, double lower, double upper) {
  EffectiveDimensionFit fit;
  const std::size_t k = empirical.orders.size();
  if (k < 4) throw ArgumentError("fit_effective_dimension: need at least four orders");
  if (empirical.orders.front() != 0) throw ArgumentError("fit_effective_dimension: profile must include order 0");
  if (upper <= 0.0) upper = empirical.n;
  lower = std::max(lower, 2.0);
  if (!(upper > lower)) throw ArgumentError("fit_effective_dimension: empty search range");

  std::vector<double> strengths = empirical.J;
  bool floored = false;
  for (double& s : strengths) {
    if (!(s > kStrengthFloor)) {
      s = kStrengthFloor;
      floored = true;
    }
  }
  if (floored) fit.warnings.emplace_back("profile contains zero strengths; floored at 1e-12");

  std::vector<double> rho(k);
  std::vector<double> target(k);
  for (std::size_t t = 0; t < k; ++t) {
    rho[t] = empirical.n > 2 ? static_cast<double>(empirical.orders[t]) / (empirical.n - 2) : 0.0;
    target[t] = std::log(strengths[t] / strengths[0]);
  }
  auto objective = [&](double n_eff) {
    double ss = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      const double r = log_f_hat(n_eff, rho[t]) - target[t];
      ss += r * r;
    }
    return ss;
  };

  // Coarse scan for the basin, then golden-section refinement inside it.
  const double lo = lower + 1e-3;
  constexpr int kGrid = 400;
  const double step = (upper - lo) / kGrid;
  int best = 0;
  double best_value = objective(lo);
  for (int g = 1; g <= kGrid; ++g) {
    const double value = objective(lo + g * step);
    if (value < best_value) {
      best_value = value;
      best = g;
    }
  }
  double a = lo + std::max(0, best - 1) * step;
  double b = lo + std::min(kGrid, best + 1) * step;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  double n_eff = 0.5 * (a + b);
  double residual = objective(n_eff);
  for (double edge : {lo, upper}) {
    const double value = objective(edge);
    if (value < residual) {
      n_eff = edge;
      residual = value;
    }
  }

  double mean_target = 0.0;
  for (double t : target) mean_target += t;
  mean_target /= static_cast<double>(k);
  double total = 0.0;
  for (double t : target) total += (t - mean_target) * (t - mean_target);

  fit.n_eff = n_eff;
  fit.rms_log_error = std::sqrt(residual / static_cast<double>(k));
  fit.fit_error = total > 0.0 ? residual / total : std::numeric_limits<double>::infinity();
  const double edge_tolerance = 1e-3 * (upper - lower);
  if (n_eff - lo <= edge_tolerance || upper - n_eff <= edge_tolerance) {
    fit.at_boundary = true;
    fit.warnings.emplace_back("effective dimension at search boundary (" + format_double(n_eff) +
                              "); the profile has no interior U-shape to match");
  }
  return fit;
}

void write_theory_csv(const OrderProfile& empirical, const TheoryCurve& curve, std::ostream& out) {
  if (empirical.orders.size() != curve.f_hat.size()) throw DimensionError("theory CSV: curve and profile differ in length");
  out << "relative_order,J_hat,F_hat\n";
  const double j0 = empirical.J.empty() ? 1.0 : empirical.J.front();
  for (std::size_t t = 0; t < curve.f_hat.size(); ++t) {
    out << format_double(curve.relative_orders[t]) << ',' << format_double(empirical.J[t] / j0) << ','
        << format_double(curve.f_hat[t]) << '\n';
  }
}

void write_theorem1_csv(const Theorem1Table& table, std::ostream& out) {
  out << "m,predicted_std,empirical_std\n";
  for (std::size_t t = 0; t < table.orders.size(); ++t) {
    out << table.orders[t] << ',' << format_double(table.predicted_std[t]) << ','
        << format_double(table.empirical_std[t]) << '\n';
  }
}

}  // namespace bottleneck
