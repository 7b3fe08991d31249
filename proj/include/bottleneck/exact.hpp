#pragma once

#include <vector>

#include "bottleneck/game.hpp"

namespace bottleneck {

/// I^(m)(i, j) for all pairs at one order. The diagonal is NaN.
struct InteractionMatrix {
  int n = 0;
  int order = 0;
  std::vector<double> values;  // row-major n x n

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

/// Terms of v(N) = v(∅) + Σ μ_i + Σ_m w^(m) Σ_{i≠j} I^(m)(i,j), with the pair
/// sum taken over ordered pairs.
struct EfficiencyComponents {
  double v_empty = 0.0;
  double v_full = 0.0;
  std::vector<double> mu;          // μ_i = v({i}) − v(∅)
  std::vector<double> order_sums;  // order_sums[m] = Σ_{ordered i≠j} I^(m)(i,j)
  double reconstruction = 0.0;
};

/// Rounds r * n half up (with a 1e-9 guard against representation error).
int count_for_ratio(int n, double r);

/// Mean of delta_v over all C(n−2, m) contexts S ⊆ N∖{i,j} with |S| = m.
double interaction_exact(const GameEvaluator& game, int i, int j, int m);

/// Every I^(m)(i, j), m = 0..n−2, from one tabulation of the game.
std::vector<InteractionMatrix> all_interactions_exact(const GameEvaluator& game);

/// Shapley value φ_i by full enumeration (n <= 20).
double shapley_value_exact(const GameEvaluator& game, int i);
std::vector<double> shapley_values_exact(const GameEvaluator& game);

/// Shapley interaction index, computed as φ_i with j always present minus φ_i
/// with j always absent (each a Shapley value in the reduced n−1 player game).
double shapley_interaction_index(const GameEvaluator& game, int i, int j);

/// w^(m) = (n − 1 − m) / (n (n − 1)).
double efficiency_weight(int n, int m);

EfficiencyComponents efficiency_decomposition(const GameEvaluator& game);

/// v(S2) − (r2/r1) v(S1); with r1 = 0 the result is v(S2) − v(∅).
double delta_v_pair(const GameEvaluator& game, const Coalition& s1, const Coalition& s2, double r1, double r2);

/// Expectation of delta_v_pair over uniformly drawn nested (S1, S2), written in
/// terms of exact interactions:
///   (1 − r2/r1) v(∅) + Σ_m Σ_{ordered i≠j} w̃^(m) I^(m)(i,j)              (r1 > 0)
///   r2 Σ_i μ_i + Σ_m Σ_{ordered i≠j} w̃^(m) I^(m)(i,j)                     (r1 = 0)
/// For r1 > 0 the local utilities cancel; for r1 = 0 they do not, since the
/// subtracted term is v(∅) rather than a rescaled v(S1).
double theorem2_rhs(const GameEvaluator& game, double r1, double r2);

}  // namespace bottleneck
