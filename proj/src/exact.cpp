#include "bottleneck/exact.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bottleneck/errors.hpp"
#include "bottleneck/theory.hpp"

namespace bottleneck {
namespace {

constexpr int kShapleyMaxVariables = 20;

void check_pair(int n, int i, int j) {
  if (i < 0 || j < 0 || i >= n || j >= n) throw ArgumentError("variable index out of range");
  if (i == j) throw ArgumentError("interaction needs two distinct variables");
}

// The (n−1)-player game on N∖{j} with j pinned present or absent. Reduced
// index k maps to original index k for k < j and k + 1 otherwise.
class PinnedGame final : public GameEvaluator {
 public:
  PinnedGame(const GameEvaluator& base, int pinned, bool present)
      : base_(base), pinned_(pinned), present_(present) {}

  int n() const override { return base_.n() - 1; }

  double value(const Coalition& s) const override {
    const std::uint64_t low = s.bits() & low_bits(pinned_);
    const std::uint64_t high = (s.bits() >> pinned_) << (pinned_ + 1);
    std::uint64_t bits = low | high;
    if (present_) bits |= std::uint64_t{1} << pinned_;
    return base_.value(Coalition(base_.n(), bits));
  }

 private:
  const GameEvaluator& base_;
  int pinned_;
  bool present_;
};

int reduced_index(int i, int pinned) { return i < pinned ? i : i - 1; }

}  // namespace

int count_for_ratio(int n, double r) { return static_cast<int>(std::floor(r * n + 0.5 + 1e-9)); }

double interaction_exact(const GameEvaluator& game, int i, int j, int m) {
  require_enumerable(game);
  const int n = game.n();
  check_pair(n, i, j);
  if (m < 0 || m > n - 2) throw ArgumentError("order m must lie in [0, n−2]");
  const Coalition pool = Coalition::full(n).without(i).without(j);
  double sum = 0.0;
  std::uint64_t count = 0;
  for_each_subset_of_size(pool, m, [&](const Coalition& s) {
    sum += delta_v(game, i, j, s);
    ++count;
  });
  return sum / static_cast<double>(count);
}

std::vector<InteractionMatrix> all_interactions_exact(const GameEvaluator& game) {
  require_enumerable(game);
  const int n = game.n();
  if (n < 2) throw ArgumentError("interactions need at least two variables");
  const TableGame table = TableGame::tabulate(game);
  const std::vector<double>& v = table.table();

  std::vector<InteractionMatrix> out(n - 1);
  for (int m = 0; m <= n - 2; ++m) {
    out[m].n = n;
    out[m].order = m;
    out[m].values.assign(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<double> sums(n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      std::fill(sums.begin(), sums.end(), 0.0);
      const std::uint64_t bi = std::uint64_t{1} << i;
      const std::uint64_t bj = std::uint64_t{1} << j;
      const std::uint64_t pool = low_bits(n) & ~bi & ~bj;
      // Walk every subset of the pool (standard submask descent, including ∅).
      std::uint64_t s = pool;
      while (true) {
        sums[std::popcount(s)] += v[s | bi | bj] - v[s | bi] - v[s | bj] + v[s];
        if (s == 0) break;
        s = (s - 1) & pool;
      }
      for (int m = 0; m <= n - 2; ++m) {
        const double mean = sums[m] / static_cast<double>(binomial(n - 2, m));
        out[m].values[static_cast<std::size_t>(i) * n + j] = mean;
        out[m].values[static_cast<std::size_t>(j) * n + i] = mean;
      }
    }
  }
  return out;
}

double shapley_value_exact(const GameEvaluator& game, int i) {
  require_enumerable(game, kShapleyMaxVariables);
  const int n = game.n();
  if (i < 0 || i >= n) throw ArgumentError("variable index out of range");
  const Coalition others = Coalition::full(n).without(i);
  double phi = 0.0;
  for (int size = 0; size <= n - 1; ++size) {
    // |S|!(n−|S|−1)!/n! = 1 / (n C(n−1, |S|))
    const double weight = 1.0 / (static_cast<double>(n) * static_cast<double>(binomial(n - 1, size)));
    double sum = 0.0;
    for_each_subset_of_size(others, size, [&](const Coalition& s) { sum += game.value(s.with(i)) - game.value(s); });
    phi += weight * sum;
  }
  return phi;
}

std::vector<double> shapley_values_exact(const GameEvaluator& game) {
  require_enumerable(game, kShapleyMaxVariables);
  const TableGame table = TableGame::tabulate(game);
  std::vector<double> phi(game.n());
  for (int i = 0; i < game.n(); ++i) phi[i] = shapley_value_exact(table, i);
  return phi;
}

double shapley_interaction_index(const GameEvaluator& game, int i, int j) {
  require_enumerable(game, kShapleyMaxVariables);
  check_pair(game.n(), i, j);
  const PinnedGame present(game, j, true);
  const PinnedGame absent(game, j, false);
  const int k = reduced_index(i, j);
  return shapley_value_exact(present, k) - shapley_value_exact(absent, k);
}

double efficiency_weight(int n, int m) {
  if (n < 2) throw ArgumentError("efficiency weight needs n >= 2");
  if (m < 0 || m > n - 2) throw ArgumentError("order m must lie in [0, n−2]");
  return static_cast<double>(n - 1 - m) / (static_cast<double>(n) * (n - 1));
}

EfficiencyComponents efficiency_decomposition(const GameEvaluator& game) {
  require_enumerable(game);
  const int n = game.n();
  if (n < 2) throw ArgumentError("efficiency decomposition needs n >= 2");
  const std::vector<InteractionMatrix> interactions = all_interactions_exact(game);

  EfficiencyComponents out;
  out.v_empty = game.value(Coalition::empty(n));
  out.v_full = game.value(Coalition::full(n));
  out.mu.resize(n);
  for (int i = 0; i < n; ++i) out.mu[i] = game.value(Coalition::of(n, {i})) - out.v_empty;
  out.order_sums.assign(n - 1, 0.0);
  for (int m = 0; m <= n - 2; ++m) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) out.order_sums[m] += interactions[m].at(i, j);
      }
    }
  }
  out.reconstruction = out.v_empty;
  for (double mu : out.mu) out.reconstruction += mu;
  for (int m = 0; m <= n - 2; ++m) out.reconstruction += efficiency_weight(n, m) * out.order_sums[m];
  return out;
}

double delta_v_pair(const GameEvaluator& game, const Coalition& s1, const Coalition& s2, double r1, double r2) {
  const int n = game.n();
  if (s1.n() != n || s2.n() != n) throw DimensionError("delta_v_pair: coalition variable count mismatch");
  if (!(r1 >= 0.0 && r1 < r2 && r2 <= 1.0)) throw ArgumentError("delta_v_pair: need 0 <= r1 < r2 <= 1");
  if (!s1.is_proper_subset_of(s2)) throw ArgumentError("delta_v_pair: S1 must be a proper subset of S2");
  if (s1.size() != count_for_ratio(n, r1) || s2.size() != count_for_ratio(n, r2)) {
    throw ArgumentError("delta_v_pair: subset sizes disagree with round(r n)");
  }
  if (r1 == 0.0) return game.value(s2) - game.value(Coalition::empty(n));
  return game.value(s2) - (r2 / r1) * game.value(s1);
}

double theorem2_rhs(const GameEvaluator& game, double r1, double r2) {
  require_enumerable(game);
  const int n = game.n();
  if (!(r1 >= 0.0 && r1 < r2 && r2 <= 1.0)) throw ArgumentError("theorem2_rhs: need 0 <= r1 < r2 <= 1");
  for (double r : {r1, r2}) {
    if (std::abs(r * n - std::round(r * n)) > 1e-9) throw ArgumentError("theorem2_rhs: r n must be integral");
  }
  const std::vector<InteractionMatrix> interactions = all_interactions_exact(game);
  const double v_empty = game.value(Coalition::empty(n));

  double rhs = 0.0;
  if (r1 > 0.0) {
    rhs = (1.0 - r2 / r1) * v_empty;
  } else {
    double mu_sum = 0.0;
    for (int i = 0; i < n; ++i) mu_sum += game.value(Coalition::of(n, {i})) - v_empty;
    rhs = r2 * mu_sum;
  }
  for (int m = 0; m <= n - 2; ++m) {
    const double w = theorem2_weight(n, r1, r2, m);
    if (w == 0.0) continue;
    double pair_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) pair_sum += interactions[m].at(i, j);
      }
    }
    rhs += w * pair_sum;
  }
  return rhs;
}

}  // namespace bottleneck
