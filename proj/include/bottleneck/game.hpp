#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bottleneck/coalition.hpp"

namespace bottleneck {

/// Largest n for which whole-power-set enumeration is allowed.
inline constexpr int kExactMaxVariables = 24;

/// The value function v : 2^N -> R. Implementations must be pure: equal
/// coalitions always give bit-identical values, and concurrent calls are safe.
class GameEvaluator {
 public:
  virtual ~GameEvaluator() = default;

  virtual int n() const = 0;
  virtual double value(const Coalition& s) const = 0;

  /// Batched evaluation; out[k] = value(coalitions[k]). Model-backed games
  /// override this to run one batched forward pass.
  virtual void values(std::span<const Coalition> coalitions, std::span<double> out) const;
};

/// v(S) = offset + sum_{k in S} a_k.
class AdditiveGame final : public GameEvaluator {
 public:
  explicit AdditiveGame(std::vector<double> weights, double offset = 0.0);
  int n() const override { return static_cast<int>(weights_.size()); }
  double value(const Coalition& s) const override;

 private:
  std::vector<double> weights_;
  double offset_;
};

/// v(S) = scale * 1[members ⊆ S]. With two members this is the pairwise AND game.
class AndGame final : public GameEvaluator {
 public:
  AndGame(int n, std::vector<int> members, double scale = 1.0);
  int n() const override { return n_; }
  double value(const Coalition& s) const override;

 private:
  int n_;
  std::uint64_t members_;
  double scale_;
};

/// v(S) = |S| mod 2.
class ParityGame final : public GameEvaluator {
 public:
  explicit ParityGame(int n);
  int n() const override { return n_; }
  double value(const Coalition& s) const override;

 private:
  int n_;
};

/// Explicit value table indexed by the coalition bit mask (n <= 24).
class TableGame final : public GameEvaluator {
 public:
  TableGame(int n, std::vector<double> table);

  /// Values drawn i.i.d. from N(0, 1) with a seeded stream.
  static TableGame random(int n, std::uint64_t seed);
  /// Evaluates `game` on all 2^n coalitions once (through its batched path).
  static TableGame tabulate(const GameEvaluator& game);

  int n() const override { return n_; }
  double value(const Coalition& s) const override;
  void values(std::span<const Coalition> coalitions, std::span<double> out) const override;

  const std::vector<double>& table() const { return table_; }

 private:
  int n_;
  std::vector<double> table_;
};

/// Pointwise sum of two games over the same variables.
class SumGame final : public GameEvaluator {
 public:
  SumGame(std::shared_ptr<const GameEvaluator> a, std::shared_ptr<const GameEvaluator> b);
  int n() const override { return a_->n(); }
  double value(const Coalition& s) const override;

 private:
  std::shared_ptr<const GameEvaluator> a_;
  std::shared_ptr<const GameEvaluator> b_;
};

/// output[i] = x[i] for i in S, b[i] otherwise.
std::vector<double> mask_input(std::span<const double> x, const Coalition& s, std::span<const double> baseline);

inline constexpr double kProbabilityClamp = 1e-12;

/// ln(p / (1 - p)) after clamping p into [1e-12, 1 - 1e-12]. NaN -> NumericError.
double log_odds(double p);

/// v(S ∪ {i,j}) − v(S ∪ {i}) − v(S ∪ {j}) + v(S).
double delta_v(const GameEvaluator& game, int i, int j, const Coalition& s);

/// Throws CapacityError when n exceeds `limit`.
void require_enumerable(const GameEvaluator& game, int limit = kExactMaxVariables);

}  // namespace bottleneck
