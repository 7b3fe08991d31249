#include "bottleneck/game.hpp"

#include <cmath>
#include <random>
#include <string>

#include "bottleneck/errors.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

void GameEvaluator::values(std::span<const Coalition> coalitions, std::span<double> out) const {
  if (coalitions.size() != out.size()) throw DimensionError("values: output span length mismatch");
  for (std::size_t k = 0; k < coalitions.size(); ++k) out[k] = value(coalitions[k]);
}

AdditiveGame::AdditiveGame(std::vector<double> weights, double offset)
    : weights_(std::move(weights)), offset_(offset) {
  if (weights_.size() > Coalition::kMaxVariables) throw ArgumentError("additive game: too many variables");
}

double AdditiveGame::value(const Coalition& s) const {
  double v = offset_;
  for (int i = 0; i < n(); ++i) {
    if ((s.bits() >> i) & 1U) v += weights_[i];
  }
  return v;
}

AndGame::AndGame(int n, std::vector<int> members, double scale)
    : n_(n), members_(Coalition::of(n, members).bits()), scale_(scale) {}

double AndGame::value(const Coalition& s) const { return (s.bits() & members_) == members_ ? scale_ : 0.0; }

ParityGame::ParityGame(int n) : n_(n) {
  if (n < 0 || n > Coalition::kMaxVariables) throw ArgumentError("parity game: bad variable count");
}

double ParityGame::value(const Coalition& s) const { return static_cast<double>(s.size() % 2); }

TableGame::TableGame(int n, std::vector<double> table) : n_(n), table_(std::move(table)) {
  if (n < 0 || n > kExactMaxVariables) {
    throw CapacityError("table game supports n <= " + std::to_string(kExactMaxVariables));
  }
  if (table_.size() != (std::size_t{1} << n)) throw DimensionError("table game: table size must be 2^n");
}

TableGame TableGame::random(int n, std::uint64_t seed) {
  if (n < 0 || n > kExactMaxVariables) throw CapacityError("table game supports n <= 24");
  Rng rng = make_rng(seed, 0x7AB1E);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> table(std::size_t{1} << n);
  for (double& v : table) v = normal(rng);
  return TableGame(n, std::move(table));
}

TableGame TableGame::tabulate(const GameEvaluator& game) {
  require_enumerable(game);
  const int n = game.n();
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> table(count);
  // Bounded chunks keep batched model evaluation memory-friendly.
  constexpr std::size_t kChunk = 4096;
  std::vector<Coalition> chunk;
  chunk.reserve(kChunk);
  for (std::size_t start = 0; start < count; start += kChunk) {
    const std::size_t stop = std::min(count, start + kChunk);
    chunk.clear();
    for (std::size_t b = start; b < stop; ++b) chunk.emplace_back(n, b);
    game.values(chunk, std::span<double>(table).subspan(start, stop - start));
  }
  return TableGame(n, std::move(table));
}

double TableGame::value(const Coalition& s) const {
  if (s.n() != n_) throw DimensionError("table game: coalition over wrong variable count");
  return table_[s.bits()];
}

void TableGame::values(std::span<const Coalition> coalitions, std::span<double> out) const {
  if (coalitions.size() != out.size()) throw DimensionError("values: output span length mismatch");
  for (std::size_t k = 0; k < coalitions.size(); ++k) out[k] = table_[coalitions[k].bits()];
}

SumGame::SumGame(std::shared_ptr<const GameEvaluator> a, std::shared_ptr<const GameEvaluator> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_->n() != b_->n()) throw DimensionError("sum game: variable counts differ");
}

double SumGame::value(const Coalition& s) const { return a_->value(s) + b_->value(s); }

std::vector<double> mask_input(std::span<const double> x, const Coalition& s, std::span<const double> baseline) {
  if (x.size() != baseline.size() || static_cast<int>(x.size()) != s.n()) {
    throw DimensionError("mask_input: x has " + std::to_string(x.size()) + " entries, baseline " +
                         std::to_string(baseline.size()) + ", coalition n " + std::to_string(s.n()));
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = ((s.bits() >> i) & 1U) ? x[i] : baseline[i];
  return out;
}

double log_odds(double p) {
  if (std::isnan(p)) throw NumericError("log_odds: NaN probability");
  if (p < 0.0 || p > 1.0) throw ArgumentError("log_odds: probability outside [0, 1]");
  // Work with the smaller tail so both clamp ends are exact mirrors.
  const bool upper = p > 0.5;
  const double q = std::max(upper ? 1.0 - p : p, kProbabilityClamp);
  const double r = std::log(q / (1.0 - q));
  return upper ? -r : r;
}

double delta_v(const GameEvaluator& game, int i, int j, const Coalition& s) {
  if (i == j) throw ArgumentError("delta_v: i and j must differ");
  if (s.contains(i) || s.contains(j)) throw ArgumentError("delta_v: context must exclude i and j");
  const Coalition si = s.with(i);
  const Coalition sj = s.with(j);
  const Coalition sij = si.with(j);
  return (game.value(sij) + game.value(s)) - (game.value(si) + game.value(sj));
}

void require_enumerable(const GameEvaluator& game, int limit) {
  if (game.n() > limit) {
    throw CapacityError("exact enumeration needs n <= " + std::to_string(limit) + ", got n = " +
                        std::to_string(game.n()));
  }
}

}  // namespace bottleneck
