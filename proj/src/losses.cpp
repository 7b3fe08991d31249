#include "bottleneck/losses.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "bottleneck/errors.hpp"
#include "bottleneck/exact.hpp"

namespace bottleneck {
namespace {

double log_sum_exp(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  return top + std::log((z.array() - top).exp().sum());
}

void check_range(int n, double r1, double r2) {
  if (!(r1 >= 0.0 && r1 < r2 && r2 <= 1.0)) throw ArgumentError("order range must satisfy 0 <= r1 < r2 <= 1");
  if (count_for_ratio(n, r1) == count_for_ratio(n, r2)) {
    throw ArgumentError("degenerate order range: round(r1 n) == round(r2 n) for n = " + std::to_string(n));
  }
}

void check_batch(const Mlp& model, const Batch& batch) {
  if (batch.inputs.rows() != model.input_dim()) throw DimensionError("batch rows do not match the model input");
  if (static_cast<Eigen::Index>(batch.labels.size()) != batch.inputs.cols()) {
    throw DimensionError("batch: one label per column required");
  }
  if (batch.inputs.cols() == 0) throw ArgumentError("empty batch");
  for (int y : batch.labels) {
    if (y < 0 || y >= model.output_dim()) throw ArgumentError("label out of range");
  }
}

Eigen::MatrixXd masked_columns(const Batch& batch, std::span<const NestedDraw> draws, bool second) {
  if (batch.baseline.size() != static_cast<std::size_t>(batch.inputs.rows())) {
    throw DimensionError("baseline length does not match the batch");
  }
  Eigen::MatrixXd out(batch.inputs.rows(), batch.inputs.cols());
  for (Eigen::Index c = 0; c < batch.inputs.cols(); ++c) {
    const std::uint64_t bits = second ? draws[c].s2.bits() : draws[c].s1.bits();
    for (Eigen::Index i = 0; i < batch.inputs.rows(); ++i) {
      out(i, c) = ((bits >> i) & 1U) ? batch.inputs(i, c) : batch.baseline[i];
    }
  }
  return out;
}

template <typename PerColumn>
LossResult delta_loss(const Mlp& model, const Batch& batch, double r1, double r2, std::span<const NestedDraw> draws,
                      PerColumn per_column) {
  check_batch(model, batch);
  check_range(model.input_dim(), r1, r2);
  if (static_cast<Eigen::Index>(draws.size()) != batch.inputs.cols()) throw DimensionError("one draw per column required");
  const double ratio = delta_ratio(r1, r2);
  ForwardTape tape1;
  ForwardTape tape2;
  const Eigen::MatrixXd z1 = model.forward(masked_columns(batch, draws, false), tape1);
  const Eigen::MatrixXd z2 = model.forward(masked_columns(batch, draws, true), tape2);
  const Eigen::MatrixXd delta = z2 - ratio * z1;

  const double scale = 1.0 / static_cast<double>(delta.cols());
  LossResult result{0.0, model.zero_gradients()};
  Eigen::MatrixXd d2(delta.rows(), delta.cols());
  for (Eigen::Index c = 0; c < delta.cols(); ++c) {
    const LogitLoss l = per_column(Eigen::VectorXd(delta.col(c)), batch.labels[c]);
    result.value += l.value;
    d2.col(c) = l.gradient * scale;
  }
  result.value *= scale;
  model.backward(tape2, d2, result.gradients);
  model.backward(tape1, -ratio * d2, result.gradients);
  return result;
}

std::vector<NestedDraw> draw_all(int n, Eigen::Index count, double r1, double r2, Rng& rng) {
  std::vector<NestedDraw> draws;
  draws.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index c = 0; c < count; ++c) draws.push_back(sample_nested_subsets(n, r1, r2, rng));
  return draws;
}

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw ArgumentError("softmax of an empty vector");
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

LogitLoss softmax_cross_entropy(const Eigen::VectorXd& logits, int label) {
  if (logits.size() < 2) throw ArgumentError("cross-entropy needs at least two classes");
  if (label < 0 || label >= logits.size()) throw ArgumentError("label out of range");
  LogitLoss out;
  out.value = log_sum_exp(logits) - logits(label);
  out.gradient = softmax(logits);
  out.gradient(label) -= 1.0;
  return out;
}

LogitLoss negative_entropy(const Eigen::VectorXd& logits) {
  if (logits.size() < 2) throw ArgumentError("entropy needs at least two classes");
  const Eigen::VectorXd log_p = logits.array() - log_sum_exp(logits);
  const Eigen::VectorXd p = log_p.array().exp();
  LogitLoss out;
  out.value = p.dot(log_p);
  out.gradient = (p.array() * (log_p.array() - out.value)).matrix();
  return out;
}

double delta_ratio(double r1, double r2) { return r1 > 0.0 ? r2 / r1 : 1.0; }

NestedDraw sample_nested_subsets(int n, double r1, double r2, Rng& rng) {
  if (n < 1 || n > Coalition::kMaxVariables) throw ArgumentError("sample_nested_subsets: n must lie in [1, 64]");
  check_range(n, r1, r2);
  const int k1 = count_for_ratio(n, r1);
  const int k2 = count_for_ratio(n, r2);
  std::vector<int> cells(static_cast<std::size_t>(n));
  std::iota(cells.begin(), cells.end(), 0);
  // A partial Fisher-Yates prefix of length k2 is a uniform ordered draw; its
  // first k1 entries are then a uniform k1-subset and the rest a uniform extension.
  std::uint64_t b1 = 0;
  std::uint64_t b2 = 0;
  for (int t = 0; t < k2; ++t) {
    std::swap(cells[t], cells[t + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - t)))]);
    const std::uint64_t bit = std::uint64_t{1} << cells[t];
    if (t < k1) b1 |= bit;
    b2 |= bit;
  }
  return {Coalition(n, b1), Coalition(n, b2)};
}

Eigen::VectorXd delta_logits(const Mlp& model, std::span<const double> x, std::span<const double> baseline,
                             const Coalition& s1, const Coalition& s2, double r1, double r2) {
  const int n = model.input_dim();
  if (static_cast<int>(x.size()) != n || static_cast<int>(baseline.size()) != n) {
    throw DimensionError("delta_logits: x or baseline does not match the model input");
  }
  if (s1.n() != n || s2.n() != n) throw DimensionError("delta_logits: coalitions over the wrong variable count");
  if (!s1.is_proper_subset_of(s2)) throw ArgumentError("delta_logits: S1 must be a proper subset of S2");
  check_range(n, r1, r2);
  if (s1.size() != count_for_ratio(n, r1) || s2.size() != count_for_ratio(n, r2)) {
    throw ArgumentError("delta_logits: coalition sizes do not match round(r n)");
  }
  Eigen::MatrixXd inputs(n, 2);
  for (int i = 0; i < n; ++i) {
    inputs(i, 0) = s1.contains(i) ? x[i] : baseline[i];
    inputs(i, 1) = s2.contains(i) ? x[i] : baseline[i];
  }
  const Eigen::MatrixXd z = model.forward(inputs);
  return z.col(1) - delta_ratio(r1, r2) * z.col(0);
}

LossResult loss_classification(const Mlp& model, const Batch& batch) {
  check_batch(model, batch);
  ForwardTape tape;
  const Eigen::MatrixXd z = model.forward(batch.inputs, tape);
  const double scale = 1.0 / static_cast<double>(z.cols());
  LossResult result{0.0, model.zero_gradients()};
  Eigen::MatrixXd dz(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const LogitLoss l = softmax_cross_entropy(z.col(c), batch.labels[c]);
    result.value += l.value;
    dz.col(c) = l.gradient * scale;
  }
  result.value *= scale;
  model.backward(tape, dz, result.gradients);
  return result;
}

LossResult loss_encourage(const Mlp& model, const Batch& batch, double r1, double r2, std::span<const NestedDraw> draws) {
  return delta_loss(model, batch, r1, r2, draws,
                    [](const Eigen::VectorXd& d, int label) { return softmax_cross_entropy(d, label); });
}

LossResult loss_encourage(const Mlp& model, const Batch& batch, double r1, double r2, Rng& rng) {
  const auto draws = draw_all(model.input_dim(), batch.inputs.cols(), r1, r2, rng);
  return loss_encourage(model, batch, r1, r2, draws);
}

LossResult loss_penalize(const Mlp& model, const Batch& batch, double r1, double r2, std::span<const NestedDraw> draws) {
  return delta_loss(model, batch, r1, r2, draws, [](const Eigen::VectorXd& d, int) { return negative_entropy(d); });
}

LossResult loss_penalize(const Mlp& model, const Batch& batch, double r1, double r2, Rng& rng) {
  const auto draws = draw_all(model.input_dim(), batch.inputs.cols(), r1, r2, rng);
  return loss_penalize(model, batch, r1, r2, draws);
}

}  // namespace bottleneck
