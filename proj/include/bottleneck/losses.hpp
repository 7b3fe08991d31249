#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bottleneck/coalition.hpp"
#include "bottleneck/mlp.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

/// Stable softmax (max subtracted first).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// A scalar loss of one logit vector and its gradient with respect to the logits.
struct LogitLoss {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// −ln softmax(logits)[label]; gradient p − onehot(label).
LogitLoss softmax_cross_entropy(const Eigen::VectorXd& logits, int label);

/// Σ_c p_c ln p_c with p = softmax(logits); gradient p_k (ln p_k − Σ_c p_c ln p_c).
LogitLoss negative_entropy(const Eigen::VectorXd& logits);

/// Nested coalitions S1 ⊊ S2 for the order-control losses.
struct NestedDraw {
  Coalition s1;
  Coalition s2;
};

/// S1 uniform of size round(r1 n); S2 = S1 plus a uniform extension to size round(r2 n).
NestedDraw sample_nested_subsets(int n, double r1, double r2, Rng& rng);

/// Coefficient of v(S1) in Δv: r2 / r1, or 1 when r1 = 0 (then S1 = ∅).
double delta_ratio(double r1, double r2);

/// v_c(S2|x) − ratio · v_c(S1|x) on raw logits.
Eigen::VectorXd delta_logits(const Mlp& model, std::span<const double> x, std::span<const double> baseline,
                             const Coalition& s1, const Coalition& s2, double r1, double r2);

/// A batch in column layout: inputs is n x B, one label per column.
struct Batch {
  const Eigen::MatrixXd& inputs;
  std::span<const int> labels;
  std::span<const double> baseline;
};

/// Mean loss over the batch and its parameter gradients.
struct LossResult {
  double value = 0.0;
  MlpGradients gradients;
};

LossResult loss_classification(const Mlp& model, const Batch& batch);

/// Mean cross-entropy of softmax(Δv) against the labels, one draw per column.
LossResult loss_encourage(const Mlp& model, const Batch& batch, double r1, double r2, std::span<const NestedDraw> draws);
LossResult loss_encourage(const Mlp& model, const Batch& batch, double r1, double r2, Rng& rng);

/// Mean Σ p ln p of softmax(Δv), one draw per column.
LossResult loss_penalize(const Mlp& model, const Batch& batch, double r1, double r2, std::span<const NestedDraw> draws);
LossResult loss_penalize(const Mlp& model, const Batch& batch, double r1, double r2, Rng& rng);

}  // namespace bottleneck
