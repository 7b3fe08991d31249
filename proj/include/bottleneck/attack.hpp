#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bottleneck/dataset.hpp"
#include "bottleneck/mlp.hpp"

namespace bottleneck {

struct ClampRange {
  std::vector<double> low;
  std::vector<double> high;
};

/// Untargeted L∞ PGD in standardized feature space. No random start.
struct AttackConfig {
  double epsilon = 0.2;
  int steps = 50;
  double step_size = 0.01;
  std::optional<ClampRange> clamp;  // applied after the ball projection

  void validate(int n) const;
  nlohmann::json to_json() const;
};

/// Per-feature [min, max] of the standardized training split.
ClampRange observed_range(const Dataset& data);

/// d(cross-entropy)/d(input) for one sample.
Eigen::VectorXd input_gradient(const Mlp& model, std::span<const double> x, int label);

std::vector<double> pgd_untargeted(const Mlp& model, std::span<const double> x, int label, const AttackConfig& config);

/// Column-wise PGD on a batch; column c of the result equals pgd_untargeted on column c.
Eigen::MatrixXd pgd_batch(const Mlp& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                          const AttackConfig& config);

struct AttackResult {
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  int samples = 0;
  std::vector<bool> survived;  // per sample: still correct after the attack
};

AttackResult adversarial_accuracy(const Mlp& model, const Dataset& data, std::span<const int> indices,
                                  const AttackConfig& config, int workers = 1);

}  // namespace bottleneck
