#pragma once

#include <memory>
#include <span>
#include <vector>

#include "bottleneck/game.hpp"
#include "bottleneck/mlp.hpp"

namespace bottleneck {

enum class OutputMode {
  LogOdds,   // ln P(y*|x_S) / (1 − P(y*|x_S))
  RawLogit,  // pre-softmax logit of y*
};

/// v(S) = model output on x with the variables outside S replaced by the baseline.
class MaskedModelGame final : public GameEvaluator {
 public:
  MaskedModelGame(std::shared_ptr<const Mlp> model, std::vector<double> x, std::vector<double> baseline, int target,
                  OutputMode mode = OutputMode::LogOdds);

  int n() const override { return static_cast<int>(x_.size()); }
  double value(const Coalition& s) const override;
  void values(std::span<const Coalition> coalitions, std::span<double> out) const override;

 private:
  std::shared_ptr<const Mlp> model_;
  std::vector<double> x_;
  std::vector<double> baseline_;
  int target_;
  OutputMode mode_;
};

/// Output of the chosen mode for each column of a logits matrix.
std::vector<double> class_outputs(const Eigen::MatrixXd& logits, int target, OutputMode mode);

}  // namespace bottleneck
