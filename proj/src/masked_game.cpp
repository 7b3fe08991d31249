#include "bottleneck/masked_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bottleneck/errors.hpp"

namespace bottleneck {
namespace {

const double kLogOddsLimit = std::log((1.0 - kProbabilityClamp) / kProbabilityClamp);

}  // namespace

MaskedModelGame::MaskedModelGame(std::shared_ptr<const Mlp> model, std::vector<double> x, std::vector<double> baseline,
                                 int target, OutputMode mode)
    : model_(std::move(model)), x_(std::move(x)), baseline_(std::move(baseline)), target_(target), mode_(mode) {
  if (!model_) throw ArgumentError("masked game: null model");
  if (x_.size() != baseline_.size()) throw DimensionError("masked game: x and baseline differ in length");
  if (static_cast<int>(x_.size()) != model_->input_dim()) throw DimensionError("masked game: x does not match model input");
  if (x_.size() > Coalition::kMaxVariables) throw CapacityError("masked game: at most 64 variables");
  if (target_ < 0 || target_ >= model_->output_dim()) throw ArgumentError("masked game: target class out of range");
}

double MaskedModelGame::value(const Coalition& s) const {
  double out = 0.0;
  values(std::span<const Coalition>(&s, 1), std::span<double>(&out, 1));
  return out;
}

void MaskedModelGame::values(std::span<const Coalition> coalitions, std::span<double> out) const {
  if (coalitions.size() != out.size()) throw DimensionError("values: output span length mismatch");
  const int n = this->n();
  Eigen::MatrixXd batch(n, static_cast<Eigen::Index>(coalitions.size()));
  for (std::size_t k = 0; k < coalitions.size(); ++k) {
    if (coalitions[k].n() != n) throw DimensionError("masked game: coalition over wrong variable count");
    const std::uint64_t bits = coalitions[k].bits();
    for (int i = 0; i < n; ++i) batch(i, static_cast<Eigen::Index>(k)) = ((bits >> i) & 1U) ? x_[i] : baseline_[i];
  }
  const std::vector<double> v = class_outputs(model_->forward(batch), target_, mode_);
  std::copy(v.begin(), v.end(), out.begin());
}

std::vector<double> class_outputs(const Eigen::MatrixXd& logits, int target, OutputMode mode) {
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    if (mode == OutputMode::RawLogit) {
      out[c] = logits(target, c);
      continue;
    }
    // ln p/(1−p) = z_y − log Σ_{c≠y} exp(z_c), clamped like log_odds(p) at p ∈ {ε, 1−ε}.
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      if (r != target) top = std::max(top, logits(r, c));
    }
    double rest = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      if (r != target) rest += std::exp(logits(r, c) - top);
    }
    const double value = logits(target, c) - (top + std::log(rest));
    if (std::isnan(value)) throw NumericError("masked game: NaN logit");
    out[c] = std::clamp(value, -kLogOddsLimit, kLogOddsLimit);
  }
  return out;
}

}  // namespace bottleneck
