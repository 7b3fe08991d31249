#include "bottleneck/attack.hpp"

#include <algorithm>
#include <cmath>

#include "bottleneck/errors.hpp"
#include "bottleneck/losses.hpp"
#include "bottleneck/parallel.hpp"

namespace bottleneck {
namespace {

// Projects v onto [x0 − ε, x0 + ε] such that |v − x0| ≤ ε holds in floating point.
double project(double v, double x0, double epsilon) {
  v = std::clamp(v, x0 - epsilon, x0 + epsilon);
  while (std::fabs(v - x0) > epsilon) v = std::nextafter(v, x0);
  return v;
}

Eigen::MatrixXd batch_input_gradient(const Mlp& model, const Eigen::MatrixXd& inputs, std::span<const int> labels) {
  ForwardTape tape;
  const Eigen::MatrixXd z = model.forward(inputs, tape);
  Eigen::MatrixXd dz(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) dz.col(c) = softmax_cross_entropy(z.col(c), labels[c]).gradient;
  MlpGradients scratch = model.zero_gradients();
  return model.backward(tape, dz, scratch, true);
}

}  // namespace

void AttackConfig::validate(int n) const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("attack: epsilon must be finite and >= 0");
  if (steps < 0) throw ConfigError("attack: steps must be >= 0");
  if (steps > 0 && !(step_size > 0.0)) throw ConfigError("attack: step size must be positive");
  if (clamp && (static_cast<int>(clamp->low.size()) != n || static_cast<int>(clamp->high.size()) != n)) {
    throw ConfigError("attack: clamp range must have one entry per feature");
  }
}

nlohmann::json AttackConfig::to_json() const {
  return {{"epsilon", epsilon}, {"steps", steps}, {"step_size", step_size}, {"clamp", clamp.has_value()}};
}

ClampRange observed_range(const Dataset& data) {
  ClampRange r;
  for (int i = 0; i < data.n(); ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k : data.train_indices) {
      lo = std::min(lo, data.features(k, i));
      hi = std::max(hi, data.features(k, i));
    }
    r.low.push_back(lo);
    r.high.push_back(hi);
  }
  return r;
}

Eigen::VectorXd input_gradient(const Mlp& model, std::span<const double> x, int label) {
  if (static_cast<int>(x.size()) != model.input_dim()) throw DimensionError("input_gradient: x does not match the model");
  if (label < 0 || label >= model.output_dim()) throw ArgumentError("input_gradient: label out of range");
  const Eigen::MatrixXd inputs = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return batch_input_gradient(model, inputs, std::span<const int>(&label, 1)).col(0);
}

std::vector<double> pgd_untargeted(const Mlp& model, std::span<const double> x, int label, const AttackConfig& config) {
  const Eigen::MatrixXd inputs = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd out = pgd_batch(model, inputs, std::span<const int>(&label, 1), config);
  return {out.data(), out.data() + out.size()};
}

Eigen::MatrixXd pgd_batch(const Mlp& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                          const AttackConfig& config) {
  if (inputs.rows() != model.input_dim()) throw DimensionError("pgd: inputs do not match the model");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.cols()) throw DimensionError("pgd: one label per column");
  for (int y : labels) {
    if (y < 0 || y >= model.output_dim()) throw ArgumentError("pgd: label out of range");
  }
  if (!inputs.allFinite()) throw ArgumentError("pgd: non-finite input");
  config.validate(static_cast<int>(inputs.rows()));
  Eigen::MatrixXd adv = inputs;
  for (int step = 0; step < config.steps && config.epsilon > 0.0; ++step) {
    const Eigen::MatrixXd g = batch_input_gradient(model, adv, labels);
    if (!g.allFinite()) throw NumericError("pgd: non-finite input gradient at step " + std::to_string(step));
    for (Eigen::Index c = 0; c < adv.cols(); ++c) {
      for (Eigen::Index i = 0; i < adv.rows(); ++i) {
        const double s = g(i, c) > 0.0 ? 1.0 : (g(i, c) < 0.0 ? -1.0 : 0.0);
        double v = project(adv(i, c) + config.step_size * s, inputs(i, c), config.epsilon);
        if (config.clamp) v = std::clamp(v, config.clamp->low[i], config.clamp->high[i]);
        adv(i, c) = v;
      }
    }
  }
  return adv;
}

AttackResult adversarial_accuracy(const Mlp& model, const Dataset& data, std::span<const int> indices,
                                  const AttackConfig& config, int workers) {
  if (indices.empty()) throw ArgumentError("adversarial_accuracy: empty split");
  config.validate(data.n());
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (indices.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<std::pair<bool, bool>>> slots(chunks);
  parallel_for(chunks, workers, [&](std::size_t b) {
    const auto part = indices.subspan(b * kChunk, std::min(kChunk, indices.size() - b * kChunk));
    std::vector<int> labels;
    for (int k : part) labels.push_back(data.labels[k]);
    const Eigen::MatrixXd clean = data.batch(part);
    const Eigen::MatrixXd z0 = model.forward(clean);
    const Eigen::MatrixXd z1 = model.forward(pgd_batch(model, clean, labels, config));
    for (std::size_t c = 0; c < part.size(); ++c) {
      Eigen::Index a = 0;
      Eigen::Index b2 = 0;
      z0.col(static_cast<Eigen::Index>(c)).maxCoeff(&a);
      z1.col(static_cast<Eigen::Index>(c)).maxCoeff(&b2);
      slots[b].emplace_back(a == labels[c], b2 == labels[c]);
    }
  });
  AttackResult result;
  std::size_t clean_ok = 0;
  std::size_t adv_ok = 0;
  for (const auto& slot : slots) {
    for (auto [c, a] : slot) {
      clean_ok += c;
      adv_ok += a;
      result.survived.push_back(a);
    }
  }
  result.samples = static_cast<int>(indices.size());
  result.clean_accuracy = static_cast<double>(clean_ok) / result.samples;
  result.adversarial_accuracy = static_cast<double>(adv_ok) / result.samples;
  return result;
}

}  // namespace bottleneck
