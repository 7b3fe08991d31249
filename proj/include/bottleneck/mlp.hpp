#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace bottleneck {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Parameter gradients, laid out like the model's layers.
using MlpGradients = std::vector<DenseLayer>;

/// Activations saved by a forward pass for the backward pass.
struct ForwardTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer (after the previous rectifier)
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
};

/// Fully connected classifier: rectifier on hidden layers, identity output.
/// Batches are column-major: one column per sample.
class Mlp {
 public:
  Mlp() = default;
  /// dims = {n, hidden..., C}; all parameters zero.
  explicit Mlp(std::vector<int> dims);

  /// He-style init: weights ~ N(0, 2 / fan_in), zero biases.
  static Mlp initialized(std::vector<int> dims, std::uint64_t seed);
  /// n -> hidden_layers x width -> classes.
  static Mlp preset(int n, int classes, int hidden_layers, int width, std::uint64_t seed);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// inputs: n x batch -> logits: C x batch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, ForwardTape& tape) const;

  /// Accumulates parameter gradients for upstream d(loss)/d(logits) into
  /// `grads` (which must be shaped like the model, e.g. from zero_gradients).
  /// Returns d(loss)/d(inputs) when `want_input_gradient` is set.
  Eigen::MatrixXd backward(const ForwardTape& tape, const Eigen::MatrixXd& dlogits, MlpGradients& grads,
                           bool want_input_gradient = false) const;

  MlpGradients zero_gradients() const;
  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<int> dims_;
  std::vector<DenseLayer> layers_;
};

Eigen::VectorXd flatten_gradients(const MlpGradients& grads);

inline constexpr int kModelFormatVersion = 1;

}  // namespace bottleneck
