#include "bottleneck/mlp.hpp"

#include <random>
#include <string>

#include "bottleneck/errors.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

Mlp::Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ArgumentError("MLP needs an input and an output width");
  for (int d : dims_) {
    if (d < 1) throw ArgumentError("MLP layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]), Eigen::VectorXd::Zero(dims_[l + 1])});
  }
}

Mlp Mlp::initialized(std::vector<int> dims, std::uint64_t seed) {
  Mlp model(std::move(dims));
  Rng rng = make_rng(seed, 0x1417);
  for (DenseLayer& layer : model.layers_) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.weight.cols())));
    // Fill row by row so the draw order is independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = normal(rng);
    }
  }
  return model;
}

Mlp Mlp::preset(int n, int classes, int hidden_layers, int width, std::uint64_t seed) {
  std::vector<int> dims{n};
  for (int h = 0; h < hidden_layers; ++h) dims.push_back(width);
  dims.push_back(classes);
  return initialized(std::move(dims), seed);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim()) {
    throw DimensionError("MLP forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                         std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs, ForwardTape& tape) const {
  if (inputs.rows() != input_dim()) {
    throw DimensionError("MLP forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                         std::to_string(input_dim()));
  }
  tape.inputs.clear();
  tape.pre.clear();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    tape.inputs.push_back(a);
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) {
      a = z.cwiseMax(0.0);
      tape.pre.push_back(std::move(z));
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const ForwardTape& tape, const Eigen::MatrixXd& dlogits, MlpGradients& grads,
                              bool want_input_gradient) const {
  if (tape.inputs.size() != layers_.size() || grads.size() != layers_.size()) {
    throw DimensionError("MLP backward: tape or gradient buffer does not match the model");
  }
  if (dlogits.rows() != output_dim() || dlogits.cols() != tape.inputs.front().cols()) {
    throw DimensionError("MLP backward: upstream gradient has the wrong shape");
  }
  Eigen::MatrixXd delta = dlogits;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grads[l].weight.noalias() += delta * tape.inputs[l].transpose();
    grads[l].bias += delta.rowwise().sum();
    if (l == 0 && !want_input_gradient) break;
    Eigen::MatrixXd upstream = layers_[l].weight.transpose() * delta;
    if (l > 0) {
      // Rectifier derivative, taken as 0 at exactly 0.
      upstream = upstream.cwiseProduct((tape.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
    delta = std::move(upstream);
  }
  return want_input_gradient ? delta : Eigen::MatrixXd();
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients grads;
  for (const DenseLayer& layer : layers_) {
    grads.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                     Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return grads;
}

std::size_t Mlp::parameter_count() const {
  std::size_t count = 0;
  for (const DenseLayer& layer : layers_) count += layer.weight.size() + layer.bias.size();
  return count;
}

Eigen::VectorXd flatten_gradients(const MlpGradients& grads) {
  std::size_t count = 0;
  for (const DenseLayer& layer : grads) count += layer.weight.size() + layer.bias.size();
  Eigen::VectorXd flat(count);
  Eigen::Index at = 0;
  for (const DenseLayer& layer : grads) {
    flat.segment(at, layer.weight.size()) = Eigen::Map<const Eigen::VectorXd>(layer.weight.data(), layer.weight.size());
    at += layer.weight.size();
    flat.segment(at, layer.bias.size()) = layer.bias;
    at += layer.bias.size();
  }
  return flat;
}

Eigen::VectorXd Mlp::flatten() const { return flatten_gradients(layers_); }

void Mlp::assign(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) throw DimensionError("MLP assign: wrong parameter count");
  Eigen::Index at = 0;
  for (DenseLayer& layer : layers_) {
    Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()) = flat.segment(at, layer.weight.size());
    at += layer.weight.size();
    layer.bias = flat.segment(at, layer.bias.size());
    at += layer.bias.size();
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const DenseLayer& layer : layers_) {
    std::vector<double> row_major;
    row_major.reserve(layer.weight.size());
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) row_major.push_back(layer.weight(r, c));
    }
    weights.push_back(std::move(row_major));
    biases.push_back(std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size()));
  }
  return {{"format_version", kModelFormatVersion},
          {"layer_dims", dims_},
          {"activation", "relu"},
          {"weights", std::move(weights)},
          {"biases", std::move(biases)}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != kModelFormatVersion) throw SchemaError("model JSON: unsupported format_version");
  if (j.value("activation", "") != "relu") throw SchemaError("model JSON: only relu activation is supported");
  Mlp model(j.at("layer_dims").get<std::vector<int>>());
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  if (weights.size() != model.layers_.size() || biases.size() != model.layers_.size()) {
    throw SchemaError("model JSON: layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < model.layers_.size(); ++l) {
    const auto w = weights[l].get<std::vector<double>>();
    const auto b = biases[l].get<std::vector<double>>();
    DenseLayer& layer = model.layers_[l];
    if (w.size() != static_cast<std::size_t>(layer.weight.size()) || b.size() != static_cast<std::size_t>(layer.bias.size())) {
      throw SchemaError("model JSON: layer " + std::to_string(l) + " has the wrong parameter count");
    }
    std::size_t at = 0;
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = w[at++];
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = b[r];
  }
  return model;
}

}  // namespace bottleneck
