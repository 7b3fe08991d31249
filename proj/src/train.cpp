#include "bottleneck/train.hpp"

#include <cmath>
#include <numeric>

#include "bottleneck/errors.hpp"
#include "bottleneck/exact.hpp"
#include "bottleneck/losses.hpp"
#include "bottleneck/rng.hpp"

namespace bottleneck {

std::string to_string(DnnType type) {
  switch (type) {
    case DnnType::Normal: return "normal";
    case DnnType::LowOrder: return "low-order";
    case DnnType::MiddleOrder: return "middle-order";
    case DnnType::HighOrder: return "high-order";
    case DnnType::HighOrderRobust: return "high-order-robustness";
  }
  return "unknown";
}

DnnType dnn_type_from_string(const std::string& name) {
  for (DnnType t : all_dnn_types()) {
    if (to_string(t) == name) return t;
  }
  throw ConfigError("unknown DNN type '" + name + "'");
}

std::vector<DnnType> all_dnn_types() {
  return {DnnType::Normal, DnnType::LowOrder, DnnType::MiddleOrder, DnnType::HighOrder, DnnType::HighOrderRobust};
}

void TrainConfig::apply(DnnType type) {
  lambda1 = 0.0;
  lambda2 = 0.0;
  switch (type) {
    case DnnType::Normal:
      break;
    case DnnType::LowOrder:
      lambda2 = 1.0;
      penalize = {0.7, 1.0};
      break;
    case DnnType::MiddleOrder:
      lambda1 = 1.0;
      encourage = {0.3, 0.7};
      break;
    case DnnType::HighOrder:
      lambda2 = 1.0;
      penalize = {0.0, 0.5};
      break;
    case DnnType::HighOrderRobust:
      lambda1 = 1.0;
      lambda2 = 1.0;
      encourage = {0.6, 1.0};
      penalize = {0.0, 0.5};
      break;
  }
}

void TrainConfig::validate(int n) const {
  if (hidden_layers < 0 || width < 1) throw ConfigError("train: invalid architecture");
  if (epochs < 0 || batch_size < 1) throw ConfigError("train: epochs must be >= 0 and batch size >= 1");
  if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train: learning rate must be positive and momentum in [0, 1)");
  }
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("train: loss weights must be non-negative");
  auto check = [n](const OrderRange& r, const char* what) {
    if (!(r.r1 >= 0.0 && r.r1 < r.r2 && r.r2 <= 1.0)) {
      throw ConfigError(std::string("train: ") + what + " range must satisfy 0 <= r1 < r2 <= 1");
    }
    if (count_for_ratio(n, r.r1) == count_for_ratio(n, r.r2)) {
      throw ConfigError(std::string("train: ") + what + " range is degenerate for this n");
    }
  };
  if (lambda1 > 0.0) check(encourage, "encourage");
  if (lambda2 > 0.0) check(penalize, "penalize");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"hidden_layers", hidden_layers},
          {"width", width},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"seed", seed},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"encourage", {encourage.r1, encourage.r2}},
          {"penalize", {penalize.r1, penalize.r2}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.width = j.value("width", c.width);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.seed = j.value("seed", c.seed);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    if (j.contains("encourage")) c.encourage = {j.at("encourage").at(0).get<double>(), j.at("encourage").at(1).get<double>()};
    if (j.contains("penalize")) c.penalize = {j.at("penalize").at(0).get<double>(), j.at("penalize").at(1).get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

nlohmann::json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"loss_classification", loss_classification},
          {"loss_encourage", loss_encourage},
          {"loss_penalize", loss_penalize},
          {"train_accuracy", train_accuracy},
          {"test_accuracy", test_accuracy}};
}

double accuracy(const Mlp& model, const Dataset& data, std::span<const int> indices) {
  if (indices.empty()) return 0.0;
  constexpr std::size_t kChunk = 1024;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const auto part = indices.subspan(start, std::min(kChunk, indices.size() - start));
    const Eigen::MatrixXd logits = model.forward(data.batch(part));
    for (std::size_t c = 0; c < part.size(); ++c) {
      Eigen::Index best = 0;
      logits.col(static_cast<Eigen::Index>(c)).maxCoeff(&best);
      correct += best == data.labels[part[c]];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

namespace {

void add_scaled(MlpGradients& total, const MlpGradients& part, double weight) {
  for (std::size_t l = 0; l < total.size(); ++l) {
    total[l].weight += weight * part[l].weight;
    total[l].bias += weight * part[l].bias;
  }
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
  config.validate(data.n());
  if (data.train_indices.empty()) throw ConfigError("train: empty training split");
  TrainResult result{Mlp::preset(data.n(), data.classes, config.hidden_layers, config.width, config.seed), {}};
  Mlp& model = result.model;
  MlpGradients velocity = model.zero_gradients();
  const std::vector<double> baseline = data.baseline_vector();

  std::vector<int> order = data.train_indices;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = make_rng(config.seed, 0x7A1, static_cast<std::uint64_t>(epoch));
    for (std::size_t t = order.size() - 1; t > 0; --t) std::swap(order[t], order[uniform_index(shuffle_rng, t + 1)]);

    EpochRecord record;
    record.epoch = epoch;
    double weight_sum = 0.0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size), ++step) {
      const std::span<const int> rows(order.data() + start,
                                      std::min(static_cast<std::size_t>(config.batch_size), order.size() - start));
      const Eigen::MatrixXd inputs = data.batch(rows);
      std::vector<int> labels;
      labels.reserve(rows.size());
      for (int r : rows) labels.push_back(data.labels[r]);
      const Batch batch{inputs, labels, baseline};

      LossResult total = loss_classification(model, batch);
      double encourage_value = 0.0;
      double penalize_value = 0.0;
      if (config.lambda1 > 0.0) {
        Rng rng = make_rng(config.seed, 0x7A2, static_cast<std::uint64_t>(epoch), step);
        const LossResult l = loss_encourage(model, batch, config.encourage.r1, config.encourage.r2, rng);
        encourage_value = l.value;
        add_scaled(total.gradients, l.gradients, config.lambda1);
      }
      if (config.lambda2 > 0.0) {
        Rng rng = make_rng(config.seed, 0x7A3, static_cast<std::uint64_t>(epoch), step);
        const LossResult l = loss_penalize(model, batch, config.penalize.r1, config.penalize.r2, rng);
        penalize_value = l.value;
        add_scaled(total.gradients, l.gradients, config.lambda2);
      }
      const double combined = total.value + config.lambda1 * encourage_value + config.lambda2 * penalize_value;
      if (!std::isfinite(combined)) {
        throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + " (try a smaller learning rate)");
      }
      auto& layers = model.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        velocity[l].weight = config.momentum * velocity[l].weight - config.learning_rate * total.gradients[l].weight;
        velocity[l].bias = config.momentum * velocity[l].bias - config.learning_rate * total.gradients[l].bias;
        layers[l].weight += velocity[l].weight;
        layers[l].bias += velocity[l].bias;
      }
      const double w = static_cast<double>(rows.size());
      record.loss_classification += w * total.value;
      record.loss_encourage += w * encourage_value;
      record.loss_penalize += w * penalize_value;
      weight_sum += w;
    }
    if (!model.flatten().allFinite() || !std::isfinite(record.loss_classification)) {
      throw NumericError("training diverged: non-finite parameters or loss after epoch " + std::to_string(epoch) +
                         " (try a smaller learning rate)");
    }
    record.loss_classification /= weight_sum;
    record.loss_encourage /= weight_sum;
    record.loss_penalize /= weight_sum;
    record.train_accuracy = accuracy(model, data, data.train_indices);
    record.test_accuracy = accuracy(model, data, data.test_indices);
    result.history.push_back(record);
    if (on_epoch) on_epoch(record, model);
  }
  return result;
}

}  // namespace bottleneck
