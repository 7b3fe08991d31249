#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bottleneck/dataset.hpp"
#include "bottleneck/mlp.hpp"

namespace bottleneck {

struct OrderRange {
  double r1 = 0.0;
  double r2 = 1.0;
};

enum class DnnType { Normal, LowOrder, MiddleOrder, HighOrder, HighOrderRobust };

std::string to_string(DnnType type);
DnnType dnn_type_from_string(const std::string& name);
std::vector<DnnType> all_dnn_types();

struct TrainConfig {
  int hidden_layers = 4;
  int width = 100;
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double lambda1 = 0.0;  // weight of the encouraging loss
  double lambda2 = 0.0;  // weight of the penalizing loss
  OrderRange encourage{0.3, 0.7};
  OrderRange penalize{0.0, 0.5};

  /// Sets λ1, λ2 and both ranges for the given type; other fields untouched.
  void apply(DnnType type);
  void validate(int n) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;
  double loss_classification = 0.0;
  double loss_encourage = 0.0;
  double loss_penalize = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Mlp model;
  std::vector<EpochRecord> history;
};

/// Called after every epoch with the record and the model as it stands.
using EpochCallback = std::function<void(const EpochRecord&, const Mlp&)>;

/// Mini-batch SGD with momentum on
///   cross-entropy + λ1 · encourage loss + λ2 · penalize loss.
/// Deterministic given the config seed. A non-finite loss aborts with NumericError.
TrainResult train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});

/// Fraction of the given samples classified correctly.
double accuracy(const Mlp& model, const Dataset& data, std::span<const int> indices);

}  // namespace bottleneck
