#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "bottleneck/dataset.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/losses.hpp"
#include "bottleneck/mlp.hpp"
#include "bottleneck/order_profile.hpp"
#include "bottleneck/train.hpp"
#include "oracles.hpp"

using namespace bottleneck;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

// Straightforward forward pass written independently of Mlp::forward.
Eigen::VectorXd reference_forward(const Mlp& model, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> z(static_cast<std::size_t>(layers[l].weight.rows()));
    for (Eigen::Index r = 0; r < layers[l].weight.rows(); ++r) {
      double s = layers[l].bias(r);
      for (Eigen::Index c = 0; c < layers[l].weight.cols(); ++c) s += layers[l].weight(r, c) * a[c];
      z[r] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
    }
    a = z;
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300});
}

template <typename LossFn>
Eigen::VectorXd numeric_gradient(Mlp model, LossFn loss, double h = 1e-6) {
  const Eigen::VectorXd theta = model.flatten();
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd p = theta;
    p(k) += h;
    model.assign(p);
    const double up = loss(model);
    p(k) -= 2 * h;
    model.assign(p);
    const double down = loss(model);
    g(k) = (up - down) / (2 * h);
  }
  return g;
}

struct Fixture {
  Mlp model = Mlp::initialized({6, 16, 12, 3}, 5);
  Eigen::MatrixXd inputs = random_matrix(6, 9, 1);
  std::vector<int> labels{0, 1, 2, 2, 1, 0, 0, 2, 1};
  std::vector<double> baseline{0.1, -0.2, 0.3, 0.0, 0.5, -0.4};
};

}  // namespace

TEST_CASE("forward pass") {
  Mlp zero({4, 3, 2});
  zero.layers()[1].bias << 0.5, -1.5;
  const Eigen::MatrixXd z = zero.forward(random_matrix(4, 5, 2));
  for (int c = 0; c < 5; ++c) {
    CHECK(z(0, c) == 0.5);
    CHECK(z(1, c) == -1.5);
  }
  Mlp affine({3, 2});
  affine.layers()[0].weight << 1, 2, 3, 4, 5, 6;
  affine.layers()[0].bias << 1, -1;
  const Eigen::Vector3d x(1, 0, -1);
  const Eigen::VectorXd out = affine.forward(Eigen::MatrixXd(x));
  CHECK(out(0) == -1.0);
  CHECK(out(1) == -3.0);

  const Mlp model = Mlp::initialized({7, 20, 20, 4}, 9);
  const Eigen::MatrixXd batch = random_matrix(7, 10, 3);
  const Eigen::MatrixXd logits = model.forward(batch);
  for (int c = 0; c < 10; ++c) {
    CHECK((logits.col(c) - reference_forward(model, batch.col(c))).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(model.forward(random_matrix(6, 2, 1)), DimensionError);
}

TEST_CASE("model serialization is lossless") {
  const Mlp model = Mlp::preset(12, 2, 4, 100, 3);
  const Mlp copy = Mlp::from_json(nlohmann::json::parse(model.to_json().dump()));
  const Eigen::MatrixXd x = random_matrix(12, 8, 4);
  CHECK(copy.forward(x) == model.forward(x));
  CHECK(model.to_json()["format_version"] == kModelFormatVersion);
  nlohmann::json broken = model.to_json();
  broken["layer_dims"] = {12, 3};
  CHECK_THROWS_AS(Mlp::from_json(broken), SchemaError);
}

TEST_CASE("softmax and cross-entropy") {
  const Eigen::Vector3d uniform(0.3, 0.3, 0.3);
  CHECK(softmax_cross_entropy(uniform, 1).value == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  const Eigen::Vector3d z(1, 0, -1);
  const LogitLoss l = softmax_cross_entropy(z, 0);
  CHECK(l.value == doctest::Approx(0.4076).epsilon(1e-4));
  const Eigen::VectorXd p = softmax(z);
  CHECK(p(0) == doctest::Approx(0.66524).epsilon(1e-5));
  CHECK(p(2) == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((softmax(z.array() + 100.0) - p).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(softmax_cross_entropy(z, 3), ArgumentError);

  for (int label = 0; label < 3; ++label) {
    const Eigen::Vector3d w(0.7, -1.2, 2.5);
    Eigen::VectorXd fd(3);
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d up = w;
      Eigen::Vector3d down = w;
      up(k) += 1e-6;
      down(k) -= 1e-6;
      fd(k) = (softmax_cross_entropy(up, label).value - softmax_cross_entropy(down, label).value) / 2e-6;
    }
    CHECK(relative_error(softmax_cross_entropy(w, label).gradient, fd) <= 1e-6);
  }
}

TEST_CASE("negative entropy") {
  CHECK(negative_entropy(Eigen::Vector3d(2, 2, 2)).value == doctest::Approx(-std::log(3.0)).epsilon(1e-14));
  CHECK(negative_entropy(Eigen::Vector3d(1, 0, -1)).value == doctest::Approx(-0.8324).epsilon(1e-4));
  CHECK(negative_entropy(Eigen::Vector3d(60, 0, 0)).value == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("nested subset sampling") {
  Rng rng = make_rng(1);
  for (int t = 0; t < 100; ++t) {
    const NestedDraw d = sample_nested_subsets(8, 0.0, 0.5, rng);
    CHECK(d.s1.is_empty());
    CHECK(d.s2.size() == 4);
    const NestedDraw e = sample_nested_subsets(8, 0.25, 1.0, rng);
    CHECK(e.s2 == Coalition::full(8));
    CHECK(e.s1.size() == 2);
    const NestedDraw f = sample_nested_subsets(8, 0.25, 0.75, rng);
    CHECK(f.s1.is_proper_subset_of(f.s2));
  }
  CHECK_THROWS_AS(sample_nested_subsets(8, 0.26, 0.3, rng), ArgumentError);

  // Chi-square goodness of fit of S2 against the uniform law over C(8,4) = 70 subsets.
  std::map<std::uint64_t, int> counts;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) counts[sample_nested_subsets(8, 0.25, 0.5, rng).s2.bits()]++;
  CHECK(counts.size() == 70);
  const double expected = draws / 70.0;
  double chi2 = 0.0;
  for (const auto& [mask, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 69 degrees of freedom; the 99.9% quantile is about 111.
  CHECK(chi2 < 111.0);
}

TEST_CASE("delta_logits") {
  const Fixture f;
  const std::vector<double> x{1.0, -0.5, 2.0, 0.3, -1.1, 0.8};
  const Coalition s1 = Coalition::of(6, {0, 3});
  const Coalition s2 = Coalition::of(6, {0, 1, 3, 5});
  const Eigen::VectorXd d = delta_logits(f.model, x, f.baseline, s1, s2, 1.0 / 3, 2.0 / 3);
  const auto masked = [&](const Coalition& s) {
    Eigen::VectorXd in(6);
    for (int i = 0; i < 6; ++i) in(i) = s.contains(i) ? x[i] : f.baseline[i];
    return reference_forward(f.model, in);
  };
  CHECK((d - (masked(s2) - 2.0 * masked(s1))).cwiseAbs().maxCoeff() <= 1e-12);

  Mlp flat({6, 5, 3});
  flat.layers()[1].bias << 1.0, -2.0, 0.5;
  const Eigen::VectorXd b = delta_logits(flat, x, f.baseline, s1, s2, 1.0 / 3, 2.0 / 3);
  CHECK(b(0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(b(1) == doctest::Approx(2.0).epsilon(1e-15));

  const Eigen::VectorXd zero_r1 = delta_logits(f.model, x, f.baseline, Coalition::empty(6), s2, 0.0, 2.0 / 3);
  CHECK((zero_r1 - (masked(s2) - masked(Coalition::empty(6)))).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(delta_logits(f.model, x, f.baseline, s2, s1, 1.0 / 3, 2.0 / 3), ArgumentError);
}

TEST_CASE("loss values at their limits") {
  const Fixture f;
  const Batch batch{f.inputs, f.labels, f.baseline};
  Mlp flat({6, 4, 3});
  std::vector<NestedDraw> draws;
  Rng rng = make_rng(2);
  for (int c = 0; c < 9; ++c) draws.push_back(sample_nested_subsets(6, 0.0, 0.5, rng));
  CHECK(loss_encourage(flat, batch, 0.0, 0.5, draws).value == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(loss_penalize(flat, batch, 0.0, 0.5, draws).value == doctest::Approx(-std::log(3.0)).epsilon(1e-14));
  CHECK(loss_classification(flat, batch).value == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central differences") {
  const Fixture f;
  const Batch batch{f.inputs, f.labels, f.baseline};
  Rng rng = make_rng(8);
  for (auto [r1, r2] : {std::pair{0.0, 0.5}, std::pair{1.0 / 3, 5.0 / 6}, std::pair{0.5, 1.0}}) {
    std::vector<NestedDraw> draws;
    for (int c = 0; c < 9; ++c) draws.push_back(sample_nested_subsets(6, r1, r2, rng));
    const Eigen::VectorXd plus = flatten_gradients(loss_encourage(f.model, batch, r1, r2, draws).gradients);
    const Eigen::VectorXd plus_fd =
        numeric_gradient(f.model, [&](const Mlp& m) { return loss_encourage(m, batch, r1, r2, draws).value; });
    CHECK(relative_error(plus, plus_fd) <= 1e-5);
    const Eigen::VectorXd minus = flatten_gradients(loss_penalize(f.model, batch, r1, r2, draws).gradients);
    const Eigen::VectorXd minus_fd =
        numeric_gradient(f.model, [&](const Mlp& m) { return loss_penalize(m, batch, r1, r2, draws).value; });
    CHECK(relative_error(minus, minus_fd) <= 1e-5);
  }
  const Eigen::VectorXd cls = flatten_gradients(loss_classification(f.model, batch).gradients);
  const Eigen::VectorXd cls_fd = numeric_gradient(f.model, [&](const Mlp& m) { return loss_classification(m, batch).value; });
  CHECK(relative_error(cls, cls_fd) <= 1e-5);
}

TEST_CASE("training") {
  TabularSignal linear{1.0, 0.0, 0.0, 8, 0.0};
  const Dataset data = gen_tabular(8, 2, 2000, 4, linear);
  TrainConfig config;
  config.hidden_layers = 1;
  config.width = 16;
  config.epochs = 15;
  config.seed = 3;
  std::vector<EpochRecord> seen;
  const TrainResult a = train(config, data, [&](const EpochRecord& r, const Mlp&) { seen.push_back(r); });
  CHECK(a.history.size() == 15);
  CHECK(seen.size() == 15);
  CHECK(a.history.back().test_accuracy >= 0.95);

  const TrainResult b = train(config, data);
  CHECK(a.model.flatten() == b.model.flatten());
  CHECK(a.history.back().loss_classification == b.history.back().loss_classification);

  TrainConfig diverge = config;
  diverge.learning_rate = 1e6;
  diverge.epochs = 5;
  CHECK_THROWS_AS(train(diverge, data), NumericError);

  TrainConfig degenerate = config;
  degenerate.lambda2 = 1.0;
  degenerate.penalize = {0.5, 0.52};
  CHECK_THROWS_AS(train(degenerate, data), ConfigError);
}

TEST_CASE("dnn type presets") {
  TrainConfig c;
  c.apply(DnnType::Normal);
  CHECK(c.lambda1 == 0.0);
  CHECK(c.lambda2 == 0.0);
  c.apply(DnnType::LowOrder);
  CHECK(c.lambda2 == 1.0);
  CHECK(c.penalize.r1 == 0.7);
  CHECK(c.penalize.r2 == 1.0);
  c.apply(DnnType::MiddleOrder);
  CHECK(c.lambda1 == 1.0);
  CHECK(c.lambda2 == 0.0);
  CHECK(c.encourage.r1 == 0.3);
  CHECK(c.encourage.r2 == 0.7);
  c.apply(DnnType::HighOrder);
  CHECK(c.lambda2 == 1.0);
  CHECK(c.penalize.r1 == 0.0);
  CHECK(c.penalize.r2 == 0.5);
  c.apply(DnnType::HighOrderRobust);
  CHECK(c.lambda1 == 1.0);
  CHECK(c.lambda2 == 1.0);
  CHECK(c.encourage.r1 == 0.6);
  CHECK(c.penalize.r2 == 0.5);
  CHECK(dnn_type_from_string("high-order-robustness") == DnnType::HighOrderRobust);
  CHECK_THROWS_AS(dnn_type_from_string("medium"), ConfigError);
  CHECK(TrainConfig::from_json(c.to_json()).to_json() == c.to_json());
}
