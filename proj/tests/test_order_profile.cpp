#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bottleneck/errors.hpp"
#include "bottleneck/exact.hpp"
#include "bottleneck/game.hpp"
#include "bottleneck/order_profile.hpp"
#include "oracles.hpp"

using namespace bottleneck;

TEST_CASE("order_from_relative") {
  CHECK(order_from_relative(12, 0.0) == 0);
  CHECK(order_from_relative(12, 1.0) == 10);
  CHECK(order_from_relative(12, 0.5) == 6);
  CHECK(default_relative_orders().size() == 13);
}

TEST_CASE("build_plan") {
  PlanConfig pc;
  pc.n = 10;
  pc.available_samples = 30;
  pc.relative_orders = default_relative_orders();
  const SamplingPlan a = build_plan(pc, 5);
  const SamplingPlan b = build_plan(pc, 5);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.digest() == b.digest());
  CHECK(a.samples.size() == 30);
  for (const auto& pairs : a.pairs) CHECK(pairs.size() == 45);
  CHECK(a.orders.front() == 0);
  CHECK(a.orders.back() == 8);
  CHECK(SamplingPlan::from_json(a.to_json()).digest() == a.digest());

  PlanConfig big = pc;
  big.available_samples = 500;
  CHECK(build_plan(big, 1).samples.size() == 100);

  PlanConfig grid;
  grid.n = 64;
  grid.available_samples = 5;
  grid.grid = GridSpec{8, 8};
  grid.radius = 2;
  grid.pairs_per_sample = 200;
  const SamplingPlan g = build_plan(grid, 3);
  for (const auto& pairs : g.pairs) {
    CHECK(pairs.size() == 200);
    for (auto [i, j] : pairs) {
      CHECK(i != j);
      CHECK(grid.grid->chebyshev(i, j) <= 2);
    }
  }

  PlanConfig bad = pc;
  bad.radius = 2;
  CHECK_THROWS_AS(build_plan(bad, 1), ConfigError);
}

TEST_CASE("estimate_interaction") {
  Rng rng = make_rng(3);
  const AndGame both(10, {2, 7});
  const InteractionEstimate e = estimate_interaction(both, 2, 7, 4, 20, rng);
  CHECK(e.mean == 1.0);
  CHECK(e.stderr_ == 0.0);
  CHECK(estimate_interaction(AdditiveGame(std::vector<double>(10, 1.5)), 0, 1, 4, 20, rng).mean == 0.0);

  const TableGame game = TableGame::random(10, 21);
  const double exact = oracle::interaction(game, 1, 4, 4);
  const InteractionEstimate sampled = estimate_interaction(game, 1, 4, 4, 60, rng);
  CHECK_FALSE(sampled.exact);
  CHECK(std::abs(sampled.mean - exact) <= 3.0 * sampled.stderr_);
  const InteractionEstimate full = estimate_interaction(game, 1, 4, 4, 70, rng);
  CHECK(full.exact);
  CHECK(full.mean == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("estimator variance shrinks with more contexts") {
  double small = 0.0;
  double large = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TableGame game = TableGame::random(14, seed);
    Rng rng = make_rng(seed, 1);
    small += estimate_interaction(game, 0, 1, 6, 25, rng).stderr_;
    large += estimate_interaction(game, 0, 1, 6, 100, rng).stderr_;
  }
  CHECK(large <= small);
}

TEST_CASE("profile normalization") {
  const OrderProfile flat = profile_from_raw(10, {0, 1, 2}, {3.0, 3.0, 3.0});
  CHECK(flat.J == std::vector<double>{1.0, 1.0, 1.0});
  const OrderProfile p = profile_from_raw(10, {0, 4, 8}, {2.0, 1.0, 1.0});
  CHECK(p.J[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(p.J[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(profile_from_raw(10, {3}, {0.7}).J == std::vector<double>{1.0});
}

TEST_CASE("strength_profile matches exact interactions and is worker-independent") {
  std::vector<TableGame> tables;
  for (std::uint64_t s = 0; s < 4; ++s) tables.push_back(TableGame::random(8, 40 + s));
  std::vector<const GameEvaluator*> games;
  for (const auto& t : tables) games.push_back(&t);
  PlanConfig pc;
  pc.n = 8;
  pc.available_samples = 4;
  pc.contexts = 1000;
  const SamplingPlan plan = build_plan(pc, 9);
  const OrderProfile one = strength_profile(games, plan, 1);
  const OrderProfile three = strength_profile(games, plan, 3);
  CHECK(one.J == three.J);
  CHECK(one.raw_strength == three.raw_strength);

  for (std::size_t o = 0; o < plan.orders.size(); ++o) {
    double expected = 0.0;
    for (const auto& t : tables) {
      double sum = 0.0;
      for (int i = 0; i < 8; ++i) {
        for (int j = i + 1; j < 8; ++j) sum += std::abs(oracle::interaction(t, i, j, plan.orders[o]));
      }
      expected += sum / 28.0;
    }
    CHECK(one.raw_strength[o] == doctest::Approx(expected / 4.0).epsilon(1e-12));
  }
  double mean_j = 0.0;
  for (double j : one.J) mean_j += j;
  CHECK(mean_j / static_cast<double>(one.J.size()) == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& row : one.per_sample_J) {
    double m = 0.0;
    for (double j : row) m += j;
    CHECK(m / static_cast<double>(row.size()) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("instability") {
  OrderProfile a = profile_from_raw(6, {0}, {1.0});
  OrderProfile b = a;
  a.per_sample_J = {{0.9}};
  b.per_sample_J = {{1.1}};
  const std::vector<OrderProfile> two{a, b};
  CHECK(instability(two) == doctest::Approx(0.2).epsilon(1e-12));
  const std::vector<OrderProfile> same{a, a, a};
  CHECK(instability(same) == 0.0);
  OrderProfile c = profile_from_raw(6, {0, 1}, {1.0, 1.0});
  const std::vector<OrderProfile> mismatched{a, c};
  CHECK_THROWS_AS(instability(mismatched), ArgumentError);
}

TEST_CASE("profile CSV round trip") {
  const OrderProfile p = profile_from_raw(12, {0, 5, 10}, {0.3, 0.1, 0.2});
  std::stringstream s;
  write_profile_csv(p, s);
  CHECK(s.str().rfind("order_m,relative_order,raw_strength,J\n", 0) == 0);
  const OrderProfile q = read_profile_csv(s, 12);
  CHECK(q.orders == p.orders);
  CHECK(q.J == p.J);
  CHECK(q.raw_strength == p.raw_strength);
  CHECK(OrderProfile::from_json(p.to_json()).J == p.J);
}
