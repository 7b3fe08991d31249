#include <doctest.h>

#include <cmath>
#include <memory>

#include "bottleneck/coalition.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/exact.hpp"
#include "bottleneck/game.hpp"
#include "bottleneck/rng.hpp"
#include "bottleneck/theory.hpp"
#include "oracles.hpp"

using namespace bottleneck;

TEST_CASE("interaction_exact on analytic games") {
  const AdditiveGame additive({1, -2, 3, 0.5, 7, -1});
  const AndGame both(6, {1, 2});
  const ParityGame parity(6);
  for (int m = 0; m <= 4; ++m) {
    CHECK(interaction_exact(additive, 1, 2, m) == 0.0);
    CHECK(interaction_exact(both, 1, 2, m) == 1.0);
    CHECK(interaction_exact(parity, 0, 5, m) == (m % 2 ? 2.0 : -2.0));
  }
  CHECK_THROWS_AS(interaction_exact(parity, 0, 0, 1), ArgumentError);
  CHECK_THROWS_AS(interaction_exact(parity, 0, 1, 5), ArgumentError);
  CHECK_THROWS_AS(interaction_exact(AdditiveGame(std::vector<double>(25, 1.0)), 0, 1, 1), CapacityError);
}

TEST_CASE("interaction_exact and all_interactions_exact match the brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TableGame game = TableGame::random(7, seed);
    const auto all = all_interactions_exact(game);
    REQUIRE(all.size() == 6);
    for (int m = 0; m <= 5; ++m) {
      CHECK(all[m].order == m);
      for (int i = 0; i < 7; ++i) {
        CHECK(std::isnan(all[m].at(i, i)));
        for (int j = 0; j < 7; ++j) {
          if (i == j) continue;
          const double expected = oracle::interaction(game, i, j, m);
          CHECK(all[m].at(i, j) == doctest::Approx(expected).epsilon(1e-12));
          CHECK(all[m].at(i, j) == all[m].at(j, i));
        }
      }
      CHECK(interaction_exact(game, 2, 5, m) == doctest::Approx(oracle::interaction(game, 2, 5, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Shapley values") {
  const AdditiveGame additive({1.5, -2, 3}, 10.0);
  const auto phi = shapley_values_exact(additive);
  CHECK(phi[0] == doctest::Approx(1.5));
  CHECK(phi[1] == doctest::Approx(-2.0));
  CHECK(phi[2] == doctest::Approx(3.0));

  const AndGame both(3, {0, 1});
  CHECK(shapley_value_exact(both, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(shapley_value_exact(both, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(shapley_value_exact(both, 2) == 0.0);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TableGame game = TableGame::random(6, 100 + seed);
    double total = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double phi_i = shapley_value_exact(game, i);
      CHECK(phi_i == doctest::Approx(oracle::shapley(game, i)).epsilon(1e-12));
      total += phi_i;
    }
    CHECK(total == doctest::Approx(game.value(Coalition::full(6)) - game.value(Coalition::empty(6))).epsilon(1e-12));
  }
}

TEST_CASE("Shapley interaction index") {
  CHECK(shapley_interaction_index(AdditiveGame({1, 2, 3, 4}), 0, 3) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(shapley_interaction_index(AndGame(3, {0, 1}), 0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(shapley_interaction_index(ParityGame(6), 0, 1) == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("efficiency weights") {
  CHECK(efficiency_weight(2, 0) == 0.5);
  CHECK(efficiency_weight(10, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(efficiency_weight(10, 8) == doctest::Approx(1.0 / 90).epsilon(1e-15));
  CHECK_THROWS_AS(efficiency_weight(10, 9), ArgumentError);
}

TEST_CASE("efficiency decomposition uses ordered pairs") {
  const AndGame both(3, {0, 1});
  const EfficiencyComponents c = efficiency_decomposition(both);
  CHECK(c.v_empty == 0.0);
  CHECK(c.order_sums[0] == 2.0);  // (0,1) and (1,0)
  CHECK(c.order_sums[1] == 2.0);
  CHECK(c.reconstruction == doctest::Approx(1.0).epsilon(1e-15));
  // Counting each unordered pair once would give 1/2.
  const double unordered = 0.5 * (efficiency_weight(3, 0) * c.order_sums[0] + efficiency_weight(3, 1) * c.order_sums[1]);
  CHECK(unordered == doctest::Approx(0.5));

  const TableGame two = TableGame::random(2, 4);
  const EfficiencyComponents d = efficiency_decomposition(two);
  CHECK(d.reconstruction == doctest::Approx(two.value(Coalition::full(2))).epsilon(1e-14));

  const TableGame six = TableGame::random(6, 8);
  CHECK(efficiency_decomposition(six).reconstruction ==
        doctest::Approx(six.value(Coalition::full(6))).epsilon(1e-12));
}

TEST_CASE("linearity of interactions") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto u = std::make_shared<TableGame>(TableGame::random(6, 200 + seed));
    auto w = std::make_shared<TableGame>(TableGame::random(6, 300 + seed));
    const SumGame sum(u, w);
    const auto iu = all_interactions_exact(*u);
    const auto iw = all_interactions_exact(*w);
    const auto is = all_interactions_exact(sum);
    for (int m = 0; m <= 4; ++m) {
      for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
          if (i != j) CHECK(std::abs(is[m].at(i, j) - iu[m].at(i, j) - iw[m].at(i, j)) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("delta_v_pair") {
  const AdditiveGame constant(std::vector<double>(4, 0.0), 3.0);
  CHECK(delta_v_pair(constant, Coalition::of(4, {0, 1}), Coalition::full(4), 0.5, 1.0) == -3.0);
  const TableGame game = TableGame::random(4, 1);
  CHECK(delta_v_pair(game, Coalition::empty(4), Coalition::of(4, {1, 2}), 0.0, 0.5) ==
        game.value(Coalition::of(4, {1, 2})) - game.value(Coalition::empty(4)));
  CHECK_THROWS_AS(delta_v_pair(game, Coalition::of(4, {0}), Coalition::of(4, {1, 2}), 0.25, 0.5), ArgumentError);
  CHECK_THROWS_AS(delta_v_pair(game, Coalition::of(4, {0}), Coalition::of(4, {0, 1, 2}), 0.25, 0.5), ArgumentError);
}

TEST_CASE("nested-draw expectation for an additive game and an AND game") {
  const AdditiveGame additive({1, 2, 3, 4, 5, 6, 7, 8}, 2.0);
  CHECK(theorem2_rhs(additive, 0.25, 0.5) == doctest::Approx((1 - 2.0) * 2.0).epsilon(1e-13));
  // r1 = 0 keeps the local utilities: E[v(S2) − v(∅)] = r2 Σ a_i.
  CHECK(theorem2_rhs(additive, 0.0, 0.5) == doctest::Approx(0.5 * 36).epsilon(1e-13));

  // AND game on {0,1}, n = 10: E = P(S2 ⊇ {0,1}) − (r2/r1) P(S1 ⊇ {0,1}) under uniform draws.
  const AndGame both(10, {0, 1});
  const double p2 = oracle::choose(8, 3) / oracle::choose(10, 5);
  const double p1 = oracle::choose(8, 0) / oracle::choose(10, 2);
  CHECK(theorem2_rhs(both, 0.2, 0.5) == doctest::Approx(p2 - 2.5 * p1).epsilon(1e-12));
  CHECK_THROWS_AS(theorem2_rhs(both, 0.25, 0.5), ArgumentError);
}

TEST_CASE("nested-draw expectation matches a Monte Carlo mean") {
  const TableGame game = TableGame::random(8, 77);
  Rng rng = make_rng(1234);
  for (auto [r1, r2] : {std::pair{0.25, 0.5}, std::pair{0.0, 0.75}}) {
    const int k1 = static_cast<int>(r1 * 8);
    const int k2 = static_cast<int>(r2 * 8);
    const int draws = 40000;
    double sum = 0.0;
    double sq = 0.0;
    for (int t = 0; t < draws; ++t) {
      std::vector<int> perm{0, 1, 2, 3, 4, 5, 6, 7};
      std::shuffle(perm.begin(), perm.end(), rng);
      std::uint64_t b1 = 0;
      std::uint64_t b2 = 0;
      for (int q = 0; q < k2; ++q) {
        b2 |= 1ULL << perm[q];
        if (q < k1) b1 |= 1ULL << perm[q];
      }
      const double d = delta_v_pair(game, Coalition(8, b1), Coalition(8, b2), r1, r2);
      sum += d;
      sq += d * d;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - theorem2_rhs(game, r1, r2)) <= 3.0 * se);
  }
}
