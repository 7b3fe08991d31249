#include "bottleneck/order_profile.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_set>

#include "bottleneck/digest.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/exact.hpp"
#include "bottleneck/parallel.hpp"
#include "bottleneck/text.hpp"

namespace bottleneck {
namespace {

// Stream tags for plan generation.
constexpr std::uint64_t kSampleStream = 0x5A3D1E;
constexpr std::uint64_t kPairStream = 0x9A125;
constexpr std::uint64_t kContextStream = 0xC0E7E;

// First `take` entries of a seeded Fisher–Yates shuffle of `items`.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> items, std::size_t take, Rng& rng) {
  take = std::min(take, items.size());
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t pick = k + uniform_index(rng, items.size() - k);
    std::swap(items[k], items[pick]);
  }
  items.resize(take);
  return items;
}

}  // namespace

std::vector<double> default_relative_orders() {
  return {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0};
}

int order_from_relative(int n, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ArgumentError("relative order must lie in [0, 1]");
  return std::clamp(count_for_ratio(n, rho), 0, std::max(0, n - 2));
}

nlohmann::json SamplingPlan::to_json() const {
  nlohmann::json pair_lists = nlohmann::json::array();
  for (const auto& list : pairs) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [i, j] : list) items.push_back({i, j});
    pair_lists.push_back(std::move(items));
  }
  nlohmann::json j = {{"seed", seed},       {"n", n},
                      {"samples", samples}, {"pairs", pair_lists},
                      {"orders", orders},   {"relative_orders", relative_orders},
                      {"contexts", contexts}};
  j["radius"] = radius ? nlohmann::json(*radius) : nlohmann::json(nullptr);
  return j;
}

SamplingPlan SamplingPlan::from_json(const nlohmann::json& j) {
  SamplingPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.n = j.at("n").get<int>();
  plan.samples = j.at("samples").get<std::vector<int>>();
  for (const auto& list : j.at("pairs")) {
    std::vector<std::pair<int, int>> items;
    for (const auto& p : list) items.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    plan.pairs.push_back(std::move(items));
  }
  plan.orders = j.at("orders").get<std::vector<int>>();
  plan.relative_orders = j.at("relative_orders").get<std::vector<double>>();
  plan.contexts = j.at("contexts").get<int>();
  if (j.contains("radius") && !j.at("radius").is_null()) plan.radius = j.at("radius").get<int>();
  return plan;
}

std::string SamplingPlan::digest() const { return json_digest(to_json()); }

SamplingPlan build_plan(const PlanConfig& config, std::uint64_t seed) {
  if (config.n < 2) throw ConfigError("plan: need at least two variables");
  if (config.available_samples < 1 || config.max_samples < 1) throw ConfigError("plan: sample counts must be positive");
  if (config.contexts < 1) throw ConfigError("plan: contexts must be positive");
  if (config.radius && !config.grid) throw ConfigError("plan: a neighborhood radius needs a grid game");
  if (config.radius && *config.radius < 1) throw ConfigError("plan: radius must be positive");
  if (config.grid && config.grid->cells() != config.n) throw ConfigError("plan: grid cell count differs from n");
  for (double rho : config.relative_orders) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("plan: relative orders must lie in [0, 1]");
  }

  SamplingPlan plan;
  plan.seed = seed;
  plan.n = config.n;
  plan.contexts = config.contexts;
  plan.radius = config.radius;
  plan.relative_orders = config.relative_orders;

  std::vector<int> ids(config.available_samples);
  std::iota(ids.begin(), ids.end(), 0);
  if (config.available_samples <= config.max_samples) {
    plan.samples = ids;
  } else {
    Rng rng = make_rng(seed, kSampleStream);
    plan.samples = draw_without_replacement(ids, config.max_samples, rng);
    std::sort(plan.samples.begin(), plan.samples.end());
  }

  std::vector<std::pair<int, int>> eligible;
  for (int i = 0; i < config.n; ++i) {
    for (int j = i + 1; j < config.n; ++j) {
      if (config.radius && config.grid->chebyshev(i, j) > *config.radius) continue;
      eligible.emplace_back(i, j);
    }
  }
  if (eligible.empty()) throw ConfigError("plan: no eligible variable pairs");
  const bool every_pair = config.all_pairs || (!config.grid && config.n <= 12);
  if (!every_pair && config.pairs_per_sample < 1) throw ConfigError("plan: pairs_per_sample must be positive");
  for (int sample : plan.samples) {
    if (every_pair) {
      plan.pairs.push_back(eligible);
    } else {
      Rng rng = make_rng(seed, kPairStream, static_cast<std::uint64_t>(sample));
      auto drawn = draw_without_replacement(eligible, static_cast<std::size_t>(config.pairs_per_sample), rng);
      std::sort(drawn.begin(), drawn.end());
      plan.pairs.push_back(std::move(drawn));
    }
  }

  if (config.relative_orders.empty()) {
    for (int m = 0; m <= config.n - 2; ++m) plan.orders.push_back(m);
  } else {
    for (double rho : config.relative_orders) plan.orders.push_back(order_from_relative(config.n, rho));
    std::sort(plan.orders.begin(), plan.orders.end());
    plan.orders.erase(std::unique(plan.orders.begin(), plan.orders.end()), plan.orders.end());
  }
  return plan;
}

InteractionEstimate estimate_interaction(const GameEvaluator& game, int i, int j, int m, int contexts, Rng& rng) {
  const int n = game.n();
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) throw ArgumentError("estimate_interaction: bad variable pair");
  if (m < 0 || m > n - 2) throw ArgumentError("estimate_interaction: order m must lie in [0, n−2]");
  if (contexts < 1) throw ArgumentError("estimate_interaction: contexts must be positive");

  const Coalition pool = Coalition::full(n).without(i).without(j);
  const std::uint64_t total = binomial(n - 2, m);
  std::vector<Coalition> chosen;
  const bool exact = static_cast<std::uint64_t>(contexts) >= total;
  if (exact) {
    chosen = enumerate_subsets_of_size(pool, m);
  } else {
    // Floyd's algorithm: `contexts` distinct ranks, uniform over all subsets of that size.
    std::unordered_set<std::uint64_t> picked;
    picked.reserve(static_cast<std::size_t>(contexts) * 2);
    for (std::uint64_t t = total - static_cast<std::uint64_t>(contexts); t < total; ++t) {
      const std::uint64_t r = uniform_index(rng, t + 1);
      if (!picked.insert(r).second) picked.insert(t);
    }
    std::vector<std::uint64_t> ranks(picked.begin(), picked.end());
    std::sort(ranks.begin(), ranks.end());
    chosen.reserve(ranks.size());
    for (std::uint64_t r : ranks) chosen.push_back(unrank_subset(pool, m, r));
  }

  std::vector<Coalition> queries;
  queries.reserve(4 * chosen.size());
  for (const Coalition& s : chosen) {
    queries.push_back(s.with(i).with(j));
    queries.push_back(s.with(i));
    queries.push_back(s.with(j));
    queries.push_back(s);
  }
  std::vector<double> v(queries.size());
  game.values(queries, v);

  const std::size_t k = chosen.size();
  std::vector<double> deltas(k);
  for (std::size_t c = 0; c < k; ++c) deltas[c] = v[4 * c] - v[4 * c + 1] - v[4 * c + 2] + v[4 * c + 3];
  const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(k);

  InteractionEstimate est;
  est.mean = mean;
  est.exact = exact;
  est.contexts_used = k;
  if (!exact && k > 1) {
    double ss = 0.0;
    for (double d : deltas) ss += (d - mean) * (d - mean);
    est.stderr_ = std::sqrt(ss / static_cast<double>(k - 1)) / std::sqrt(static_cast<double>(k));
  }
  return est;
}

namespace {

std::vector<double> normalize_by_mean(const std::vector<double>& raw) {
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
  std::vector<double> out(raw.size(), 1.0);
  // A profile with no interaction at any order carries no shape; report it flat.
  if (mean == 0.0) return out;
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k] / mean;
  return out;
}

std::vector<double> relative_positions(int n, const std::vector<int>& orders) {
  std::vector<double> out;
  out.reserve(orders.size());
  for (int m : orders) out.push_back(n > 2 ? static_cast<double>(m) / (n - 2) : 0.0);
  return out;
}

}  // namespace

OrderProfile profile_from_raw(int n, std::vector<int> orders, std::vector<double> raw) {
  if (orders.empty() || orders.size() != raw.size()) throw ArgumentError("profile: orders and strengths must align");
  OrderProfile p;
  p.n = n;
  p.relative_orders = relative_positions(n, orders);
  p.orders = std::move(orders);
  p.raw_strength = std::move(raw);
  p.J = normalize_by_mean(p.raw_strength);
  return p;
}

OrderProfile strength_profile(std::span<const GameEvaluator* const> games, const SamplingPlan& plan, int workers) {
  if (plan.samples.empty() || plan.orders.empty() || plan.pairs.size() != plan.samples.size()) {
    throw ConfigError("strength_profile: empty or malformed plan");
  }
  for (const auto& list : plan.pairs) {
    if (list.empty()) throw ConfigError("strength_profile: a sample has no pairs");
  }
  for (int id : plan.samples) {
    if (id < 0 || static_cast<std::size_t>(id) >= games.size()) throw ConfigError("strength_profile: sample id out of range");
    if (games[id]->n() != plan.n) throw DimensionError("strength_profile: game variable count differs from plan");
  }

  const std::size_t orders = plan.orders.size();
  std::vector<std::vector<double>> per_sample(plan.samples.size(), std::vector<double>(orders, 0.0));
  parallel_for(plan.samples.size(), workers, [&](std::size_t s) {
    const int id = plan.samples[s];
    const GameEvaluator& game = *games[id];
    const auto& pairs = plan.pairs[s];
    for (std::size_t o = 0; o < orders; ++o) {
      double sum = 0.0;
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        Rng rng = make_rng(plan.seed, kContextStream, (static_cast<std::uint64_t>(id) << 32) | p,
                           static_cast<std::uint64_t>(plan.orders[o]));
        sum += std::abs(estimate_interaction(game, pairs[p].first, pairs[p].second, plan.orders[o], plan.contexts, rng).mean);
      }
      per_sample[s][o] = sum / static_cast<double>(pairs.size());
    }
  });

  std::vector<double> raw(orders, 0.0);
  for (const auto& row : per_sample) {
    for (std::size_t o = 0; o < orders; ++o) raw[o] += row[o];
  }
  for (double& r : raw) r /= static_cast<double>(per_sample.size());

  OrderProfile profile = profile_from_raw(plan.n, plan.orders, std::move(raw));
  profile.per_sample_raw = per_sample;
  for (const auto& row : per_sample) profile.per_sample_J.push_back(normalize_by_mean(row));
  profile.plan_digest = plan.digest();
  profile.seed = plan.seed;
  return profile;
}

double instability(std::span<const OrderProfile> repeats) {
  if (repeats.size() < 2) throw ArgumentError("instability: need at least two repeats");
  auto per_sample = [](const OrderProfile& p) {
    return p.per_sample_J.empty() ? std::vector<std::vector<double>>{p.J} : p.per_sample_J;
  };
  const auto reference = per_sample(repeats[0]);
  std::vector<std::vector<std::vector<double>>> all;
  for (const OrderProfile& p : repeats) {
    if (p.orders != repeats[0].orders) throw ArgumentError("instability: repeats have different order sets");
    all.push_back(per_sample(p));
    if (all.back().size() != reference.size()) throw ArgumentError("instability: repeats have different sample counts");
    for (const auto& row : all.back()) {
      if (row.size() != repeats[0].orders.size()) throw ArgumentError("instability: malformed per-sample profile");
    }
  }

  const std::size_t q = repeats.size();
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t x = 0; x < reference.size(); ++x) {
    for (std::size_t o = 0; o < repeats[0].orders.size(); ++o) {
      double diff = 0.0;
      double scale = 0.0;
      for (std::size_t u = 0; u < q; ++u) {
        scale += std::abs(all[u][x][o]);
        for (std::size_t v = 0; v < q; ++v) {
          if (u != v) diff += std::abs(all[u][x][o] - all[v][x][o]);
        }
      }
      diff /= static_cast<double>(q * (q - 1));
      scale /= static_cast<double>(q);
      total += scale > 0.0 ? diff / scale : 0.0;
      ++terms;
    }
  }
  return total / static_cast<double>(terms);
}

nlohmann::json OrderProfile::to_json() const {
  return {{"n", n},
          {"orders", orders},
          {"relative_orders", relative_orders},
          {"raw_strength", raw_strength},
          {"J", J},
          {"per_sample_raw", per_sample_raw},
          {"per_sample_J", per_sample_J},
          {"plan_digest", plan_digest},
          {"seed", seed},
          {"normalization", normalization}};
}

OrderProfile OrderProfile::from_json(const nlohmann::json& j) {
  OrderProfile p;
  p.n = j.at("n").get<int>();
  p.orders = j.at("orders").get<std::vector<int>>();
  p.relative_orders = j.at("relative_orders").get<std::vector<double>>();
  p.raw_strength = j.at("raw_strength").get<std::vector<double>>();
  p.J = j.at("J").get<std::vector<double>>();
  if (j.contains("per_sample_raw")) p.per_sample_raw = j.at("per_sample_raw").get<std::vector<std::vector<double>>>();
  if (j.contains("per_sample_J")) p.per_sample_J = j.at("per_sample_J").get<std::vector<std::vector<double>>>();
  p.plan_digest = j.value("plan_digest", "");
  p.seed = j.value("seed", std::uint64_t{0});
  p.normalization = j.value("normalization", p.normalization);
  if (p.orders.size() != p.J.size() || p.orders.size() != p.raw_strength.size()) {
    throw SchemaError("profile JSON: orders, raw_strength and J differ in length");
  }
  return p;
}

void write_profile_csv(const OrderProfile& profile, std::ostream& out) {
  out << "order_m,relative_order,raw_strength,J\n";
  for (std::size_t k = 0; k < profile.orders.size(); ++k) {
    out << profile.orders[k] << ',' << format_double(profile.relative_orders[k]) << ','
        << format_double(profile.raw_strength[k]) << ',' << format_double(profile.J[k]) << '\n';
  }
}

OrderProfile read_profile_csv(std::istream& in, int n) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("profile CSV: missing header");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"order_m", "relative_order", "raw_strength", "J"};
  if (header != expected) throw SchemaError("profile CSV: expected header order_m,relative_order,raw_strength,J");
  OrderProfile p;
  p.n = n;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ParseError("profile CSV: expected 4 columns", row, static_cast<long>(cells.size()));
    double values[4];
    for (int c = 0; c < 4; ++c) {
      if (!parse_double(cells[c], values[c])) throw ParseError("profile CSV: non-numeric cell", row, c + 1);
    }
    p.orders.push_back(static_cast<int>(values[0]));
    p.relative_orders.push_back(values[1]);
    p.raw_strength.push_back(values[2]);
    p.J.push_back(values[3]);
  }
  if (p.orders.empty()) throw SchemaError("profile CSV: no rows");
  return p;
}

}  // namespace bottleneck
