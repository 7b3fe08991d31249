#include "bottleneck/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <memory>
#include <set>

#include "bottleneck/digest.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/game.hpp"
#include "bottleneck/masked_game.hpp"
#include "bottleneck/parallel.hpp"
#include "bottleneck/text.hpp"

namespace bottleneck {
namespace {

using nlohmann::json;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

json tabular_json(const TabularPreset& p) {
  return {{"n", p.n}, {"classes", p.classes}, {"samples", p.samples}, {"signal", p.signal.to_json()}};
}

json grid_json(const GridPreset& p) {
  return {{"height", p.height}, {"width", p.width}, {"classes", p.classes}, {"samples", p.samples},
          {"signal", p.signal.to_json()}};
}

Dataset make_tabular(const HarnessConfig& config, std::uint64_t seed) {
  const TabularPreset& p = config.tabular;
  return gen_tabular(p.n, p.classes, p.samples, seed, p.signal);
}

Dataset make_grid(const HarnessConfig& config, std::uint64_t seed) {
  const GridPreset& p = config.grid;
  return gen_grid(GridSpec{p.height, p.width}, p.classes, p.samples, seed, p.signal);
}

TrainConfig typed(TrainConfig base, DnnType type, std::uint64_t seed) {
  base.apply(type);
  base.seed = seed;
  return base;
}

std::vector<std::uint64_t> run_seeds(const HarnessConfig& config, std::uint64_t seed) {
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < config.seeds; ++r) seeds.push_back(seed + static_cast<std::uint64_t>(r));
  return seeds;
}

std::string seed_dir(std::uint64_t seed) { return "seed" + std::to_string(seed); }

ExperimentResult start(const std::string& id, const HarnessConfig& config, std::uint64_t seed, int workers) {
  ExperimentResult r;
  r.id = id;
  r.config = {{"harness", config.to_json()}, {"seed", seed}, {"config_digest", config.digest()}};
  (void)workers;
  r.started = utc_timestamp();
  return r;
}

json profile_metrics(const OrderProfile& p) {
  return {{"orders", p.orders}, {"J", p.J}, {"raw_strength", p.raw_strength}, {"plan_digest", p.plan_digest}};
}

int majority(int runs) { return runs / 2 + 1; }

}  // namespace

// ---------------------------------------------------------------- ModelBundle

ModelBundle ModelBundle::from_training(Mlp model, const Dataset& data, const TrainConfig& config) {
  return {std::move(model), data.mean, data.stddev, data.baseline, config.to_json(), data.digest()};
}

json ModelBundle::to_json() const {
  json j = model.to_json();
  j["standardization"] = {{"mean", to_vector(mean)}, {"stddev", to_vector(stddev)}};
  j["baseline"] = to_vector(baseline);
  j["train_config"] = train_config;
  j["train_config_digest"] = json_digest(train_config);
  j["data_digest"] = data_digest;
  return j;
}

ModelBundle ModelBundle::from_json(const json& j) {
  ModelBundle b;
  b.model = Mlp::from_json(j);
  try {
    b.mean = to_eigen(j.at("standardization").at("mean").get<std::vector<double>>());
    b.stddev = to_eigen(j.at("standardization").at("stddev").get<std::vector<double>>());
    b.baseline = to_eigen(j.at("baseline").get<std::vector<double>>());
    b.train_config = j.value("train_config", json::object());
    b.data_digest = j.value("data_digest", std::string());
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
  const int n = b.model.input_dim();
  if (b.mean.size() != n || b.stddev.size() != n || b.baseline.size() != n) {
    throw SchemaError("model file: standardization or baseline length differs from the input width");
  }
  return b;
}

Dataset ModelBundle::adapt(const Dataset& data) const {
  if (data.n() != model.input_dim()) {
    throw DimensionError("data has " + std::to_string(data.n()) + " features, model expects " +
                         std::to_string(model.input_dim()));
  }
  Dataset out = data;
  out.mean = mean;
  out.stddev = stddev;
  out.baseline = baseline;
  out.features = (out.raw.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  return out;
}

// -------------------------------------------------------------- HarnessConfig

json HarnessConfig::to_json() const {
  json attacks_json = json::array();
  for (const AttackPreset& a : attacks) attacks_json.push_back({{"epsilon", a.epsilon}, {"steps", a.steps}});
  return {{"tabular", tabular_json(tabular)},
          {"grid", grid_json(grid)},
          {"train", train.to_json()},
          {"grid_train", grid_train.to_json()},
          {"seeds", seeds},
          {"max_samples", max_samples},
          {"contexts", contexts},
          {"instability_repeats", instability_repeats},
          {"attacks", attacks_json},
          {"attack_step_size", attack_step_size},
          {"attack_clamp", attack_clamp},
          {"robustness_layers", robustness_layers},
          {"masking_steps", masking_steps},
          {"theorem1", {{"n", theorem1_n}, {"sigma", theorem1_sigma}, {"trials", theorem1_trials}}},
          {"fit_lower", fit_lower}};
}

HarnessConfig HarnessConfig::from_json(const json& j) {
  HarnessConfig c;
  try {
    reject_unknown(j,
                   {"tabular", "grid", "train", "grid_train", "seeds", "max_samples", "contexts", "instability_repeats",
                    "attacks", "attack_step_size", "attack_clamp", "robustness_layers", "masking_steps", "theorem1",
                    "fit_lower"},
                   "config");
    const std::set<std::string> train_keys{"hidden_layers", "width",   "epochs",  "batch_size", "learning_rate", "momentum",
                                           "seed",          "lambda1", "lambda2", "encourage",  "penalize"};
    const std::set<std::string> signal_keys{"linear", "pairwise", "high_order", "pair_terms", "label_noise"};
    if (j.contains("tabular")) {
      const json& t = j.at("tabular");
      reject_unknown(t, {"n", "classes", "samples", "signal"}, "config.tabular");
      read(t, "n", c.tabular.n);
      read(t, "classes", c.tabular.classes);
      read(t, "samples", c.tabular.samples);
      if (t.contains("signal")) {
        reject_unknown(t.at("signal"), signal_keys, "config.tabular.signal");
        json merged = c.tabular.signal.to_json();
        merged.update(t.at("signal"));
        c.tabular.signal = TabularSignal::from_json(merged);
      }
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      reject_unknown(g, {"height", "width", "classes", "samples", "signal"}, "config.grid");
      read(g, "height", c.grid.height);
      read(g, "width", c.grid.width);
      read(g, "classes", c.grid.classes);
      read(g, "samples", c.grid.samples);
      if (g.contains("signal")) {
        reject_unknown(g.at("signal"), {"amplitude", "texture_noise"}, "config.grid.signal");
        json merged = c.grid.signal.to_json();
        merged.update(g.at("signal"));
        c.grid.signal = GridSignal::from_json(merged);
      }
    }
    for (auto [key, target] : {std::pair{"train", &c.train}, std::pair{"grid_train", &c.grid_train}}) {
      if (!j.contains(key)) continue;
      reject_unknown(j.at(key), train_keys, std::string("config.") + key);
      json merged = target->to_json();
      merged.update(j.at(key));
      *target = TrainConfig::from_json(merged);
    }
    read(j, "seeds", c.seeds);
    read(j, "max_samples", c.max_samples);
    read(j, "contexts", c.contexts);
    read(j, "instability_repeats", c.instability_repeats);
    if (j.contains("attacks")) {
      c.attacks.clear();
      for (const json& a : j.at("attacks")) {
        reject_unknown(a, {"epsilon", "steps"}, "config.attacks[]");
        c.attacks.push_back({a.at("epsilon").get<double>(), a.at("steps").get<int>()});
      }
    }
    read(j, "attack_step_size", c.attack_step_size);
    read(j, "attack_clamp", c.attack_clamp);
    read(j, "robustness_layers", c.robustness_layers);
    read(j, "masking_steps", c.masking_steps);
    if (j.contains("theorem1")) {
      const json& t = j.at("theorem1");
      reject_unknown(t, {"n", "sigma", "trials"}, "config.theorem1");
      read(t, "n", c.theorem1_n);
      read(t, "sigma", c.theorem1_sigma);
      read(t, "trials", c.theorem1_trials);
    }
    read(j, "fit_lower", c.fit_lower);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.seeds < 1 || c.max_samples < 1 || c.contexts < 1 || c.instability_repeats < 2 || c.masking_steps < 1) {
    throw ConfigError("config: seeds, max_samples, contexts, masking_steps must be >= 1 and instability_repeats >= 2");
  }
  return c;
}

std::string HarnessConfig::digest() const { return json_digest(to_json()); }

// ---------------------------------------------------------------- tables/IO

std::string table_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out.push_back(',');
    out += table.columns[c];
  }
  out.push_back('\n');
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out.push_back(',');
      const json& cell = row[c];
      if (cell.is_string()) {
        out += cell.get<std::string>();
      } else if (cell.is_number_float()) {
        out += format_double(cell.get<double>());
      } else {
        out += cell.dump();
      }
    }
    out.push_back('\n');
  }
  return out;
}

json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) obj[table.columns[c]] = row[c];
    rows.push_back(std::move(obj));
  }
  return {{"format_version", kResultFormatVersion}, {"table", table.name}, {"columns", table.columns}, {"rows", rows}};
}

std::string ExperimentResult::digest() const { return json_digest({{"id", id}, {"config", config}, {"metrics", metrics}}); }

json ExperimentResult::to_json() const {
  return {{"format_version", kResultFormatVersion},
          {"id", id},
          {"tool_version", tool_version},
          {"config", config},
          {"config_digest", json_digest(config)},
          {"metrics", metrics},
          {"metrics_digest", digest()},
          {"started", started},
          {"finished", finished}};
}

std::map<std::string, std::string> write_result(const ExperimentResult& result, const std::string& dir,
                                                OutputFormat format) {
  std::map<std::string, std::string> digests;
  for (const Table& table : result.tables) {
    const bool csv = format == OutputFormat::Csv;
    const std::string rel = table.name + (csv ? ".csv" : ".json");
    std::string body = csv ? table_csv(table) : table_json(table).dump(2) + "\n";
    write_file_atomic(dir + "/" + rel, body);
    digests[rel] = sha256_hex(body);
  }
  write_file_atomic(dir + "/result.json", result.to_json().dump(2) + "\n");
  return digests;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ------------------------------------------------------------------ profiles

Table profile_table(const OrderProfile& profile, const std::string& name) {
  Table t{name, {"order_m", "relative_order", "raw_strength", "J"}, {}};
  for (std::size_t o = 0; o < profile.orders.size(); ++o) {
    t.rows.push_back({profile.orders[o], profile.relative_orders[o], profile.raw_strength[o], profile.J[o]});
  }
  return t;
}

std::vector<int> correct_indices(const Mlp& model, const Dataset& data, std::span<const int> indices) {
  std::vector<int> out;
  if (indices.empty()) return out;
  const Eigen::MatrixXd logits = model.forward(data.batch(indices));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    Eigen::Index best = 0;
    logits.col(static_cast<Eigen::Index>(c)).maxCoeff(&best);
    if (best == data.labels[indices[c]]) out.push_back(indices[c]);
  }
  return out;
}

namespace {

struct ProfileInputs {
  std::vector<int> candidates;
  SamplingPlan plan;
  std::vector<std::unique_ptr<GameEvaluator>> owned;
  std::vector<const GameEvaluator*> games;
};

ProfileInputs prepare_games(const Mlp& model, const Dataset& data, int max_samples, int contexts, std::uint64_t seed,
                            int workers) {
  ProfileInputs in;
  in.candidates = correct_indices(model, data, data.test_indices);
  if (in.candidates.empty()) throw NumericError("profile: the model classifies no test sample correctly");
  PlanConfig pc;
  pc.n = data.n();
  pc.available_samples = static_cast<int>(in.candidates.size());
  pc.max_samples = max_samples;
  pc.all_pairs = true;
  pc.contexts = contexts;
  in.plan = build_plan(pc, seed);
  if (data.n() > kExactMaxVariables) {
    throw CapacityError("profile: exact tabulation supports at most " + std::to_string(kExactMaxVariables) + " variables");
  }

  auto shared = std::make_shared<const Mlp>(model);
  const std::vector<double> baseline = data.baseline_vector();
  in.owned.resize(in.candidates.size());
  parallel_for(in.plan.samples.size(), workers, [&](std::size_t s) {
    const int id = in.plan.samples[s];
    const int k = in.candidates[static_cast<std::size_t>(id)];
    const MaskedModelGame game(shared, data.sample(k), baseline, data.labels[k], OutputMode::LogOdds);
    in.owned[static_cast<std::size_t>(id)] = std::make_unique<TableGame>(TableGame::tabulate(game));
  });
  for (const auto& g : in.owned) in.games.push_back(g.get());
  return in;
}

}  // namespace

OrderProfile exact_profile(const Mlp& model, const Dataset& data, int max_samples, std::uint64_t seed, int workers) {
  const int n = data.n();
  // Enough contexts that every order is enumerated exactly.
  const int contexts = static_cast<int>(std::min<std::uint64_t>(binomial(n - 2, (n - 2) / 2), 1u << 30));
  ProfileInputs in = prepare_games(model, data, max_samples, contexts, seed, workers);
  return strength_profile(in.games, in.plan, workers);
}

std::vector<OrderProfile> sampled_profiles(const Mlp& model, const Dataset& data, int max_samples, int contexts,
                                           int repeats, std::uint64_t seed, int workers) {
  ProfileInputs in = prepare_games(model, data, max_samples, contexts, seed, workers);
  std::vector<OrderProfile> out;
  for (int r = 0; r < repeats; ++r) {
    SamplingPlan plan = in.plan;
    plan.seed = stream_seed(seed, 0x4E9EA7, static_cast<std::uint64_t>(r));
    out.push_back(strength_profile(in.games, plan, workers));
  }
  return out;
}

double band_sum(const OrderProfile& profile, double lo, double hi) {
  double sum = 0.0;
  const double n = profile.n;
  for (std::size_t o = 0; o < profile.orders.size(); ++o) {
    const double m = profile.orders[o];
    if (m >= lo * n - 1e-9 && m <= hi * n + 1e-9) sum += profile.J[o];
  }
  return sum;
}

bool bottleneck_shape(const OrderProfile& profile) {
  const int top = profile.n - 2;
  if (top < 4) return false;
  auto j_at = [&](int m) {
    const auto it = std::find(profile.orders.begin(), profile.orders.end(), m);
    if (it == profile.orders.end()) throw ArgumentError("bottleneck_shape: profile lacks order " + std::to_string(m));
    return profile.J[static_cast<std::size_t>(it - profile.orders.begin())];
  };
  const double mid = j_at(static_cast<int>(std::lround(0.5 * top)));
  return mid < std::min(j_at(0), j_at(1)) && mid < std::min(j_at(top - 1), j_at(top));
}

// ------------------------------------------------------------------- masking

double masking_area(const std::vector<int>& m, const std::vector<double>& random, const std::vector<double>& surround) {
  if (m.size() != random.size() || m.size() != surround.size()) throw DimensionError("masking_area: length mismatch");
  double area = 0.0;
  for (std::size_t t = 1; t < m.size(); ++t) {
    const double left = surround[t - 1] - random[t - 1];
    const double right = surround[t] - random[t];
    area += 0.5 * (left + right) * (m[t] - m[t - 1]);
  }
  return area;
}

MaskingCurves masking_curves(const Mlp& model, const Dataset& data, const std::vector<int>& counts, std::uint64_t seed) {
  if (!data.grid) throw ConfigError("masking curves need a grid dataset");
  const GridSpec grid = *data.grid;
  const std::vector<double> baseline = data.baseline_vector();
  const auto& test = data.test_indices;
  if (test.empty()) throw ConfigError("masking curves: empty test split");
  MaskingCurves curves;
  curves.m = counts;
  for (int m : counts) {
    Eigen::MatrixXd random_batch(data.n(), static_cast<Eigen::Index>(test.size()));
    Eigen::MatrixXd surround_batch(data.n(), static_cast<Eigen::Index>(test.size()));
    for (std::size_t q = 0; q < test.size(); ++q) {
      const std::vector<double> x = data.sample(test[q]);
      Rng rng = make_rng(seed, 0xA5C, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(test[q]));
      random_batch.col(static_cast<Eigen::Index>(q)) = to_eigen(mask_random(x, m, rng, baseline));
      surround_batch.col(static_cast<Eigen::Index>(q)) = to_eigen(mask_surround(x, m, grid, baseline));
    }
    const Eigen::MatrixXd zr = model.forward(random_batch);
    const Eigen::MatrixXd zs = model.forward(surround_batch);
    std::size_t ok_random = 0;
    std::size_t ok_surround = 0;
    for (std::size_t q = 0; q < test.size(); ++q) {
      Eigen::Index a = 0;
      Eigen::Index b = 0;
      zr.col(static_cast<Eigen::Index>(q)).maxCoeff(&a);
      zs.col(static_cast<Eigen::Index>(q)).maxCoeff(&b);
      ok_random += a == data.labels[test[q]];
      ok_surround += b == data.labels[test[q]];
    }
    curves.accuracy_random.push_back(static_cast<double>(ok_random) / static_cast<double>(test.size()));
    curves.accuracy_surround.push_back(static_cast<double>(ok_surround) / static_cast<double>(test.size()));
  }
  curves.area = masking_area(curves.m, curves.accuracy_random, curves.accuracy_surround);
  return curves;
}

// --------------------------------------------------------------- experiments

ExperimentResult exp_bottleneck(const HarnessConfig& config, std::uint64_t seed, int workers,
                                std::vector<OrderProfile>* final_profiles) {
  ExperimentResult result = start("bottleneck", config, seed, workers);
  const auto seeds = run_seeds(config, seed);
  struct Run {
    std::vector<std::pair<int, OrderProfile>> snapshots;
    double test_accuracy = 0.0;
  };
  std::vector<Run> runs(seeds.size());
  parallel_for(seeds.size(), workers, [&](std::size_t r) {
    const Dataset data = make_tabular(config, seeds[r]);
    const TrainConfig tc = typed(config.train, DnnType::Normal, seeds[r]);
    const int mid = std::max(1, (tc.epochs + 1) / 2);
    auto on_epoch = [&](const EpochRecord& rec, const Mlp& model) {
      if (rec.epoch == 1 || rec.epoch == mid || rec.epoch == tc.epochs) {
        runs[r].snapshots.emplace_back(rec.epoch, exact_profile(model, data, config.max_samples, seeds[r], 1));
      }
    };
    const TrainResult trained = train(tc, data, on_epoch);
    runs[r].test_accuracy = trained.history.empty() ? 0.0 : trained.history.back().test_accuracy;
    if (runs[r].snapshots.empty() || runs[r].snapshots.back().first != tc.epochs) {
      runs[r].snapshots.emplace_back(tc.epochs, exact_profile(trained.model, data, config.max_samples, seeds[r], 1));
    }
  });

  json per_seed = json::array();
  int passes = 0;
  Table epochs_table{"profile_epochs", {"seed", "epoch", "order_m", "relative_order", "raw_strength", "J"}, {}};
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const OrderProfile& final_profile = runs[r].snapshots.back().second;
    const bool shape = bottleneck_shape(final_profile);
    passes += shape;
    per_seed.push_back({{"seed", seeds[r]},
                        {"test_accuracy", runs[r].test_accuracy},
                        {"bottleneck_shape", shape},
                        {"profile", profile_metrics(final_profile)}});
    result.tables.push_back(profile_table(final_profile, seed_dir(seeds[r]) + "/profile"));
    for (const auto& [epoch, p] : runs[r].snapshots) {
      for (std::size_t o = 0; o < p.orders.size(); ++o) {
        epochs_table.rows.push_back({seeds[r], epoch, p.orders[o], p.relative_orders[o], p.raw_strength[o], p.J[o]});
      }
    }
    if (final_profiles) final_profiles->push_back(final_profile);
  }
  result.tables.push_back(std::move(epochs_table));
  result.metrics = {{"per_seed", per_seed},
                    {"shape_passes", passes},
                    {"runs", seeds.size()},
                    {"majority", passes >= majority(static_cast<int>(seeds.size()))}};
  result.finished = utc_timestamp();
  return result;
}

ExperimentResult exp_order_control(const HarnessConfig& config, std::uint64_t seed, int workers) {
  ExperimentResult result = start("order-control", config, seed, workers);
  const auto seeds = run_seeds(config, seed);
  const std::vector<DnnType> types{DnnType::Normal, DnnType::LowOrder, DnnType::MiddleOrder, DnnType::HighOrder};
  struct Cell {
    OrderProfile profile;
    double test_accuracy = 0.0;
  };
  std::vector<Cell> cells(seeds.size() * types.size());
  parallel_for(cells.size(), workers, [&](std::size_t k) {
    const std::size_t r = k / types.size();
    const Dataset data = make_tabular(config, seeds[r]);
    const TrainResult trained = train(typed(config.train, types[k % types.size()], seeds[r]), data);
    cells[k].test_accuracy = accuracy(trained.model, data, data.test_indices);
    cells[k].profile = exact_profile(trained.model, data, config.max_samples, seeds[r], 1);
  });

  Table summary{"order_control",
                {"seed", "model", "test_accuracy", "sum_J_low", "sum_J_middle", "sum_J_high"},
                {}};
  json per_seed = json::array();
  int penalize_passes = 0;
  int encourage_passes = 0;
  int accuracy_passes = 0;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    json models = json::object();
    for (std::size_t t = 0; t < types.size(); ++t) {
      const Cell& c = cells[r * types.size() + t];
      const double low = band_sum(c.profile, 0.0, 0.5);
      const double middle = band_sum(c.profile, 0.3, 0.7);
      const double high = band_sum(c.profile, 0.7, 1.0);
      summary.rows.push_back({seeds[r], to_string(types[t]), c.test_accuracy, low, middle, high});
      models[to_string(types[t])] = {{"test_accuracy", c.test_accuracy},
                                     {"sum_J_low", low},
                                     {"sum_J_middle", middle},
                                     {"sum_J_high", high},
                                     {"profile", profile_metrics(c.profile)}};
      result.tables.push_back(profile_table(c.profile, seed_dir(seeds[r]) + "/" + to_string(types[t]) + "_profile"));
    }
    const json& normal = models["normal"];
    const bool penalized = models["high-order"]["sum_J_low"].get<double>() < normal["sum_J_low"].get<double>();
    const bool encouraged = models["middle-order"]["sum_J_middle"].get<double>() > normal["sum_J_middle"].get<double>();
    bool close = true;
    for (const auto& item : models.items()) {
      close = close && std::abs(item.value()["test_accuracy"].get<double>() - normal["test_accuracy"].get<double>()) <= 0.10;
    }
    penalize_passes += penalized;
    encourage_passes += encouraged;
    accuracy_passes += close;
    per_seed.push_back({{"seed", seeds[r]},
                        {"models", models},
                        {"penalize_reduces_low", penalized},
                        {"encourage_increases_middle", encouraged},
                        {"accuracy_within_10_points", close}});
  }
  result.tables.insert(result.tables.begin(), std::move(summary));
  const int need = majority(static_cast<int>(seeds.size()));
  result.metrics = {{"per_seed", per_seed},
                    {"penalize_passes", penalize_passes},
                    {"encourage_passes", encourage_passes},
                    {"accuracy_passes", accuracy_passes},
                    {"runs", seeds.size()},
                    {"majority", penalize_passes >= need && encourage_passes >= need}};
  result.finished = utc_timestamp();
  return result;
}

ExperimentResult exp_robustness(const HarnessConfig& config, std::uint64_t seed, int workers) {
  ExperimentResult result = start("robustness", config, seed, workers);
  const auto seeds = run_seeds(config, seed);
  const std::vector<DnnType> types{DnnType::Normal, DnnType::HighOrderRobust};
  const std::size_t per_seed_cells = config.robustness_layers.size() * types.size();
  struct Cell {
    std::string model_id;
    std::vector<AttackResult> attacks;  // control (ε = 0) first, then the presets
  };
  std::vector<Cell> cells(seeds.size() * per_seed_cells);
  parallel_for(cells.size(), workers, [&](std::size_t k) {
    const std::size_t r = k / per_seed_cells;
    const int layers = config.robustness_layers[(k % per_seed_cells) / types.size()];
    const DnnType type = types[k % types.size()];
    const Dataset data = make_tabular(config, seeds[r]);
    TrainConfig tc = typed(config.train, type, seeds[r]);
    tc.hidden_layers = layers;
    const TrainResult trained = train(tc, data);
    cells[k].model_id = "mlp" + std::to_string(layers + 1) + "-" + to_string(type);
    std::vector<AttackConfig> configs{{0.0, 0, config.attack_step_size, std::nullopt}};
    for (const AttackPreset& a : config.attacks) configs.push_back({a.epsilon, a.steps, config.attack_step_size, std::nullopt});
    for (AttackConfig& ac : configs) {
      if (config.attack_clamp) ac.clamp = observed_range(data);
      cells[k].attacks.push_back(adversarial_accuracy(trained.model, data, data.test_indices, ac, 1));
    }
  });

  Table table{"robustness", {"model_id", "epsilon", "steps", "clean_accuracy", "adversarial_accuracy", "seed"}, {}};
  json rows = json::array();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const std::uint64_t s = seeds[k / per_seed_cells];
    for (std::size_t a = 0; a < cells[k].attacks.size(); ++a) {
      const double eps = a == 0 ? 0.0 : config.attacks[a - 1].epsilon;
      const int steps = a == 0 ? 0 : config.attacks[a - 1].steps;
      const AttackResult& ar = cells[k].attacks[a];
      table.rows.push_back({cells[k].model_id, eps, steps, ar.clean_accuracy, ar.adversarial_accuracy, s});
      rows.push_back({{"model_id", cells[k].model_id},
                      {"epsilon", eps},
                      {"steps", steps},
                      {"clean_accuracy", ar.clean_accuracy},
                      {"adversarial_accuracy", ar.adversarial_accuracy},
                      {"seed", s}});
    }
  }
  // Headline comparison: first architecture, last attack preset.
  int passes = 0;
  json comparisons = json::array();
  if (!config.attacks.empty() && !config.robustness_layers.empty()) {
    const std::size_t a = config.attacks.size();
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      const AttackResult& normal = cells[r * per_seed_cells].attacks[a];
      const AttackResult& robust = cells[r * per_seed_cells + 1].attacks[a];
      const bool lower = robust.adversarial_accuracy < normal.adversarial_accuracy;
      const bool matched = std::abs(robust.clean_accuracy - normal.clean_accuracy) <= 0.10;
      passes += lower && matched;
      comparisons.push_back({{"seed", seeds[r]},
                             {"model", cells[r * per_seed_cells].model_id},
                             {"epsilon", config.attacks[a - 1].epsilon},
                             {"steps", config.attacks[a - 1].steps},
                             {"normal_adversarial", normal.adversarial_accuracy},
                             {"robust_adversarial", robust.adversarial_accuracy},
                             {"normal_clean", normal.clean_accuracy},
                             {"robust_clean", robust.clean_accuracy},
                             {"lower_adversarial_accuracy", lower},
                             {"clean_within_10_points", matched}});
    }
  }
  result.tables.push_back(std::move(table));
  result.metrics = {{"rows", rows},
                    {"comparisons", comparisons},
                    {"passes", passes},
                    {"runs", seeds.size()},
                    {"majority", passes >= majority(static_cast<int>(seeds.size()))}};
  result.finished = utc_timestamp();
  return result;
}

ExperimentResult exp_masking(const HarnessConfig& config, std::uint64_t seed, int workers) {
  ExperimentResult result = start("masking", config, seed, workers);
  const auto seeds = run_seeds(config, seed);
  const std::vector<DnnType> types{DnnType::Normal, DnnType::HighOrder};
  const int n = config.grid.height * config.grid.width;
  std::vector<int> counts;
  for (int s = 0; s < config.masking_steps; ++s) counts.push_back(s * n / config.masking_steps);
  struct Cell {
    MaskingCurves curves;
    double test_accuracy = 0.0;
  };
  std::vector<Cell> cells(seeds.size() * types.size());
  parallel_for(cells.size(), workers, [&](std::size_t k) {
    const std::size_t r = k / types.size();
    const Dataset data = make_grid(config, seeds[r]);
    const TrainResult trained = train(typed(config.grid_train, types[k % types.size()], seeds[r]), data);
    cells[k].test_accuracy = accuracy(trained.model, data, data.test_indices);
    cells[k].curves = masking_curves(trained.model, data, counts, seeds[r]);
  });

  json per_seed = json::array();
  int passes = 0;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    json models = json::object();
    for (std::size_t t = 0; t < types.size(); ++t) {
      const Cell& c = cells[r * types.size() + t];
      Table table{seed_dir(seeds[r]) + "/" + to_string(types[t]) + "_masking", {"m", "acc_random", "acc_surround"}, {}};
      for (std::size_t q = 0; q < c.curves.m.size(); ++q) {
        table.rows.push_back({c.curves.m[q], c.curves.accuracy_random[q], c.curves.accuracy_surround[q]});
      }
      result.tables.push_back(std::move(table));
      models[to_string(types[t])] = {{"test_accuracy", c.test_accuracy},
                                     {"area", c.curves.area},
                                     {"m", c.curves.m},
                                     {"acc_random", c.curves.accuracy_random},
                                     {"acc_surround", c.curves.accuracy_surround}};
    }
    const bool larger = models["high-order"]["area"].get<double>() > models["normal"]["area"].get<double>();
    passes += larger;
    per_seed.push_back({{"seed", seeds[r]}, {"models", models}, {"high_order_area_larger", larger}});
  }
  result.metrics = {{"per_seed", per_seed},
                    {"passes", passes},
                    {"runs", seeds.size()},
                    {"majority", passes >= majority(static_cast<int>(seeds.size()))}};
  result.finished = utc_timestamp();
  return result;
}

ExperimentResult exp_theory(const HarnessConfig& config, const std::vector<OrderProfile>& profiles, std::uint64_t seed,
                            int workers) {
  ExperimentResult result = start("theory", config, seed, workers);
  json fits = json::array();
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const OrderProfile& profile = profiles[p];
    const EffectiveDimensionFit fit = fit_effective_dimension(profile, config.fit_lower);
    const TheoryCurve curve = normalized_curve(fit.n_eff, profile.relative_orders);
    Table table{"profile" + std::to_string(p) + "_theory", {"relative_order", "J_hat", "F_hat"}, {}};
    for (std::size_t o = 0; o < profile.orders.size(); ++o) {
      table.rows.push_back({profile.relative_orders[o], profile.J[o] / profile.J.front(), curve.f_hat[o]});
    }
    result.tables.push_back(std::move(table));
    fits.push_back({{"profile", p},
                    {"seed", profile.seed},
                    {"n", profile.n},
                    {"n_eff", fit.n_eff},
                    {"fit_error", std::isfinite(fit.fit_error) ? json(fit.fit_error) : json("inf")},
                    {"rms_log_error", fit.rms_log_error},
                    {"at_boundary", fit.at_boundary},
                    {"n_eff_below_n", fit.n_eff <= profile.n},
                    {"warnings", fit.warnings}});
  }
  const Theorem1Table t1 =
      simulate_theorem1(config.theorem1_n, config.theorem1_sigma, config.theorem1_trials, seed, workers);
  Table t1_table{"theorem1", {"m", "predicted_std", "empirical_std"}, {}};
  double worst = 0.0;
  for (std::size_t o = 0; o < t1.orders.size(); ++o) {
    t1_table.rows.push_back({t1.orders[o], t1.predicted_std[o], t1.empirical_std[o]});
    worst = std::max(worst, std::abs(t1.empirical_std[o] / t1.predicted_std[o] - 1.0));
  }
  result.tables.push_back(std::move(t1_table));
  result.metrics = {{"fits", fits},
                    {"theorem1",
                     {{"n", t1.n},
                      {"sigma", t1.sigma},
                      {"trials", t1.trials},
                      {"predicted_std", t1.predicted_std},
                      {"empirical_std", t1.empirical_std},
                      {"max_relative_deviation", worst}}}};
  result.finished = utc_timestamp();
  return result;
}

ExperimentResult exp_instability(const HarnessConfig& config, std::uint64_t seed, int workers) {
  ExperimentResult result = start("instability", config, seed, workers);
  const Dataset data = make_tabular(config, seed);
  const TrainResult trained = train(typed(config.train, DnnType::Normal, seed), data);
  const auto repeats =
      sampled_profiles(trained.model, data, config.max_samples, config.contexts, config.instability_repeats, seed, workers);
  const double value = instability(repeats);
  Table table{"instability", {"seed", "contexts", "repeats", "samples", "instability"}, {}};
  const int samples = static_cast<int>(repeats.front().per_sample_raw.size());
  table.rows.push_back({seed, config.contexts, config.instability_repeats, samples, value});
  result.tables.push_back(std::move(table));
  result.metrics = {{"seed", seed},
                    {"contexts", config.contexts},
                    {"repeats", config.instability_repeats},
                    {"samples", samples},
                    {"instability", value},
                    {"below_0_05", value < 0.05}};
  result.finished = utc_timestamp();
  return result;
}

json run_all(const HarnessConfig& config, std::uint64_t seed, int workers, const std::string& out_dir,
             OutputFormat format) {
  json digests = {{"format_version", kResultFormatVersion},
                  {"tool_version", kToolVersion},
                  {"seed", seed},
                  {"config_digest", config.digest()},
                  {"experiments", json::object()}};
  auto record = [&](const ExperimentResult& r) {
    const auto files = write_result(r, out_dir + "/" + r.id, format);
    digests["experiments"][r.id] = {{"metrics_digest", r.digest()}, {"files", files}};
  };
  std::vector<OrderProfile> profiles;
  record(exp_bottleneck(config, seed, workers, &profiles));
  record(exp_theory(config, profiles, seed, workers));
  record(exp_order_control(config, seed, workers));
  record(exp_robustness(config, seed, workers));
  record(exp_masking(config, seed, workers));
  record(exp_instability(config, seed, workers));
  write_file_atomic(out_dir + "/digests.json", digests.dump(2) + "\n");
  return digests;
}

}  // namespace bottleneck
