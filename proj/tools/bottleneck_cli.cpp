#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "bottleneck/attack.hpp"
#include "bottleneck/dataset.hpp"
#include "bottleneck/digest.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/experiments.hpp"
#include "bottleneck/masked_game.hpp"
#include "bottleneck/order_profile.hpp"
#include "bottleneck/theory.hpp"
#include "bottleneck/train.hpp"

using namespace bottleneck;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out = "out";
  int workers = 1;
  std::string format = "csv";
};

HarnessConfig load_config(const Globals& g) {
  if (g.config_path.empty()) return {};
  std::ifstream in(g.config_path);
  if (!in) throw ConfigError("cannot open config file " + g.config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + g.config_path + " is not valid JSON: " + e.what());
  }
  // A result.json (or its "config" block) can be fed back directly.
  if (j.is_object() && j.contains("config")) j = j["config"];
  if (j.is_object() && j.contains("harness")) j = j["harness"];
  return HarnessConfig::from_json(j);
}

OutputFormat output_format(const Globals& g) { return g.format == "json" ? OutputFormat::Json : OutputFormat::Csv; }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + " is not valid JSON: " + e.what());
  }
}

/// Writes a table as CSV or JSON under the output directory.
void emit(const Globals& g, const Table& table) {
  const bool csv = output_format(g) == OutputFormat::Csv;
  const std::string path = g.out + "/" + table.name + (csv ? ".csv" : ".json");
  write_file_atomic(path, csv ? table_csv(table) : table_json(table).dump(2) + "\n");
  std::cout << path << '\n';
}

void emit_json(const Globals& g, const std::string& name, json doc, const HarnessConfig& config) {
  doc["format_version"] = kResultFormatVersion;
  doc["config_digest"] = config.digest();
  doc["seed"] = g.seed;
  const std::string path = g.out + "/" + name;
  write_file_atomic(path, doc.dump(2) + "\n");
  std::cout << path << '\n';
}

/// Every row of the file becomes the evaluation set.
Dataset evaluation_data(const std::string& path, const std::string& label_column, const ModelBundle& bundle) {
  Dataset data = bundle.adapt(load_csv(path, label_column));
  data.test_indices.resize(static_cast<std::size_t>(data.size()));
  for (int k = 0; k < data.size(); ++k) data.test_indices[static_cast<std::size_t>(k)] = k;
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-order interaction analysis for small neural classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Run seed; all randomness derives from it");
  app.add_option("--config", g.config_path, "JSON config file (flags override it)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV plus manifest");
  std::string gen_kind = "tabular";
  std::optional<int> gen_n, gen_classes, gen_samples, gen_side;
  std::optional<double> gen_noise;
  gen->add_option("--kind", gen_kind)->check(CLI::IsMember({"tabular", "grid"}));
  gen->add_option("--n", gen_n, "Tabular variable count");
  gen->add_option("--side", gen_side, "Grid side length");
  gen->add_option("--classes", gen_classes);
  gen->add_option("--samples", gen_samples);
  gen->add_option("--label-noise", gen_noise);

  // train
  auto* tr = app.add_subcommand("train", "Train a classifier of one DNN type");
  std::string tr_data, tr_type = "normal", tr_label = "label", tr_kind = "tabular";
  std::optional<int> tr_epochs, tr_layers, tr_width, tr_batch;
  std::optional<double> tr_lr;
  tr->add_option("--data", tr_data, "CSV file; omitted means the synthetic preset of --kind");
  tr->add_option("--kind", tr_kind)->check(CLI::IsMember({"tabular", "grid"}));
  tr->add_option("--label-column", tr_label);
  tr->add_option("--type", tr_type)
      ->check(CLI::IsMember({"normal", "low-order", "middle-order", "high-order", "high-order-robustness"}));
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--layers", tr_layers, "Hidden layers");
  tr->add_option("--width", tr_width);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr", tr_lr);

  // profile
  auto* pr = app.add_subcommand("profile", "Interaction strength profile of a trained model");
  std::string pr_model, pr_data, pr_orders = "all", pr_label = "label";
  std::optional<int> pr_contexts, pr_max;
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--data", pr_data)->required();
  pr->add_option("--label-column", pr_label);
  pr->add_option("--orders", pr_orders, "'all' (exact, every order) or 'sampled'")->check(CLI::IsMember({"all", "sampled"}));
  pr->add_option("--contexts", pr_contexts);
  pr->add_option("--max-samples", pr_max);

  // theory-fit
  auto* tf = app.add_subcommand("theory-fit", "Fit the effective dimension to a profile");
  std::string tf_profile;
  int tf_n = 0;
  std::optional<double> tf_lower, tf_upper;
  tf->add_option("--profile", tf_profile)->required();
  tf->add_option("--n", tf_n, "Variable count of the profiled model")->required();
  tf->add_option("--lower", tf_lower);
  tf->add_option("--upper", tf_upper);

  // simulate-theorem1
  auto* st = app.add_subcommand("simulate-theorem1", "Monte Carlo check of the per-order gradient spread");
  std::optional<int> st_n;
  std::optional<double> st_sigma;
  std::optional<std::uint64_t> st_trials;
  st->add_option("--n", st_n);
  st->add_option("--sigma", st_sigma);
  st->add_option("--trials", st_trials);

  // attack
  auto* at = app.add_subcommand("attack", "Untargeted L-infinity PGD against a trained model");
  std::string at_model, at_data, at_label = "label", at_id = "model";
  double at_eps = 0.2, at_step = 0.01;
  int at_steps = 50;
  bool at_clamp = false;
  at->add_option("--model", at_model)->required();
  at->add_option("--data", at_data)->required();
  at->add_option("--label-column", at_label);
  at->add_option("--model-id", at_id);
  at->add_option("--epsilon", at_eps);
  at->add_option("--steps", at_steps);
  at->add_option("--step-size", at_step);
  at->add_flag("--clamp", at_clamp, "Clamp to the observed feature range");

  // mask-exp
  auto* me = app.add_subcommand("mask-exp", "Structural masking experiment on the grid preset");
  std::optional<int> me_epochs, me_seeds;
  me->add_option("--epochs", me_epochs);
  me->add_option("--seeds", me_seeds, "Number of runs");

  // instability
  auto* in = app.add_subcommand("instability", "Instability of sampled profiles");
  std::string in_model, in_data, in_label = "label";
  std::optional<int> in_contexts, in_repeats, in_max;
  in->add_option("--model", in_model, "Model file; omitted means train the tabular preset");
  in->add_option("--data", in_data);
  in->add_option("--label-column", in_label);
  in->add_option("--contexts", in_contexts);
  in->add_option("--repeats", in_repeats);
  in->add_option("--max-samples", in_max);

  // run-all
  auto* ra = app.add_subcommand("run-all", "Every experiment, with digests of all outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    HarnessConfig config = load_config(g);

    if (gen->parsed()) {
      Dataset data;
      if (gen_kind == "tabular") {
        TabularPreset& p = config.tabular;
        if (gen_n) p.n = *gen_n;
        if (gen_classes) p.classes = *gen_classes;
        if (gen_samples) p.samples = *gen_samples;
        if (gen_noise) p.signal.label_noise = *gen_noise;
        data = gen_tabular(p.n, p.classes, p.samples, g.seed, p.signal);
      } else {
        GridPreset& p = config.grid;
        if (gen_side) p.height = p.width = *gen_side;
        if (gen_classes) p.classes = *gen_classes;
        if (gen_samples) p.samples = *gen_samples;
        data = gen_grid(GridSpec{p.height, p.width}, p.classes, p.samples, g.seed, p.signal);
      }
      std::ostringstream csv;
      write_csv(data, csv);
      write_file_atomic(g.out + "/data.csv", csv.str());
      std::cout << g.out << "/data.csv\n";
      emit_json(g, "manifest.json", data.manifest(), config);
      for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
    } else if (tr->parsed()) {
      const bool grid = tr_kind == "grid";
      TrainConfig tc = grid ? config.grid_train : config.train;
      tc.apply(dnn_type_from_string(tr_type));
      tc.seed = g.seed;
      if (tr_epochs) tc.epochs = *tr_epochs;
      if (tr_layers) tc.hidden_layers = *tr_layers;
      if (tr_width) tc.width = *tr_width;
      if (tr_batch) tc.batch_size = *tr_batch;
      if (tr_lr) tc.learning_rate = *tr_lr;
      Dataset data;
      if (!tr_data.empty()) {
        data = load_csv(tr_data, tr_label, g.seed);
      } else if (grid) {
        data = gen_grid(GridSpec{config.grid.height, config.grid.width}, config.grid.classes, config.grid.samples, g.seed,
                        config.grid.signal);
      } else {
        data = gen_tabular(config.tabular.n, config.tabular.classes, config.tabular.samples, g.seed,
                           config.tabular.signal);
      }
      for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
      Table history{"history",
                    {"epoch", "loss_classification", "loss_encourage", "loss_penalize", "train_accuracy", "test_accuracy"},
                    {}};
      const TrainResult trained = train(tc, data, [&](const EpochRecord& r, const Mlp&) {
        history.rows.push_back(
            {r.epoch, r.loss_classification, r.loss_encourage, r.loss_penalize, r.train_accuracy, r.test_accuracy});
      });
      json model = ModelBundle::from_training(trained.model, data, tc).to_json();
      model["dnn_type"] = tr_type;
      write_file_atomic(g.out + "/model.json", model.dump() + "\n");
      std::cout << g.out << "/model.json\n";
      emit(g, history);
    } else if (pr->parsed()) {
      const ModelBundle bundle = ModelBundle::from_json(read_json_file(pr_model));
      const Dataset data = evaluation_data(pr_data, pr_label, bundle);
      const int max_samples = pr_max.value_or(config.max_samples);
      OrderProfile profile;
      if (pr_orders == "all") {
        profile = exact_profile(bundle.model, data, max_samples, g.seed, g.workers);
      } else {
        const std::vector<int> candidates = correct_indices(bundle.model, data, data.test_indices);
        if (candidates.empty()) throw NumericError("profile: the model classifies no sample correctly");
        PlanConfig pc;
        pc.n = data.n();
        pc.available_samples = static_cast<int>(candidates.size());
        pc.max_samples = max_samples;
        pc.relative_orders = default_relative_orders();
        pc.contexts = pr_contexts.value_or(config.contexts);
        const SamplingPlan plan = build_plan(pc, g.seed);
        auto shared = std::make_shared<const Mlp>(bundle.model);
        std::vector<std::unique_ptr<GameEvaluator>> owned(candidates.size());
        std::vector<const GameEvaluator*> games(candidates.size(), nullptr);
        for (int id : plan.samples) {
          const int k = candidates[static_cast<std::size_t>(id)];
          owned[id] = std::make_unique<MaskedModelGame>(shared, data.sample(k), data.baseline_vector(), data.labels[k]);
          games[id] = owned[id].get();
        }
        profile = strength_profile(games, plan, g.workers);
      }
      emit(g, profile_table(profile, "profile"));
      json doc = profile.to_json();
      doc["mode"] = pr_orders;
      emit_json(g, "profile_meta.json", doc, config);
    } else if (tf->parsed()) {
      std::ifstream file(tf_profile);
      if (!file) throw ConfigError("cannot open " + tf_profile);
      const OrderProfile profile = read_profile_csv(file, tf_n);
      const EffectiveDimensionFit fit =
          fit_effective_dimension(profile, tf_lower.value_or(config.fit_lower), tf_upper.value_or(0.0));
      const TheoryCurve curve = normalized_curve(fit.n_eff, profile.relative_orders);
      Table table{"theory", {"relative_order", "J_hat", "F_hat"}, {}};
      for (std::size_t o = 0; o < profile.orders.size(); ++o) {
        table.rows.push_back({profile.relative_orders[o], profile.J[o] / profile.J.front(), curve.f_hat[o]});
      }
      emit(g, table);
      for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
      emit_json(g, "fit.json",
                {{"n", profile.n},
                 {"n_eff", fit.n_eff},
                 {"fit_error", std::isfinite(fit.fit_error) ? json(fit.fit_error) : json("inf")},
                 {"rms_log_error", fit.rms_log_error},
                 {"at_boundary", fit.at_boundary},
                 {"warnings", fit.warnings}},
                config);
    } else if (st->parsed()) {
      const Theorem1Table t = simulate_theorem1(st_n.value_or(config.theorem1_n), st_sigma.value_or(config.theorem1_sigma),
                                                st_trials.value_or(config.theorem1_trials), g.seed, g.workers);
      Table table{"theorem1", {"m", "predicted_std", "empirical_std"}, {}};
      for (std::size_t o = 0; o < t.orders.size(); ++o) table.rows.push_back({t.orders[o], t.predicted_std[o], t.empirical_std[o]});
      emit(g, table);
    } else if (at->parsed()) {
      const ModelBundle bundle = ModelBundle::from_json(read_json_file(at_model));
      const Dataset data = evaluation_data(at_data, at_label, bundle);
      AttackConfig ac{at_eps, at_steps, at_step, std::nullopt};
      if (at_clamp) {
        Dataset ranged = data;
        ranged.train_indices = data.test_indices;
        ac.clamp = observed_range(ranged);
      }
      const AttackResult r = adversarial_accuracy(bundle.model, data, data.test_indices, ac, g.workers);
      Table table{"robustness", {"model_id", "epsilon", "steps", "clean_accuracy", "adversarial_accuracy", "seed"}, {}};
      table.rows.push_back({at_id, at_eps, at_steps, r.clean_accuracy, r.adversarial_accuracy, g.seed});
      emit(g, table);
    } else if (me->parsed()) {
      if (me_epochs) config.grid_train.epochs = *me_epochs;
      if (me_seeds) config.seeds = *me_seeds;
      const ExperimentResult r = exp_masking(config, g.seed, g.workers);
      write_result(r, g.out, output_format(g));
      std::cout << g.out << "/result.json\n";
    } else if (in->parsed()) {
      if (in_contexts) config.contexts = *in_contexts;
      if (in_repeats) config.instability_repeats = *in_repeats;
      if (in_max) config.max_samples = *in_max;
      if (config.instability_repeats < 2) throw ConfigError("instability needs at least two repeats");
      if (in_model.empty()) {
        const ExperimentResult r = exp_instability(config, g.seed, g.workers);
        write_result(r, g.out, output_format(g));
        std::cout << g.out << "/result.json\n";
      } else {
        if (in_data.empty()) throw ConfigError("instability: --data is required with --model");
        const ModelBundle bundle = ModelBundle::from_json(read_json_file(in_model));
        const Dataset data = evaluation_data(in_data, in_label, bundle);
        const auto repeats = sampled_profiles(bundle.model, data, config.max_samples, config.contexts,
                                              config.instability_repeats, g.seed, g.workers);
        const double value = instability(repeats);
        Table table{"instability", {"seed", "contexts", "repeats", "samples", "instability"}, {}};
        table.rows.push_back({g.seed, config.contexts, config.instability_repeats,
                              static_cast<int>(repeats.front().per_sample_raw.size()), value});
        emit(g, table);
      }
    } else if (ra->parsed()) {
      run_all(config, g.seed, g.workers, g.out, output_format(g));
      std::cout << g.out << "/digests.json\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
