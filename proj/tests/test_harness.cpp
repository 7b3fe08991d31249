#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bottleneck/errors.hpp"
#include "bottleneck/experiments.hpp"

using namespace bottleneck;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BOTTLENECK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bottleneck_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("masking area matches a plain trapezoid sum") {
  Rng rng = make_rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> m{0};
    for (int k = 1; k < 9; ++k) m.push_back(m.back() + 1 + static_cast<int>(uniform_index(rng, 10)));
    std::vector<double> a(m.size());
    std::vector<double> b(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) {
      a[k] = uniform_unit(rng);
      b[k] = uniform_unit(rng);
    }
    double expected = 0.0;
    for (std::size_t k = 0; k + 1 < m.size(); ++k) {
      expected += 0.5 * ((b[k] - a[k]) + (b[k + 1] - a[k + 1])) * (m[k + 1] - m[k]);
    }
    CHECK(std::abs(masking_area(m, a, b) - expected) <= 1e-12);
  }
  CHECK(masking_area({0, 8, 16}, {1.0, 0.5, 0.25}, {1.0, 0.75, 0.75}) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_THROWS_AS(masking_area({0, 1}, {0.5}, {0.5, 0.5}), DimensionError);
}

TEST_CASE("profile summaries") {
  const OrderProfile u = profile_from_raw(12, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                                          {3.0, 2.0, 1.5, 1.2, 1.0, 0.9, 1.0, 1.1, 1.4, 2.0, 3.0});
  CHECK(bottleneck_shape(u));
  double mean = 0.0;
  for (double j : u.J) mean += j;
  CHECK(mean / 11.0 == doctest::Approx(1.0).epsilon(1e-14));
  // Orders 0..6 satisfy m <= 0.5 n = 6.
  double low = 0.0;
  for (int m = 0; m <= 6; ++m) low += u.J[m];
  CHECK(band_sum(u, 0.0, 0.5) == doctest::Approx(low).epsilon(1e-14));

  const OrderProfile flat = profile_from_raw(12, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, std::vector<double>(11, 1.0));
  CHECK_FALSE(bottleneck_shape(flat));
}

TEST_CASE("harness config") {
  const HarnessConfig defaults;
  const HarnessConfig round = HarnessConfig::from_json(defaults.to_json());
  CHECK(round.digest() == defaults.digest());
  nlohmann::json j = defaults.to_json();
  j["contexts"] = 7;
  CHECK(HarnessConfig::from_json(j).contexts == 7);
  CHECK(HarnessConfig::from_json(j).digest() != defaults.digest());
  CHECK(HarnessConfig::from_json(nlohmann::json::object()).digest() == defaults.digest());
  j["unknown_field"] = 1;
  CHECK_THROWS_AS(HarnessConfig::from_json(j), ConfigError);
}

TEST_CASE("tables and results") {
  const Table t{"x", {"a", "b"}, {{1, 0.5}, {"s", 2.0}}};
  CHECK(table_csv(t) == "a,b\n1,0.5\ns,2\n");
  ExperimentResult r{"demo", {{"k", 1}}, {{"v", 2.5}}, {t}, "2020-01-01T00:00:00Z", "2020-01-01T00:00:01Z"};
  ExperimentResult later = r;
  later.started = "2030-01-01T00:00:00Z";
  CHECK(r.digest() == later.digest());
  later.metrics["v"] = 2.6;
  CHECK(r.digest() != later.digest());

  const fs::path dir = scratch_dir("tables");
  const auto digests = write_result(r, dir.string(), OutputFormat::Csv);
  CHECK(digests.count("x.csv") == 1);
  CHECK(slurp(dir / "x.csv") == table_csv(t));
  const nlohmann::json parsed = nlohmann::json::parse(slurp(dir / "result.json"));
  CHECK(parsed["id"] == "demo");
  CHECK(parsed["tool_version"] == kToolVersion);
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  CHECK(run_cli("--no-such-flag") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("") == 2);
  const fs::path dir = scratch_dir("exit");
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"contexts": 5, "mystery": true})";
  }
  CHECK(run_cli("--config " + (dir / "bad.json").string() + " --out " + dir.string() + " simulate-theorem1 --trials 10") == 2);
  CHECK(run_cli("--out " + dir.string() + " simulate-theorem1 --n 1") == 2);
  {
    const ExperimentResult r{"demo", {{"harness", HarnessConfig{}.to_json()}, {"seed", 1}}, {}, {}, "", ""};
    write_result(r, dir.string(), OutputFormat::Csv);
  }
  CHECK(run_cli("--config " + (dir / "result.json").string() + " --out " + dir.string() +
                " simulate-theorem1 --n 4 --trials 50") == 0);
  CHECK(run_cli("--out " + dir.string() + " gen-data --kind tabular --samples 300") == 0);
  CHECK(run_cli("--out " + dir.string() + " train --data " + (dir / "data.csv").string() +
                " --epochs 3 --layers 2 --width 8 --lr 1e300") == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli pipeline") {
  const fs::path dir = scratch_dir("pipeline");
  const std::string out = " --out " + dir.string();
  REQUIRE(run_cli("--seed 3" + out + " gen-data --kind tabular --n 8 --samples 400") == 0);
  REQUIRE(fs::exists(dir / "manifest.json"));
  REQUIRE(run_cli("--seed 3" + out + " train --data " + (dir / "data.csv").string() +
                  " --epochs 4 --layers 2 --width 16") == 0);
  REQUIRE(fs::exists(dir / "model.json"));
  REQUIRE(run_cli("--seed 3" + out + " profile --model " + (dir / "model.json").string() + " --data " +
                  (dir / "data.csv").string() + " --orders all --max-samples 4") == 0);
  std::ifstream profile(dir / "profile.csv");
  std::string line;
  std::getline(profile, line);
  CHECK(line == "order_m,relative_order,raw_strength,J");
  int rows = 0;
  double total = 0.0;
  while (std::getline(profile, line)) {
    ++rows;
    total += std::stod(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 7);
  CHECK(total / rows == doctest::Approx(1.0).epsilon(1e-9));

  REQUIRE(run_cli("--seed 3" + out + " theory-fit --profile " + (dir / "profile.csv").string() + " --n 8") == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "fit.json")).contains("n_eff"));
  REQUIRE(run_cli("--seed 3" + out + " attack --model " + (dir / "model.json").string() + " --data " +
                  (dir / "data.csv").string() + " --epsilon 0 --steps 5") == 0);
  {
    std::istringstream rows(slurp(dir / "robustness.csv"));
    std::string header, row;
    std::getline(rows, header);
    std::getline(rows, row);
    CHECK(header == "model_id,epsilon,steps,clean_accuracy,adversarial_accuracy,seed");
    std::vector<std::string> cells;
    std::istringstream split(row);
    for (std::string cell; std::getline(split, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 6);
    CHECK(cells[3] == cells[4]);
  }

  REQUIRE(run_cli("--seed 3 --format json" + out + " simulate-theorem1 --n 6 --trials 2000") == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "theorem1.json")).is_object());
  fs::remove_all(dir);
}
