#include "bottleneck/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "bottleneck/digest.hpp"
#include "bottleneck/errors.hpp"
#include "bottleneck/text.hpp"

namespace bottleneck {

std::vector<double> Dataset::sample(int k) const {
  std::vector<double> x(static_cast<std::size_t>(n()));
  for (int i = 0; i < n(); ++i) x[i] = features(k, i);
  return x;
}

std::vector<double> Dataset::baseline_vector() const { return {baseline.data(), baseline.data() + baseline.size()}; }

Eigen::MatrixXd Dataset::batch(std::span<const int> indices) const {
  Eigen::MatrixXd out(n(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = features.row(indices[c]).transpose();
  return out;
}

std::string Dataset::digest() const {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(raw.size()) * 24 + labels.size() * 4);
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
      bytes += format_double(raw(r, c));
      bytes.push_back(',');
    }
    bytes += std::to_string(labels[static_cast<std::size_t>(r)]);
    bytes.push_back('\n');
  }
  return sha256_hex(bytes);
}

nlohmann::json Dataset::manifest() const {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j = {{"format_version", 1},
                      {"samples", size()},
                      {"n", n()},
                      {"classes", classes},
                      {"feature_names", feature_names},
                      {"class_names", class_names},
                      {"mean", vec(mean)},
                      {"stddev", vec(stddev)},
                      {"baseline", vec(baseline)},
                      {"train_size", train_indices.size()},
                      {"test_size", test_indices.size()},
                      {"digest", digest()},
                      {"provenance", provenance},
                      {"warnings", warnings}};
  j["reference_accuracy"] = reference_accuracy ? nlohmann::json(*reference_accuracy) : nlohmann::json(nullptr);
  if (grid) j["grid"] = {{"height", grid->height}, {"width", grid->width}};
  return j;
}

void finalize_dataset(Dataset& data, std::uint64_t split_seed, double train_fraction) {
  const int k = data.size();
  const int n = data.n();
  if (k < 2) throw ConfigError("dataset needs at least two samples");
  if (static_cast<int>(data.labels.size()) != k) throw DimensionError("dataset: label count differs from row count");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("dataset: train fraction must lie in (0, 1)");

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(split_seed, 0x5B117);
  for (int t = k - 1; t > 0; --t) std::swap(order[t], order[uniform_index(rng, static_cast<std::uint64_t>(t) + 1)]);
  const int train_count = std::clamp(static_cast<int>(std::lround(train_fraction * k)), 1, k - 1);
  data.train_indices.assign(order.begin(), order.begin() + train_count);
  data.test_indices.assign(order.begin() + train_count, order.end());
  std::sort(data.train_indices.begin(), data.train_indices.end());
  std::sort(data.test_indices.begin(), data.test_indices.end());

  data.mean = Eigen::VectorXd::Zero(n);
  data.stddev = Eigen::VectorXd::Zero(n);
  for (int r : data.train_indices) data.mean += data.raw.row(r).transpose();
  data.mean /= train_count;
  for (int r : data.train_indices) data.stddev += (data.raw.row(r).transpose() - data.mean).array().square().matrix();
  data.stddev = (data.stddev / train_count).cwiseSqrt();
  for (int i = 0; i < n; ++i) {
    if (data.stddev(i) < kStdFloor) {
      data.stddev(i) = kStdFloor;
      const std::string name = i < static_cast<int>(data.feature_names.size()) ? data.feature_names[i] : std::to_string(i);
      data.warnings.push_back("feature '" + name + "' is constant on the training split; std floored at 1e-8");
    }
  }
  data.features = (data.raw.rowwise() - data.mean.transpose()).array().rowwise() / data.stddev.transpose().array();

  data.baseline = Eigen::VectorXd::Zero(n);
  for (int r : data.train_indices) data.baseline += data.features.row(r).transpose();
  data.baseline /= train_count;
  data.provenance["split_seed"] = split_seed;
  data.provenance["train_fraction"] = train_fraction;
}

namespace {

std::vector<std::string> default_names(const std::string& prefix, int count) {
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

int flip_label(int label, int classes, double noise, Rng& rng) {
  if (noise <= 0.0 || uniform_unit(rng) >= noise) return label;
  const int other = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(classes - 1)));
  return other >= label ? other + 1 : other;
}

}  // namespace

nlohmann::json TabularSignal::to_json() const {
  return {{"linear", linear},
          {"pairwise", pairwise},
          {"high_order", high_order},
          {"pair_terms", pair_terms},
          {"label_noise", label_noise}};
}

TabularSignal TabularSignal::from_json(const nlohmann::json& j) {
  TabularSignal s;
  s.linear = j.value("linear", s.linear);
  s.pairwise = j.value("pairwise", s.pairwise);
  s.high_order = j.value("high_order", s.high_order);
  s.pair_terms = j.value("pair_terms", s.pair_terms);
  s.label_noise = j.value("label_noise", s.label_noise);
  return s;
}

Dataset gen_tabular(int n, int classes, int samples, std::uint64_t seed, const TabularSignal& signal) {
  if (n < 6 || n > 24) throw ConfigError("gen_tabular: n must lie in [6, 24]");
  if (classes < 2) throw ConfigError("gen_tabular: need at least two classes");
  if (samples < 10) throw ConfigError("gen_tabular: need at least ten samples");
  if (signal.pair_terms < 1 || signal.label_noise < 0.0 || signal.label_noise > 1.0 || signal.linear < 0.0 ||
      signal.pairwise < 0.0 || signal.high_order < 0.0) {
    throw ConfigError("gen_tabular: invalid signal settings");
  }

  Rng rule_rng = make_rng(seed, 0x7AB, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_vector = [&](int size) {
    Eigen::VectorXd v(size);
    for (int i = 0; i < size; ++i) v(i) = normal(rule_rng);
    return v;
  };
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<Eigen::VectorXd> linear_w, high_u, high_v;
  std::vector<std::vector<std::pair<int, int>>> pair_idx(classes);
  std::vector<std::vector<double>> pair_w(classes);
  for (int c = 0; c < classes; ++c) {
    linear_w.push_back(draw_vector(n));
    high_u.push_back(draw_vector(n));
    high_v.push_back(draw_vector(n));
    for (int t = 0; t < signal.pair_terms; ++t) {
      const int i = static_cast<int>(uniform_index(rule_rng, n));
      int j = static_cast<int>(uniform_index(rule_rng, n - 1));
      if (j >= i) ++j;
      pair_idx[c].emplace_back(i, j);
      pair_w[c].push_back(normal(rule_rng));
    }
  }
  // tanh(2s) has standard deviation ≈ 0.6 for s ~ N(0, 1); the product is rescaled to unit scale.
  constexpr double kHighScale = 1.0 / 0.36;

  Dataset data;
  data.raw.resize(samples, n);
  data.labels.resize(samples);
  data.classes = classes;
  Rng sample_rng = make_rng(seed, 0x7AB, 2);
  int agree = 0;
  for (int k = 0; k < samples; ++k) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = normal(sample_rng);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      double pair_sum = 0.0;
      for (int t = 0; t < signal.pair_terms; ++t) pair_sum += pair_w[c][t] * x(pair_idx[c][t].first) * x(pair_idx[c][t].second);
      const double score = signal.linear * linear_w[c].dot(x) / root_n +
                           signal.pairwise * pair_sum / std::sqrt(static_cast<double>(signal.pair_terms)) +
                           signal.high_order * kHighScale * std::tanh(2.0 * high_u[c].dot(x) / root_n) *
                               std::tanh(2.0 * high_v[c].dot(x) / root_n);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    data.labels[k] = flip_label(best, classes, signal.label_noise, sample_rng);
    agree += data.labels[k] == best;
    data.raw.row(k) = x.transpose();
  }
  data.feature_names = default_names("x", n);
  data.class_names = default_names("class", classes);
  data.reference_accuracy = static_cast<double>(agree) / samples;
  data.provenance = {{"generator", "tabular"}, {"n", n}, {"classes", classes}, {"samples", samples},
                     {"seed", seed},           {"signal", signal.to_json()}};
  finalize_dataset(data, stream_seed(seed, 0x5B17));
  return data;
}

nlohmann::json GridSignal::to_json() const { return {{"amplitude", amplitude}, {"texture_noise", texture_noise}}; }

GridSignal GridSignal::from_json(const nlohmann::json& j) {
  GridSignal s;
  s.amplitude = j.value("amplitude", s.amplitude);
  s.texture_noise = j.value("texture_noise", s.texture_noise);
  return s;
}

std::vector<std::vector<double>> grid_templates(const GridSpec& grid, int classes) {
  if (grid.height != grid.width || grid.height % 2 != 0 || grid.height < 4) {
    throw ConfigError("grid templates need a square grid with an even side of at least 4");
  }
  if (classes < 2 || classes > 4) throw ConfigError("grid templates: 2 to 4 classes");
  const int side = grid.height;
  const int mid = side / 2;
  std::vector<std::vector<double>> templates(classes, std::vector<double>(static_cast<std::size_t>(grid.cells()), 0.0));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int idx = grid.index(r, c);
      const bool inner = grid.ring(idx) >= 1;
      const bool on[4] = {
          inner && (r == mid - 1 || r == mid),           // horizontal band
          inner && (c == mid - 1 || c == mid),           // vertical band
          grid.ring(idx) == side / 4,                     // hollow square
          inner && (r == c || r + c == side - 1),         // diagonals
      };
      for (int t = 0; t < classes; ++t) templates[t][idx] = on[t] ? 1.0 : 0.0;
    }
  }
  return templates;
}

Dataset gen_grid(const GridSpec& grid, int classes, int samples, std::uint64_t seed, const GridSignal& signal) {
  if (grid.cells() > 64) throw ConfigError("gen_grid: at most 64 cells");
  if (samples < 10) throw ConfigError("gen_grid: need at least ten samples");
  if (signal.texture_noise < 0.0) throw ConfigError("gen_grid: texture noise must be non-negative");
  const auto templates = grid_templates(grid, classes);
  const int n = grid.cells();

  Dataset data;
  data.raw.resize(samples, n);
  data.labels.resize(samples);
  data.classes = classes;
  data.grid = grid;
  Rng rng = make_rng(seed, 0x6A1D);
  std::normal_distribution<double> texture(0.0, 1.0);
  for (int k = 0; k < samples; ++k) {
    const int label = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(classes)));
    data.labels[k] = label;
    for (int i = 0; i < n; ++i) data.raw(k, i) = signal.amplitude * templates[label][i] + signal.texture_noise * texture(rng);
  }
  data.feature_names.clear();
  for (int i = 0; i < n; ++i) data.feature_names.push_back("r" + std::to_string(grid.row(i)) + "c" + std::to_string(grid.col(i)));
  data.class_names = {"hband", "vband", "square", "diagonals"};
  data.class_names.resize(classes);
  data.provenance = {{"generator", "grid"}, {"height", grid.height}, {"width", grid.width}, {"classes", classes},
                     {"samples", samples},  {"seed", seed},          {"signal", signal.to_json()}};
  finalize_dataset(data, stream_seed(seed, 0x5B17));
  return data;
}

Dataset read_csv(std::istream& in, const std::string& label_column, std::uint64_t split_seed, double train_fraction,
                 const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV " + source + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw SchemaError("CSV " + source + ": no label column '" + label_column + "'");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<double>> rows;
  std::vector<std::string> label_text;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("CSV " + source + ": expected " + std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       row, static_cast<long>(cells.size()));
    }
    std::vector<double> values;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) continue;
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        throw ParseError("CSV " + source + ": non-numeric feature cell '" + cells[c] + "'", row, static_cast<long>(c) + 1);
      }
      values.push_back(v);
    }
    rows.push_back(std::move(values));
    label_text.push_back(trim(cells[label_col]));
  }
  if (rows.empty()) throw SchemaError("CSV " + source + ": no data rows");

  Dataset data;
  const int n = static_cast<int>(header.size()) - 1;
  if (n < 1) throw SchemaError("CSV " + source + ": no feature columns");
  if (n > 64) throw CapacityError("CSV " + source + ": at most 64 feature columns");
  data.raw.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < n; ++c) data.raw(static_cast<Eigen::Index>(r), c) = rows[r][c];
  }
  std::map<std::string, int> class_ids;
  for (const auto& t : label_text) class_ids.emplace(t, 0);
  int next = 0;
  for (auto& [name, id] : class_ids) {
    id = next++;
    data.class_names.push_back(name);
  }
  for (const auto& t : label_text) data.labels.push_back(class_ids.at(t));
  data.classes = static_cast<int>(class_ids.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_col) data.feature_names.push_back(header[c]);
  }
  data.provenance = {{"generator", "csv"}, {"source", source}, {"label_column", label_column}};
  finalize_dataset(data, split_seed, train_fraction);
  return data;
}

Dataset load_csv(const std::string& path, const std::string& label_column, std::uint64_t split_seed,
                 double train_fraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open CSV file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string contents = buffer.str();
  std::istringstream stream(contents);
  Dataset data = read_csv(stream, label_column, split_seed, train_fraction, path);
  data.provenance["source_digest"] = sha256_hex(contents);
  return data;
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (int i = 0; i < data.n(); ++i) out << data.feature_names[i] << ',';
  out << "label\n";
  for (int r = 0; r < data.size(); ++r) {
    for (int i = 0; i < data.n(); ++i) out << format_double(data.raw(r, i)) << ',';
    out << data.class_names[data.labels[r]] << '\n';
  }
}

std::vector<int> surround_order(const GridSpec& grid) {
  std::vector<int> cells(static_cast<std::size_t>(grid.cells()));
  std::iota(cells.begin(), cells.end(), 0);
  std::stable_sort(cells.begin(), cells.end(), [&](int a, int b) { return grid.ring(a) < grid.ring(b); });
  return cells;
}

std::vector<double> mask_random(std::span<const double> x, int m, Rng& rng, std::span<const double> baseline) {
  if (x.size() != baseline.size()) throw DimensionError("mask_random: x and baseline differ in length");
  const int n = static_cast<int>(x.size());
  if (m < 0 || m > n) throw ArgumentError("mask_random: m must lie in [0, n]");
  std::vector<int> cells(static_cast<std::size_t>(n));
  std::iota(cells.begin(), cells.end(), 0);
  std::vector<double> out(x.begin(), x.end());
  for (int t = 0; t < m; ++t) {
    const int pick = t + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n - t)));
    std::swap(cells[t], cells[pick]);
    out[cells[t]] = baseline[cells[t]];
  }
  return out;
}

std::vector<double> mask_surround(std::span<const double> x, int m, const GridSpec& grid, std::span<const double> baseline) {
  if (x.size() != baseline.size() || static_cast<int>(x.size()) != grid.cells()) {
    throw DimensionError("mask_surround: x, baseline and grid disagree in size");
  }
  if (m < 0 || m > grid.cells()) throw ArgumentError("mask_surround: m must lie in [0, n]");
  const std::vector<int> order = surround_order(grid);
  std::vector<double> out(x.begin(), x.end());
  for (int t = 0; t < m; ++t) out[order[t]] = baseline[order[t]];
  return out;
}

}  // namespace bottleneck
