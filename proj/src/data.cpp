#include "tropfuzzy/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/rng.hpp"

namespace tropfuzzy {

namespace {

constexpr std::size_t kCalibrationSamples = 100000;
constexpr std::uint64_t kCalibrationSeed = 20210923;
constexpr double kConstantStd = 1e-9;

double spread(double s, GaussianReading reading) {
  return reading == GaussianReading::kStdDev ? s : std::sqrt(s);
}

// Means and spreads (as written in the benchmark definitions).
struct GaussianSpec {
  double mean;
  double s;
};

constexpr GaussianSpec kSynth1[] = {{0, 2}, {5, 3}, {-1, 5}, {1, 2},
                                    {-2, 1}, {0, 0}, {0, 1}, {0, 1}};
constexpr GaussianSpec kSynth2[] = {{0, 2},  {5, 3},    {-1, 5},
                                    {1, 2},  {-2, 1},   {-1, 4.4},
                                    {0, 1.2}, {0, 1},   {0, 1}};
constexpr std::size_t kSynth1Categorical = 5;  // x6
constexpr double kNoiseSpread = 0.01;

std::vector<double> draw_synth1_clean(std::mt19937_64& rng,
                                      GaussianReading reading) {
  std::vector<double> x(8);
  for (std::size_t i = 0; i < 8; ++i) {
    if (i == kSynth1Categorical) {
      x[i] = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
    } else {
      x[i] = std::normal_distribution<double>(
          kSynth1[i].mean, spread(kSynth1[i].s, reading))(rng);
    }
  }
  return x;
}

double prevalence_under(GaussianReading reading) {
  auto rng = make_stream(kCalibrationSeed, "calibration");
  std::size_t positives = 0;
  for (std::size_t n = 0; n < kCalibrationSamples; ++n) {
    positives += synthetic1_label(draw_synth1_clean(rng, reading));
  }
  return static_cast<double>(positives) / kCalibrationSamples;
}

// Largest-remainder apportionment of `total` over groups of size `sizes`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes,
                                   std::size_t total) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double exact = static_cast<double>(sizes[g]) * total / n;
    out[g] = static_cast<std::size_t>(std::floor(exact));
    used += out[g];
    remainders.emplace_back(-(exact - out[g]), g);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; used < total; ++i, ++used) {
    ++out[remainders[i % remainders.size()].second];
  }
  return out;
}

std::vector<std::vector<std::size_t>> class_groups(
    const Dataset& data, std::span<const std::size_t> indices,
    bool stratified) {
  if (!stratified) return {std::vector<std::size_t>(indices.begin(), indices.end())};
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i : indices) groups[data.labels[i]].push_back(i);
  for (std::size_t c = 0; c < 2; ++c) {
    if (groups[c].empty()) {
      throw InputError("split: class " + std::to_string(c) +
                       " is absent, cannot stratify");
    }
  }
  return groups;
}

// Splits `indices` into (first, second) with |second| = round(frac * n),
// stratified per class when requested.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve(
    const Dataset& data, std::span<const std::size_t> indices, double frac,
    bool stratified, std::mt19937_64& rng, const char* what) {
  auto groups = class_groups(data, indices, stratified);
  std::vector<std::size_t> sizes;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    sizes.push_back(g.size());
  }
  const auto total = static_cast<std::size_t>(
      std::llround(frac * static_cast<double>(indices.size())));
  const auto take = apportion(sizes, total);
  std::vector<std::size_t> first, second;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (stratified && (take[g] == 0 || take[g] == groups[g].size()) && frac > 0.0) {
      throw InputError(std::string("split: class ") + std::to_string(g) +
                       " would be absent from the " + what + " set");
    }
    second.insert(second.end(), groups[g].begin(), groups[g].begin() + take[g]);
    first.insert(first.end(), groups[g].begin() + take[g], groups[g].end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {first, second};
}

// --- CSV -----------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& where) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // CRLF line ending
    } else if (c == '\n') {
      end_record();
      ++line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw InputError(where + ": unterminated quoted field at line " + std::to_string(line));
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "?";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct ColumnSpec {
  std::string kind;
  std::vector<std::string> levels;
  std::string role;
};

}  // namespace

double Dataset::prevalence() const {
  if (labels.empty()) return 0.0;
  return static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
         static_cast<double>(labels.size());
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.schema = data.schema;
  out.label_name = data.label_name;
  out.stats = data.stats;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.rows.push_back(data.rows.at(i));
    out.labels.push_back(data.labels.at(i));
  }
  return out;
}

const char* to_string(GaussianReading reading) {
  return reading == GaussianReading::kStdDev ? "stddev" : "variance";
}

const CalibrationResult& calibrate_gaussian_reading() {
  static const CalibrationResult result = [] {
    CalibrationResult r;
    r.samples = kCalibrationSamples;
    r.prevalence_stddev = prevalence_under(GaussianReading::kStdDev);
    r.prevalence_variance = prevalence_under(GaussianReading::kVariance);
    r.chosen = std::abs(r.prevalence_stddev - r.target) <
                       std::abs(r.prevalence_variance - r.target)
                   ? GaussianReading::kStdDev
                   : GaussianReading::kVariance;
    return r;
  }();
  return result;
}

std::array<bool, 5> synthetic1_rules(std::span<const double> x) {
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3], x5 = x[4];
  const bool x6 = x[5] > 0.5;
  return {
      x2 < 3.8 && x3 > -2 && x6,    // A
      x2 > 6.3 && x3 > -2 && x6,    // B
      x1 < 1 && x4 > 2 && !x6,      // C
      x3 > 0 && x5 > -1 && !x6,     // D
      x1 < 1 && x5 > -1.5 && !x6,   // E
  };
}

int synthetic1_label(std::span<const double> x) {
  const auto r = synthetic1_rules(x);
  return std::any_of(r.begin(), r.end(), [](bool b) { return b; }) ? 1 : 0;
}

int synthetic2_label(std::span<const double> x) {
  const double num = x[0] + 0.5 * x[1] + x[2];
  const double den = 1.0 + std::exp(x[5]) + 2.0 * x[6];
  return num * num / den < 1.0 ? 1 : 0;
}

FeatureSchema synthetic1_schema() {
  std::vector<VariableSchema> vars;
  for (int i = 1; i <= 8; ++i) {
    const std::string name = "x" + std::to_string(i);
    vars.push_back(i == 6 ? VariableSchema::categorical(name, {"0", "1"})
                          : VariableSchema::continuous(name));
  }
  return FeatureSchema(std::move(vars));
}

FeatureSchema synthetic2_schema() {
  std::vector<VariableSchema> vars;
  for (int i = 1; i <= 9; ++i) {
    vars.push_back(VariableSchema::continuous("x" + std::to_string(i)));
  }
  return FeatureSchema(std::move(vars));
}

SyntheticResult generate_synthetic1(std::size_t n, std::uint64_t seed) {
  return generate_synthetic1(n, seed, calibrate_gaussian_reading().chosen);
}

SyntheticResult generate_synthetic1(std::size_t n, std::uint64_t seed,
                                    GaussianReading reading) {
  if (n == 0) throw InputError("generate: n must be at least 1");
  SyntheticResult out;
  out.reading = reading;
  out.data.schema = synthetic1_schema();
  auto rng = make_stream(seed, "data");
  std::normal_distribution<double> noise(0.0, spread(kNoiseSpread, reading));
  std::array<std::size_t, 5> rule_counts{};
  for (std::size_t r = 0; r < n; ++r) {
    auto x = draw_synth1_clean(rng, reading);
    const auto fired = synthetic1_rules(x);
    for (std::size_t j = 0; j < 5; ++j) rule_counts[j] += fired[j];
    out.data.labels.push_back(synthetic1_label(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != kSynth1Categorical) x[i] += noise(rng);
    }
    out.data.rows.push_back(std::move(x));
  }
  for (std::size_t j = 0; j < 5; ++j) {
    out.rule_rates[j] = static_cast<double>(rule_counts[j]) / static_cast<double>(n);
  }
  return out;
}

SyntheticResult generate_synthetic2(std::size_t n, std::uint64_t seed) {
  return generate_synthetic2(n, seed, calibrate_gaussian_reading().chosen);
}

SyntheticResult generate_synthetic2(std::size_t n, std::uint64_t seed,
                                    GaussianReading reading) {
  if (n == 0) throw InputError("generate: n must be at least 1");
  SyntheticResult out;
  out.reading = reading;
  out.data.schema = synthetic2_schema();
  auto rng = make_stream(seed, "data");
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> x(9);
    for (std::size_t i = 0; i < 9; ++i) {
      x[i] = std::normal_distribution<double>(kSynth2[i].mean,
                                              spread(kSynth2[i].s, reading))(rng);
    }
    out.data.labels.push_back(synthetic2_label(x));
    out.data.rows.push_back(std::move(x));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvLoadResult load_csv(const std::filesystem::path& data_path,
                       const std::filesystem::path& schema_path) {
  nlohmann::json schema_json;
  try {
    schema_json = nlohmann::json::parse(read_file(schema_path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("schema '" + schema_path.string() + "': " + e.what());
  }
  if (!schema_json.is_object()) {
    throw InputError("schema '" + schema_path.string() + "' must be a JSON object");
  }
  std::map<std::string, ColumnSpec> specs;
  std::string label_column;
  for (const auto& [name, spec] : schema_json.items()) {
    ColumnSpec c;
    try {
      c.kind = spec.at("kind").get<std::string>();
      c.role = spec.value("role", c.kind == "binary" ? "label" : "feature");
      if (spec.contains("levels")) c.levels = spec.at("levels").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError("schema column '" + name + "': " + e.what());
    }
    if (c.kind != "continuous" && c.kind != "categorical" && c.kind != "binary") {
      throw InputError("schema column '" + name + "': unknown kind '" + c.kind + "'");
    }
    if (c.role == "label") {
      if (!label_column.empty()) throw InputError("schema declares more than one label column");
      label_column = name;
    } else if (c.role != "feature") {
      throw InputError("schema column '" + name + "': unknown role '" + c.role + "'");
    }
    specs.emplace(name, std::move(c));
  }
  if (label_column.empty()) throw InputError("schema declares no label column");

  const auto records = parse_csv(read_file(data_path), data_path.string());
  if (records.empty()) throw InputError("'" + data_path.string() + "': missing header");
  const auto& header = records.front();
  std::set<std::string> seen;
  std::vector<VariableSchema> vars;
  std::vector<std::size_t> feature_cols;
  std::size_t label_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto it = specs.find(header[c]);
    if (it == specs.end()) {
      throw InputError("'" + data_path.string() + "': unknown column '" + header[c] + "'");
    }
    if (!seen.insert(header[c]).second) {
      throw InputError("'" + data_path.string() + "': duplicate column '" + header[c] + "'");
    }
    if (header[c] == label_column) {
      label_col = c;
      continue;
    }
    feature_cols.push_back(c);
    vars.push_back(it->second.kind == "categorical"
                       ? VariableSchema::categorical(header[c], it->second.levels)
                       : VariableSchema::continuous(header[c]));
  }
  for (const auto& [name, spec] : specs) {
    if (!seen.count(name)) {
      throw InputError("'" + data_path.string() + "': schema column '" + name +
                       "' missing from header");
    }
  }

  CsvLoadResult out;
  out.data.schema = FeatureSchema(std::move(vars));
  out.data.label_name = label_column;
  const auto& label_levels = specs.at(label_column).levels;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "'" + data_path.string() + "' row " + std::to_string(r);
    if (rec.size() != header.size()) {
      throw InputError(where + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(rec.size()));
    }
    std::vector<double> row(feature_cols.size());
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      const auto& cell = rec[feature_cols[f]];
      const auto& var = out.data.schema[f];
      const std::string loc = where + ", column '" + var.name + "'";
      if (var.is_continuous()) {
        if (is_missing(cell)) {
          row[f] = std::numeric_limits<double>::quiet_NaN();
          ++out.missing_continuous;
          continue;
        }
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
            !std::isfinite(v)) {
          throw InputError(loc + ": cannot parse '" + cell + "' as a number");
        }
        row[f] = v;
      } else {
        if (is_missing(cell)) throw InputError(loc + ": missing categorical value");
        const auto level = var.find_concept(cell);
        if (!level) throw InputError(loc + ": unknown level '" + cell + "'");
        row[f] = static_cast<double>(*level);
      }
    }
    const auto& cell = rec[label_col];
    int label = -1;
    if (is_missing(cell)) throw InputError(where + ": missing label");
    if (label_levels.size() == 2) {
      if (cell == label_levels[0]) label = 0;
      if (cell == label_levels[1]) label = 1;
    } else if (cell == "0" || cell == "1") {
      label = cell == "1" ? 1 : 0;
    }
    if (label < 0) {
      throw InputError(where + ", column '" + label_column + "': label '" + cell +
                       "' is not a binary class");
    }
    out.data.rows.push_back(std::move(row));
    out.data.labels.push_back(label);
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  for (const auto& v : data.schema.variables()) out << quote_csv(v.name) << ',';
  out << quote_csv(data.label_name) << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t i = 0; i < data.schema.size(); ++i) {
      const auto& var = data.schema[i];
      const double v = data.rows[r][i];
      if (var.is_continuous()) {
        out << (std::isnan(v) ? std::string("NA") : format_double(v));
      } else {
        out << quote_csv(var.levels.at(static_cast<std::size_t>(v)));
      }
      out << ',';
    }
    out << data.labels[r] << '\n';
  }
  if (!out) throw InputError("error writing '" + path.string() + "'");
}

void write_schema(const Dataset& data, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  for (const auto& v : data.schema.variables()) {
    nlohmann::ordered_json col;
    col["kind"] = v.is_continuous() ? "continuous" : "categorical";
    if (!v.is_continuous()) col["levels"] = v.levels;
    col["role"] = "feature";
    j[v.name] = col;
  }
  j[data.label_name] = {{"kind", "binary"}, {"role", "label"}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

SplitSpec SplitSpec::kfold(std::size_t k, std::uint64_t seed) {
  SplitSpec s;
  s.mode = Mode::kKFold;
  s.k = k;
  s.seed = seed;
  return s;
}

SplitSpec SplitSpec::ratio(double train, double val, double test,
                           std::uint64_t seed) {
  SplitSpec s;
  s.mode = Mode::kRatio;
  s.train = train;
  s.val = val;
  s.test = test;
  s.seed = seed;
  return s;
}

std::vector<Partition> split(const Dataset& data, const SplitSpec& spec) {
  if (data.size() == 0) throw InputError("split: empty dataset");
  auto rng = make_stream(spec.seed, "split");
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  if (spec.mode == SplitSpec::Mode::kRatio) {
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9 ||
        spec.train <= 0 || spec.val < 0 || spec.test < 0) {
      throw InputError("split: ratios must be non-negative and sum to 1");
    }
    Partition p;
    auto [rest, test] = carve(data, all, spec.test, spec.stratified, rng, "test");
    const double val_frac = spec.val * static_cast<double>(data.size()) /
                            static_cast<double>(rest.size());
    auto [train, val] = carve(data, rest, val_frac, spec.stratified, rng, "validation");
    return {Partition{std::move(train), std::move(val), std::move(test)}};
  }

  if (spec.k < 2) throw InputError("split: k-fold needs k >= 2");
  if (spec.k > data.size()) throw InputError("split: more folds than rows");
  auto groups = class_groups(data, all, spec.stratified);
  std::vector<std::size_t> order;
  for (auto& g : groups) {
    if (spec.stratified && g.size() < spec.k) {
      throw InputError("split: a class has fewer rows than folds");
    }
    std::shuffle(g.begin(), g.end(), rng);
    order.insert(order.end(), g.begin(), g.end());
  }
  std::vector<std::vector<std::size_t>> folds(spec.k);
  for (std::size_t i = 0; i < order.size(); ++i) folds[i % spec.k].push_back(order[i]);

  std::vector<Partition> parts;
  for (std::size_t f = 0; f < spec.k; ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t g = 0; g < spec.k; ++g) {
      if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(rest.begin(), rest.end());
    auto inner = make_stream(spec.seed, "split-inner", f);
    auto [train, val] = carve(data, rest, 0.2, spec.stratified, inner, "validation");
    std::sort(folds[f].begin(), folds[f].end());
    parts.push_back(Partition{std::move(train), std::move(val), folds[f]});
  }
  return parts;
}

StandardizeResult standardize(const Dataset& data,
                              std::span<const std::size_t> train_indices) {
  if (train_indices.empty()) throw InputError("standardize: empty training split");
  const std::size_t h = data.schema.size();
  Standardization stats;
  stats.mean.assign(h, 0.0);
  stats.stddev.assign(h, 1.0);
  stats.constant.assign(h, false);
  StandardizeResult out;
  for (std::size_t i = 0; i < h; ++i) {
    if (!data.schema[i].is_continuous()) continue;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r : train_indices) {
      const double v = data.rows[r][i];
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (std::size_t r : train_indices) {
      const double v = data.rows[r][i];
      if (!std::isnan(v)) ss += (v - mean) * (v - mean);
    }
    const double sd = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
    stats.mean[i] = mean;
    if (sd < kConstantStd) {
      stats.constant[i] = true;
      out.constant_columns.push_back(data.schema[i].name);
    } else {
      stats.stddev[i] = sd;
    }
  }
  out.data = apply_standardization(data, stats);
  return out;
}

Dataset apply_standardization(const Dataset& data, const Standardization& stats) {
  Dataset out = data;
  out.stats = stats;
  for (auto& row : out.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!data.schema[i].is_continuous()) continue;
      row[i] = std::isnan(row[i]) ? 0.0 : stats.to_standard(i, row[i]);
    }
  }
  return out;
}

}  // namespace tropfuzzy
