#include "tropfuzzy/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw InputError("model field '" + field + "': " + what);
}

const Json& need(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) bad(path + key, "missing");
  return j.at(key);
}

double need_number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "not finite");
  return v;
}

std::size_t need_count(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned()) bad(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

std::string need_string(const Json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> need_numbers(const Json& j, const std::string& path,
                                 std::size_t expected) {
  if (!j.is_array()) bad(path, "expected an array");
  if (j.size() != expected) {
    bad(path, "expected " + std::to_string(expected) + " values, got " +
                  std::to_string(j.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(need_number(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix parse_matrix(const Json& j, const std::string& path, std::size_t rows,
                    std::size_t cols) {
  if (!j.is_array() || j.size() != rows) {
    bad(path, "expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = need_numbers(j[r], path + "[" + std::to_string(r) + "]", cols);
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

FeatureSchema parse_schema(const Json& j) {
  if (!j.is_array() || j.empty()) bad("schema", "expected a non-empty array");
  std::vector<VariableSchema> vars;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string path = "schema[" + std::to_string(i) + "].";
    const auto name = need_string(need(j[i], "name", path), path + "name");
    const auto kind = need_string(need(j[i], "kind", path), path + "kind");
    if (kind == "continuous") {
      vars.push_back(VariableSchema::continuous(name));
    } else if (kind == "categorical") {
      const auto& lv = need(j[i], "levels", path);
      if (!lv.is_array()) bad(path + "levels", "expected an array");
      std::vector<std::string> levels;
      for (const auto& l : lv) levels.push_back(need_string(l, path + "levels"));
      vars.push_back(VariableSchema::categorical(name, std::move(levels)));
    } else {
      bad(path + "kind", "unknown kind '" + kind + "'");
    }
  }
  try {
    return FeatureSchema(std::move(vars));
  } catch (const InputError& e) {
    bad("schema", e.what());
  }
}

}  // namespace

std::string model_to_string(const Model& model) {
  const auto& p = model.params;
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["label"] = model.label_name;
  Json schema = Json::array();
  for (const auto& v : p.schema.variables()) {
    Json col;
    col["name"] = v.name;
    col["kind"] = v.is_continuous() ? "continuous" : "categorical";
    if (!v.is_continuous()) col["levels"] = v.levels;
    schema.push_back(col);
  }
  j["schema"] = schema;
  j["rules"] = p.rules;
  j["classes"] = p.classes;
  j["eps"] = p.eps.value();
  Json knots = Json::array();
  for (const auto& k : p.knot_raw) knots.push_back(std::vector<double>(k.begin(), k.end()));
  j["knot_raw"] = knots;
  j["attention_raw"] = matrix_json(p.attention_raw);
  j["connection_raw"] = matrix_json(p.connection_raw);
  j["inference_raw"] = matrix_json(p.inference_raw);
  j["negative_bias"] = p.negative_bias;
  Json stats;
  stats["mean"] = model.stats.mean;
  stats["stddev"] = model.stats.stddev;
  stats["constant"] = model.stats.constant;
  j["standardization"] = stats;
  return j.dump(1) + "\n";
}

Model model_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("<root>", "expected an object");
  const auto version = need_count(need(j, "format_version", ""), "format_version");
  if (version != kModelFormatVersion) {
    bad("format_version", "unsupported version " + std::to_string(version));
  }
  Model m;
  if (j.contains("label")) m.label_name = need_string(j["label"], "label");
  auto schema = parse_schema(need(j, "schema", ""));
  const auto rules = need_count(need(j, "rules", ""), "rules");
  const auto classes = need_count(need(j, "classes", ""), "classes");
  if (rules == 0) bad("rules", "must be positive");
  if (classes < 2) bad("classes", "must be at least 2");
  auto p = NetworkParams::zeros(schema, rules, classes);
  const double eps = need_number(need(j, "eps", ""), "eps");
  if (!(eps > 0.0 && eps < 1.0)) bad("eps", "must lie in (0, 1)");
  p.eps = Smoothness(eps);

  const auto& knots = need(j, "knot_raw", "");
  if (!knots.is_array() || knots.size() != schema.continuous_count()) {
    bad("knot_raw", "expected " + std::to_string(schema.continuous_count()) +
                        " entries");
  }
  for (std::size_t s = 0; s < knots.size(); ++s) {
    const auto v = need_numbers(knots[s], "knot_raw[" + std::to_string(s) + "]", 4);
    std::copy(v.begin(), v.end(), p.knot_raw[s].begin());
  }
  p.attention_raw = parse_matrix(need(j, "attention_raw", ""), "attention_raw",
                                 schema.concept_rows(), rules);
  p.connection_raw = parse_matrix(need(j, "connection_raw", ""), "connection_raw",
                                  schema.size(), rules);
  p.inference_raw = parse_matrix(need(j, "inference_raw", ""), "inference_raw",
                                 rules, classes);
  p.negative_bias = need_number(need(j, "negative_bias", ""), "negative_bias");

  // Empty arrays mean the network works on raw values.
  const auto& st = need(j, "standardization", "");
  const auto& mean = need(st, "mean", "standardization.");
  const std::size_t n_stats = mean.is_array() && mean.empty() ? 0 : schema.size();
  m.stats.mean = need_numbers(mean, "standardization.mean", n_stats);
  m.stats.stddev = need_numbers(need(st, "stddev", "standardization."),
                                "standardization.stddev", n_stats);
  const auto& c = need(st, "constant", "standardization.");
  if (!c.is_array() || c.size() != n_stats) {
    bad("standardization.constant", "expected " + std::to_string(n_stats) +
                                        " booleans");
  }
  for (const auto& b : c) {
    if (!b.is_boolean()) bad("standardization.constant", "expected booleans");
    m.stats.constant.push_back(b.get<bool>());
  }
  for (std::size_t v = 0; v < n_stats; ++v) {
    if (!(m.stats.stddev[v] > 0.0)) bad("standardization.stddev", "must be positive");
  }
  m.params = std::move(p);
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model '" + path.string() + "'");
  out << model_to_string(model);
  if (!out) throw std::runtime_error("failed writing model '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str());
}

}  // namespace tropfuzzy
