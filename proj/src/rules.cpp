#include "tropfuzzy/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "tropfuzzy/data.hpp"
#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

namespace {

double positive_weight(const ExtractedRule& r) { return r.class_weights.back(); }

double cosine(const Matrix& s, std::size_t a, std::size_t b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t r = 0; r < s.rows(); ++r) {
    dot += s(r, a) * s(r, b);
    na += s(r, a) * s(r, a);
    nb += s(r, b) * s(r, b);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

double raw_units(const Standardization& stats, std::size_t variable, double v) {
  return stats.empty() ? v : stats.to_raw(variable, v);
}

std::string describe_concept(const NetworkParams& p, const Standardization& stats,
                             const RuleConcept& c) {
  const auto& var = p.schema[c.variable];
  if (!var.is_continuous()) return var.name + " = " + var.levels[c.concept_index];
  const auto k = p.knots(p.schema.continuous_slot(c.variable));
  std::array<double, 4> a;
  for (int i = 0; i < 4; ++i) a[i] = raw_units(stats, c.variable, k.a[i]);
  switch (c.concept_index) {
    case 0:
      return "full below " + fmt(a[0]) + ", none above " + fmt(a[1]);
    case 1:
      return "full in [" + fmt(a[1]) + ", " + fmt(a[2]) + "], none outside [" +
             fmt(a[0]) + ", " + fmt(a[3]) + "]";
    default:
      return "none below " + fmt(a[2]) + ", full above " + fmt(a[3]);
  }
}

std::size_t resolve_row(const FeatureSchema& schema, const RuleClause& clause,
                        std::size_t rule_index) {
  const auto where = "rule " + std::to_string(rule_index + 1) + ": ";
  const auto v = schema.find(clause.variable);
  if (!v) throw InputError(where + "unknown variable '" + clause.variable + "'");
  const auto d = schema[*v].find_concept(clause.concept_name);
  if (!d) {
    throw InputError(where + "variable '" + clause.variable +
                     "' has no concept '" + clause.concept_name + "'");
  }
  return schema.row_offset(*v) + *d;
}

}  // namespace

Matrix contribution_matrix(const NetworkParams& params) {
  const auto& schema = params.schema;
  Matrix s(schema.concept_rows(), params.rules);
  for (std::size_t row = 0; row < schema.concept_rows(); ++row) {
    const std::size_t v = schema.variable_of_row(row);
    for (std::size_t k = 0; k < params.rules; ++k) {
      s(row, k) = params.attention(row, k) * params.connection(v, k);
    }
  }
  return s;
}

RuleSet extract_rules(const NetworkParams& params, const ExtractOptions& options) {
  auto in_unit = [](double t) { return t > 0.0 && t < 1.0; };
  if (!in_unit(options.keep_threshold) || !in_unit(options.merge_threshold)) {
    throw InputError("extract_rules: thresholds must lie in (0, 1)");
  }
  const auto& schema = params.schema;
  const Matrix s = contribution_matrix(params);
  const double s_max = s.data().empty() ? 0.0 : *std::ranges::max_element(s.data());
  const double cut = options.keep_threshold * s_max;

  std::vector<ExtractedRule> candidates;
  for (std::size_t k = 0; k < params.rules; ++k) {
    ExtractedRule rule;
    rule.index = k;
    for (std::size_t c = 0; c < params.classes; ++c) {
      rule.class_weights.push_back(params.inference(k, c));
    }
    rule.target_class = static_cast<std::size_t>(
        std::ranges::max_element(rule.class_weights) - rule.class_weights.begin());
    if (!(positive_weight(rule) > 0.0)) continue;
    for (std::size_t row = 0; row < schema.concept_rows(); ++row) {
      if (s(row, k) < cut || s(row, k) <= 0.0) continue;
      const std::size_t v = schema.variable_of_row(row);
      rule.concepts.push_back({row, v, row - schema.row_offset(v), s(row, k)});
    }
    if (!rule.concepts.empty()) candidates.push_back(std::move(rule));
  }
  std::ranges::stable_sort(candidates, [](const auto& a, const auto& b) {
    return positive_weight(a) > positive_weight(b);
  });

  RuleSet out;
  for (auto& rule : candidates) {
    const bool redundant = std::ranges::any_of(out.rules, [&](const auto& kept) {
      return cosine(s, kept.index, rule.index) > options.merge_threshold;
    });
    if (!redundant) out.rules.push_back(std::move(rule));
  }
  if (out.rules.empty()) {
    out.warnings.push_back("no rules above threshold " +
                           fmt(options.keep_threshold));
  }
  return out;
}

std::string class_name(std::size_t cls, std::size_t classes) {
  if (classes == 2) return cls == 1 ? "positive" : "negative";
  return "class" + std::to_string(cls);
}

RuleReport render_rules(const RuleSet& rules, const NetworkParams& params,
                        const Standardization& stats) {
  const auto& schema = params.schema;
  RuleReport report;
  std::ostringstream text;
  if (rules.empty()) {
    text << "No rules above threshold.\n";
  }
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& r = rules.rules[i];
    text << "Rule " << i + 1 << " (column " << r.index + 1 << ", weight "
         << fmt(positive_weight(r)) << "): IF ";
    for (std::size_t c = 0; c < r.concepts.size(); ++c) {
      const auto& con = r.concepts[c];
      if (c) text << " AND ";
      text << schema[con.variable].name << " is "
           << schema[con.variable].concept_name(con.concept_index);
    }
    text << " THEN " << class_name(r.target_class, params.classes) << "\n";
    for (const auto& con : r.concepts) {
      text << "    " << schema.row_label(con.row) << "  S=" << fmt(con.contribution)
           << "  " << describe_concept(params, stats, con) << "\n";
    }
  }
  report.text = text.str();

  std::vector<std::size_t> rows;
  for (const auto& r : rules.rules) {
    for (const auto& c : r.concepts) rows.push_back(c.row);
  }
  std::ranges::sort(rows);
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  const Matrix s = contribution_matrix(params);
  std::ostringstream csv;
  csv << "concept";
  for (const auto& r : rules.rules) csv << ",rule_" << r.index + 1;
  csv << "\n";
  for (std::size_t row : rows) {
    csv << schema.row_label(row);
    for (const auto& r : rules.rules) csv << ',' << format_double(s(row, r.index));
    csv << "\n";
  }
  report.heatmap_csv = csv.str();
  return report;
}

std::string export_membership_curves(const NetworkParams& params,
                                     std::size_t grid_size,
                                     const Standardization& stats) {
  if (grid_size < 2) throw InputError("membership curves: grid size must be at least 2");
  const auto& schema = params.schema;
  std::ostringstream csv;
  csv << "variable,x,low,medium,high\n";
  for (std::size_t v = 0; v < schema.size(); ++v) {
    if (!schema[v].is_continuous()) continue;
    const auto knots = params.knots(schema.continuous_slot(v));
    const double lo = knots.a[0] - 2.0, hi = knots.a[3] + 2.0;
    for (std::size_t i = 0; i < grid_size; ++i) {
      const double x = lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(grid_size - 1);
      const auto m = encode_membership(x, knots, params.eps);
      csv << schema[v].name << ',' << format_double(raw_units(stats, v, x)) << ','
          << format_double(m.low) << ',' << format_double(m.medium) << ','
          << format_double(m.high) << "\n";
    }
  }
  return csv.str();
}

std::vector<RuleSpec> parse_rule_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("rule spec is not valid JSON: ") + e.what());
  }
  if (!j.is_array()) throw InputError("rule spec: expected a list of rules");
  std::vector<RuleSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto where = "rule spec entry " + std::to_string(i + 1) + ": ";
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("if") || !e["if"].is_array()) {
      throw InputError(where + "expected an object with an \"if\" list");
    }
    RuleSpec rule;
    for (const auto& c : e["if"]) {
      if (!c.is_array() || c.size() != 2 || !c[0].is_string() || !c[1].is_string()) {
        throw InputError(where + "clauses must be [variable, concept] pairs");
      }
      rule.clauses.push_back({c[0].get<std::string>(), c[1].get<std::string>()});
    }
    if (rule.clauses.empty()) throw InputError(where + "empty \"if\" list");
    if (e.contains("then")) {
      if (!e["then"].is_string()) throw InputError(where + "\"then\" must be a string");
      rule.then = e["then"].get<std::string>();
    }
    if (e.contains("strength")) {
      if (!e["strength"].is_number()) throw InputError(where + "\"strength\" must be a number");
      const double s = e["strength"].get<double>();
      if (!(s > 0.0 && s < 1.0)) throw InputError(where + "\"strength\" must lie in (0, 1)");
      rule.strength = s;
    }
    out.push_back(std::move(rule));
  }
  return out;
}

std::vector<RuleSpec> load_rule_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read rule spec '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rule_spec(ss.str());
}

std::size_t resolve_class(const std::string& name, std::size_t classes) {
  if (classes == 2) {
    if (name == "positive" || name == "1") return 1;
    if (name == "negative" || name == "0") return 0;
  }
  std::string digits = name.starts_with("class") ? name.substr(5) : name;
  if (!digits.empty() && std::ranges::all_of(digits, ::isdigit)) {
    const auto c = std::stoul(digits);
    if (c < classes) return c;
  }
  throw InputError("unknown class '" + name + "'");
}

void inject_knowledge(NetworkParams& params, const std::vector<RuleSpec>& spec) {
  if (spec.size() > params.rules) {
    throw InputError("rule spec has " + std::to_string(spec.size()) +
                     " rules but the network has " + std::to_string(params.rules));
  }
  const auto& schema = params.schema;
  struct Resolved {
    std::vector<bool> rows, variables;
    std::size_t target;
    double high;
  };
  std::vector<Resolved> resolved;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    Resolved r{std::vector<bool>(schema.concept_rows()),
               std::vector<bool>(schema.size()), 0,
               spec[j].strength.value_or(kInjectHigh)};
    for (const auto& clause : spec[j].clauses) {
      const auto row = resolve_row(schema, clause, j);
      r.rows[row] = true;
      r.variables[schema.variable_of_row(row)] = true;
    }
    try {
      r.target = resolve_class(spec[j].then, params.classes);
    } catch (const InputError& e) {
      throw InputError("rule " + std::to_string(j + 1) + ": " + e.what());
    }
    resolved.push_back(std::move(r));
  }

  for (std::size_t j = 0; j < resolved.size(); ++j) {
    const auto& r = resolved[j];
    for (std::size_t row = 0; row < schema.concept_rows(); ++row) {
      params.attention_raw(row, j) = constrain01_inv(r.rows[row] ? r.high : kInjectLow);
    }
    for (std::size_t v = 0; v < schema.size(); ++v) {
      params.connection_raw(v, j) = constrain01_inv(r.variables[v] ? r.high : kInjectLow);
    }
    for (std::size_t c = 0; c < params.classes; ++c) {
      if (params.masks_negative() && c == 0) {
        params.inference_raw(j, c) = 0.0;
        continue;
      }
      params.inference_raw(j, c) = constrain_pos_inv(c == r.target ? r.high : kInjectLow);
    }
  }
}

ConceptSet concept_set(const ExtractedRule& rule, const FeatureSchema& schema) {
  ConceptSet out;
  for (const auto& c : rule.concepts) out.insert(schema.row_label(c.row));
  return out;
}

ConceptSet concept_set(const RuleSpec& rule, const FeatureSchema& schema) {
  ConceptSet out;
  for (const auto& c : rule.clauses) out.insert(schema.row_label(resolve_row(schema, c, 0)));
  return out;
}

double jaccard(const ConceptSet& a, const ConceptSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) /
         static_cast<double>(a.size() + b.size() - common);
}

std::vector<RuleMatch> greedy_match(const std::vector<ConceptSet>& extracted,
                                    const std::vector<ConceptSet>& truth) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t e = 0; e < extracted.size(); ++e) {
      const double jac = jaccard(extracted[e], truth[t]);
      if (jac > 0.0) pairs.emplace_back(jac, t, e);
    }
  }
  std::ranges::stable_sort(pairs, [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) <
           std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::vector<RuleMatch> out(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) out[t].truth = t;
  std::vector<bool> used(extracted.size());
  for (const auto& [jac, t, e] : pairs) {
    if (out[t].extracted || used[e]) continue;
    out[t].extracted = e;
    out[t].jaccard = jac;
    used[e] = true;
  }
  return out;
}

}  // namespace tropfuzzy
