#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tropfuzzy/network.hpp"

namespace tropfuzzy {

// S = A * M broadcast over each variable's block: concept_rows x rules.
Matrix contribution_matrix(const NetworkParams& params);

struct RuleConcept {
  std::size_t row = 0;       // concept row in S
  std::size_t variable = 0;
  std::size_t concept_index = 0;
  double contribution = 0.0;
};

struct ExtractedRule {
  std::size_t index = 0;  // column of S / row of W
  std::vector<RuleConcept> concepts;
  std::vector<double> class_weights;  // constrained W row
  std::size_t target_class = 0;       // argmax of class_weights
};

struct ExtractOptions {
  // Concepts below keep_threshold * max(S) are dropped.
  double keep_threshold = 0.2;
  // Rule pairs whose S columns have cosine similarity above this merge,
  // keeping the one with the larger positive-class weight.
  double merge_threshold = 0.95;
};

struct RuleSet {
  std::vector<ExtractedRule> rules;  // descending positive-class weight
  std::vector<std::string> warnings;
  bool empty() const { return rules.empty(); }
};

// Throws InputError unless both thresholds lie in (0, 1).
RuleSet extract_rules(const NetworkParams& params,
                      const ExtractOptions& options = {});

std::string class_name(std::size_t cls, std::size_t classes);

struct RuleReport {
  std::string text;
  std::string heatmap_csv;  // concept label x kept rule, cells are S
};

// Knot positions are mapped back to raw units with `stats` when given.
RuleReport render_rules(const RuleSet& rules, const NetworkParams& params,
                        const Standardization& stats = {});

// CSV with columns variable,x,low,medium,high. Each continuous variable is
// sampled on grid_size points spanning [a1 - 2, a4 + 2] in standardized
// units; x is reported in raw units when stats are given.
std::string export_membership_curves(const NetworkParams& params,
                                     std::size_t grid_size,
                                     const Standardization& stats = {});

struct RuleClause {
  std::string variable;
  std::string concept_name;
};

struct RuleSpec {
  std::vector<RuleClause> clauses;
  std::string then = "positive";
  std::optional<double> strength;  // constrained value of the named entries
};

// [{"if": [["x1","low"],["x5","high"],["x6","0"]], "then": "positive"}, ...]
std::vector<RuleSpec> parse_rule_spec(const std::string& text);
std::vector<RuleSpec> load_rule_spec(const std::filesystem::path& path);

// "positive"/"negative" in binary tasks, otherwise "class<c>" or the index.
std::size_t resolve_class(const std::string& name, std::size_t classes);

inline constexpr double kInjectHigh = 0.9;
inline constexpr double kInjectLow = 0.05;

// Rule j of the rule file overwrites column j of A and M and row j of W:
// named entries get the high value, the rest of that column the low one.
// Knots and the remaining columns are left as they are. Throws InputError
// on unknown variables/concepts/classes or more rules than columns.
void inject_knowledge(NetworkParams& params, const std::vector<RuleSpec>& spec);

using ConceptSet = std::set<std::string>;  // row labels like "x1_low"

ConceptSet concept_set(const ExtractedRule& rule, const FeatureSchema& schema);
// Validates every clause against the schema.
ConceptSet concept_set(const RuleSpec& rule, const FeatureSchema& schema);
double jaccard(const ConceptSet& a, const ConceptSet& b);

struct RuleMatch {
  std::size_t truth = 0;
  std::optional<std::size_t> extracted;
  double jaccard = 0.0;
};

// Greedy maximum-Jaccard assignment: repeatedly pairs the unassigned truth
// and extracted rules with the highest similarity. One entry per truth rule,
// in truth order.
std::vector<RuleMatch> greedy_match(const std::vector<ConceptSet>& extracted,
                                    const std::vector<ConceptSet>& truth);

}  // namespace tropfuzzy
