#include "tropfuzzy/schema.hpp"

#include <set>

#include "tropfuzzy/errors.hpp"

namespace tropfuzzy {

VariableSchema VariableSchema::continuous(std::string name) {
  return VariableSchema{std::move(name), VariableKind::kContinuous, {}};
}

VariableSchema VariableSchema::categorical(std::string name,
                                           std::vector<std::string> levels) {
  return VariableSchema{std::move(name), VariableKind::kCategorical,
                        std::move(levels)};
}

const std::string& VariableSchema::concept_name(std::size_t d) const {
  static const std::string kNames[kContinuousConcepts] = {"low", "medium", "high"};
  return is_continuous() ? kNames[d] : levels.at(d);
}

std::optional<std::size_t> VariableSchema::find_concept(
    std::string_view label) const {
  for (std::size_t d = 0; d < concept_count(); ++d) {
    if (concept_name(d) == label) return d;
  }
  return std::nullopt;
}

FeatureSchema::FeatureSchema(std::vector<VariableSchema> variables)
    : variables_(std::move(variables)) {
  std::set<std::string> names;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw InputError("schema: empty variable name");
    if (!names.insert(v.name).second) {
      throw InputError("schema: duplicate variable '" + v.name + "'");
    }
    if (!v.is_continuous()) {
      if (v.levels.size() < 2) {
        throw InputError("schema: categorical variable '" + v.name +
                         "' needs at least two levels");
      }
      std::set<std::string> levels(v.levels.begin(), v.levels.end());
      if (levels.size() != v.levels.size()) {
        throw InputError("schema: duplicate level in '" + v.name + "'");
      }
    }
    offsets_.push_back(concept_rows_);
    slots_.push_back(v.is_continuous() ? continuous_count_++ : 0);
    for (std::size_t d = 0; d < v.concept_count(); ++d) {
      row_owner_.push_back(offsets_.size() - 1);
    }
    concept_rows_ += v.concept_count();
  }
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::variable_of_row(std::size_t row) const {
  return row_owner_.at(row);
}

std::string FeatureSchema::row_label(std::size_t row) const {
  const std::size_t v = variable_of_row(row);
  return variables_[v].name + "_" +
         variables_[v].concept_name(row - offsets_[v]);
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
  if (variables_.size() != other.variables_.size()) return false;
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    const auto& a = variables_[i];
    const auto& b = other.variables_[i];
    if (a.name != b.name || a.kind != b.kind || a.levels != b.levels) return false;
  }
  return true;
}

double Standardization::to_standard(std::size_t variable, double raw) const {
  if (empty()) return raw;
  return (raw - mean[variable]) / stddev[variable];
}

double Standardization::to_raw(std::size_t variable, double standard) const {
  if (empty()) return standard;
  return standard * stddev[variable] + mean[variable];
}

}  // namespace tropfuzzy
