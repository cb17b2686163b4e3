#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tropfuzzy {

enum class VariableKind { kContinuous, kCategorical };

inline constexpr std::size_t kContinuousConcepts = 3;

struct VariableSchema {
  std::string name;
  VariableKind kind = VariableKind::kContinuous;
  std::vector<std::string> levels;  // categorical only

  static VariableSchema continuous(std::string name);
  static VariableSchema categorical(std::string name,
                                    std::vector<std::string> levels);

  bool is_continuous() const { return kind == VariableKind::kContinuous; }
  std::size_t concept_count() const {
    return is_continuous() ? kContinuousConcepts : levels.size();
  }
  // "low"/"medium"/"high" for continuous variables, the level name otherwise.
  const std::string& concept_name(std::size_t d) const;
  std::optional<std::size_t> find_concept(std::string_view label) const;
};

// Ordered feature variables. The block layout of the attention and
// contribution matrices follows this order.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws InputError on duplicate names, duplicate levels or a
  // categorical variable with fewer than two levels.
  explicit FeatureSchema(std::vector<VariableSchema> variables);

  const std::vector<VariableSchema>& variables() const { return variables_; }
  const VariableSchema& operator[](std::size_t i) const { return variables_[i]; }
  std::size_t size() const { return variables_.size(); }
  bool empty() const { return variables_.empty(); }

  // 3 * (#continuous) + sum of categorical level counts.
  std::size_t concept_rows() const { return concept_rows_; }
  std::size_t row_offset(std::size_t variable) const { return offsets_[variable]; }
  std::size_t continuous_count() const { return continuous_count_; }
  // Index of a continuous variable among the continuous ones.
  std::size_t continuous_slot(std::size_t variable) const { return slots_[variable]; }
  std::optional<std::size_t> find(std::string_view name) const;
  // Variable index owning a concept row.
  std::size_t variable_of_row(std::size_t row) const;
  // "x1_low", "x6_0".
  std::string row_label(std::size_t row) const;

  bool operator==(const FeatureSchema& other) const;

 private:
  std::vector<VariableSchema> variables_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> slots_;
  std::vector<std::size_t> row_owner_;
  std::size_t concept_rows_ = 0;
  std::size_t continuous_count_ = 0;
};

// Per-variable standardization statistics from a training split.
// Categorical variables carry mean 0 / std 1 and are never transformed.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<bool> constant;  // std below threshold: centered only

  bool empty() const { return mean.empty(); }
  double to_standard(std::size_t variable, double raw) const;
  double to_raw(std::size_t variable, double standard) const;

  bool operator==(const Standardization&) const = default;
};

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return std::span(data_).subspan(r * cols_, cols_); }
  std::span<const double> row(std::size_t r) const {
    return std::span(data_).subspan(r * cols_, cols_);
  }
  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace tropfuzzy
