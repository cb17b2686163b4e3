#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tropfuzzy/schema.hpp"

namespace tropfuzzy {

// Tabular binary-classification data. Continuous values are reals (NaN marks
// a missing value until standardization imputes it); categorical values are
// stored as level indices.
struct Dataset {
  FeatureSchema schema;
  std::string label_name = "y";
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Standardization stats;  // empty until standardized

  std::size_t size() const { return rows.size(); }
  double prevalence() const;
};

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

// How N(mu, s) in the benchmark definitions is read.
enum class GaussianReading { kStdDev, kVariance };
const char* to_string(GaussianReading reading);

struct CalibrationResult {
  GaussianReading chosen = GaussianReading::kVariance;
  double prevalence_stddev = 0.0;
  double prevalence_variance = 0.0;
  double target = 0.3425;
  std::size_t samples = 0;
};

// Generates 100000 rows of the rule benchmark under both readings and keeps
// the one whose positive rate is closer to the 34.25% target.
const CalibrationResult& calibrate_gaussian_reading();

// Ground-truth rules A..E of the rule benchmark on clean (noise-free)
// values x1..x8 (x6 in {0,1}).
std::array<bool, 5> synthetic1_rules(std::span<const double> x);
int synthetic1_label(std::span<const double> x);
// (x1 + 0.5 x2 + x3)^2 / (1 + e^x6 + 2 x7) < 1 evaluated as written.
int synthetic2_label(std::span<const double> x);

FeatureSchema synthetic1_schema();
FeatureSchema synthetic2_schema();

struct SyntheticResult {
  Dataset data;
  std::array<double, 5> rule_rates{};  // synthetic 1 only
  GaussianReading reading = GaussianReading::kVariance;
};

// Rule benchmark: labels from clean values, then N(0, 0.01) noise on the
// continuous inputs. Deterministic given seed.
SyntheticResult generate_synthetic1(std::size_t n, std::uint64_t seed);
SyntheticResult generate_synthetic1(std::size_t n, std::uint64_t seed,
                                    GaussianReading reading);
// Nonlinear benchmark.
SyntheticResult generate_synthetic2(std::size_t n, std::uint64_t seed);
SyntheticResult generate_synthetic2(std::size_t n, std::uint64_t seed,
                                    GaussianReading reading);

struct CsvLoadResult {
  Dataset data;
  std::size_t missing_continuous = 0;  // imputed later by standardize
};

// Schema file: JSON object, column name -> {"kind": "continuous" |
// "categorical" | "binary", "levels": [...], "role": "feature" | "label"}.
// Feature order follows the CSV header.
CsvLoadResult load_csv(const std::filesystem::path& data_path,
                       const std::filesystem::path& schema_path);
void write_csv(const Dataset& data, const std::filesystem::path& path);
void write_schema(const Dataset& data, const std::filesystem::path& path);
// Shortest round-trip decimal form of a double.
std::string format_double(double v);

struct SplitSpec {
  enum class Mode { kKFold, kRatio };
  Mode mode = Mode::kRatio;
  std::size_t k = 10;
  double train = 0.64;
  double val = 0.16;
  double test = 0.20;
  std::uint64_t seed = 0;
  bool stratified = true;

  static SplitSpec kfold(std::size_t k, std::uint64_t seed);
  static SplitSpec ratio(double train, double val, double test,
                         std::uint64_t seed);
};

struct Partition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// One partition in ratio mode, k partitions in k-fold mode (each fold is the
// test set once; the remaining rows are split 80/20 into train/val).
std::vector<Partition> split(const Dataset& data, const SplitSpec& spec);

struct StandardizeResult {
  Dataset data;  // every row transformed with train statistics
  std::vector<std::string> constant_columns;
};

// Continuous columns become (x - mean) / std with statistics from
// train_indices; missing values are imputed with the train mean.
StandardizeResult standardize(const Dataset& data,
                              std::span<const std::size_t> train_indices);
// Applies existing statistics (model inference on new data).
Dataset apply_standardization(const Dataset& data, const Standardization& stats);

}  // namespace tropfuzzy
