#pragma once

#include <filesystem>
#include <string>

#include "tropfuzzy/network.hpp"

namespace tropfuzzy {

inline constexpr int kModelFormatVersion = 1;

// A trained network plus the statistics needed to map raw inputs into the
// standardized space it was trained in.
struct Model {
  NetworkParams params;
  Standardization stats;
  std::string label_name = "y";

  bool operator==(const Model&) const = default;
};

// JSON document. Doubles are written in shortest round-trip form, so
// save -> load reproduces every parameter bit for bit.
std::string model_to_string(const Model& model);
// Throws InputError naming the offending field.
Model model_from_string(const std::string& text);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace tropfuzzy
