#include <doctest.h>

#include <filesystem>
#include <random>

#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/model_io.hpp"

using namespace tropfuzzy;

namespace {

Model random_model(std::uint64_t seed) {
  const FeatureSchema schema({VariableSchema::continuous("x1"),
                              VariableSchema::categorical("grp", {"a", "b", "c"}),
                              VariableSchema::continuous("x3")});
  auto p = NetworkParams::zeros(schema, 4, 2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0, 1);
  for (auto& k : p.knot_raw)
    for (double& v : k) v = z(rng) / 3.0;
  for (double& v : p.attention_raw.data()) v = z(rng) * 1e-3 + 1.0 / 3.0;
  for (double& v : p.connection_raw.data()) v = z(rng);
  for (std::size_t k = 0; k < 4; ++k) p.inference_raw(k, 1) = z(rng) * 1e7;
  p.negative_bias = 0.1 + 0.2;
  p.eps = Smoothness(0.99 * std::pow(0.99, 37));
  Model m{p, {}, "outcome"};
  m.stats.mean = {1.0 / 7.0, 0.0, -3e-300};
  m.stats.stddev = {2.5, 1.0, 1e-5};
  m.stats.constant = {false, false, true};
  return m;
}

}  // namespace

TEST_CASE("model round-trips bit for bit") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = random_model(s);
    const auto text = model_to_string(m);
    const auto back = model_from_string(text);
    CHECK(back == m);
    CHECK(back.params.eps.value() == m.params.eps.value());
    CHECK(model_to_string(back) == text);
  }
  const auto path = std::filesystem::temp_directory_path() / "tropfuzzy_model_test.json";
  save_model(random_model(9), path);
  CHECK(load_model(path) == random_model(9));
  std::filesystem::remove(path);
}

TEST_CASE("model without standardization") {
  auto m = random_model(1);
  m.stats = {};
  CHECK(model_from_string(model_to_string(m)) == m);
}

TEST_CASE("corrupt model files name the field") {
  const auto good = model_to_string(random_model(3));
  auto expect = [](const std::string& text, const std::string& field) {
    try {
      model_from_string(text);
      FAIL("accepted corrupt model");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto replaced = [&](const std::string& from, const std::string& to) {
    auto t = good;
    const auto at = t.find(from);
    REQUIRE(at != std::string::npos);
    t.replace(at, from.size(), to);
    return t;
  };
  expect(replaced("\"eps\"", "\"epz\""), "eps");
  expect(replaced("\"negative_bias\": ", "\"negative_bias\": \"x\", \"old\": "), "negative_bias");
  expect(replaced("\"format_version\": 1", "\"format_version\": 7"), "format_version");
  expect(replaced("\"rules\": 4", "\"rules\": 5"), "attention_raw");
  expect(replaced("\"kind\": \"categorical\"", "\"kind\": \"ordinal\""), "schema[1].kind");
  expect("{\"format_version\": 1", "JSON");
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), InputError);
}
