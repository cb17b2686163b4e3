#include <doctest.h>

#include <cmath>
#include <random>

#include "tropfuzzy/errors.hpp"
#include "tropfuzzy/network.hpp"

using namespace tropfuzzy;

namespace {

FeatureSchema two_continuous() {
  return FeatureSchema({VariableSchema::continuous("x1"), VariableSchema::continuous("x2")});
}

FeatureSchema mixed() {
  return FeatureSchema({VariableSchema::continuous("a"),
                        VariableSchema::categorical("c", {"r", "g", "b"}),
                        VariableSchema::continuous("d")});
}

// Sets every A and M entry of column k to ~0 and W to ~0.
void silence(NetworkParams& p) {
  p.attention_raw.fill(-40.0);
  p.connection_raw.fill(-40.0);
  for (std::size_t k = 0; k < p.rules; ++k) p.inference_raw(k, 1) = -40.0;
}

}  // namespace

TEST_CASE("constraint maps") {
  CHECK(constrain01(0.0) == 0.5);
  CHECK(std::abs(constrain01(30.0) - 1.0) < 1e-12);
  CHECK(constrain01(1.0) == doctest::Approx(0.88080).epsilon(1e-5));
  CHECK(constrain_pos(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(constrain_pos(-30.0) < 1e-12);
  CHECK(constrain_pos(2.0) == doctest::Approx(2.1269).epsilon(1e-4));
  for (double v : {0.05, 0.5, 0.9}) {
    CHECK(constrain01(constrain01_inv(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(constrain_pos(constrain_pos_inv(v)) == doctest::Approx(v).epsilon(1e-12));
  }
  const double h = 1e-6;
  for (double r : {-1.3, 0.2, 2.0}) {
    CHECK(constrain01_grad(r) == doctest::Approx((constrain01(r + h) - constrain01(r - h)) / (2 * h)).epsilon(1e-6));
    CHECK(constrain_pos_grad(r) == doctest::Approx((constrain_pos(r + h) - constrain_pos(r - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("dimensional audit") {
  for (std::size_t k : {1u, 3u, 10u}) {
    auto p = NetworkParams::zeros(mixed(), k, 2);
    CHECK(p.attention_raw.rows() == 3 * 2 + 3);
    CHECK(p.attention_raw.cols() == k);
    CHECK(p.connection_raw.rows() == 3);
    CHECK(p.connection_raw.cols() == k);
    CHECK(p.inference_raw.rows() == k);
    CHECK(p.inference_raw.cols() == 2);
    CHECK(p.knot_raw.size() == 2);
    CHECK_NOTHROW(p.validate());
  }
  auto p = NetworkParams::zeros(mixed(), 2, 2);
  p.connection_raw = Matrix(2, 2);
  CHECK_THROWS_AS(p.validate(), ContractError);
}

TEST_CASE("schema validation") {
  CHECK_THROWS_AS(FeatureSchema({VariableSchema::continuous("x"), VariableSchema::continuous("x")}), InputError);
  CHECK_THROWS_AS(FeatureSchema({VariableSchema::categorical("c", {"a"})}), InputError);
  CHECK_THROWS_AS(FeatureSchema({VariableSchema::categorical("c", {"a", "a"})}), InputError);
  const auto s = mixed();
  CHECK(s.row_label(0) == "a_low");
  CHECK(s.row_label(4) == "c_g");
  CHECK(s.row_label(8) == "d_high");
  CHECK(s.variable_of_row(5) == 1);
}

TEST_CASE("encode sample") {
  auto p = NetworkParams::zeros(mixed(), 1, 2);
  p.knot_raw[0] = MembershipKnots::to_raw({0, 1, 2, 3});
  p.knot_raw[1] = MembershipKnots::to_raw({0, 1, 2, 3});
  p.eps = Smoothness(0.01);
  const NetworkView view(p);
  const std::vector<double> x{-10.0, 1.0, 2.5};
  const auto m = encode_sample(x, view);
  REQUIRE(m.size() == 9);
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m[3] == 0.0);
  CHECK(m[4] == 1.0);
  CHECK(m[5] == 0.0);
  CHECK(m[8] == doctest::Approx(0.5).epsilon(1e-2));
  const std::vector<double> bad{0.0, 3.0, 0.0};
  CHECK_THROWS_AS(encode_sample(bad, view), InputError);
  const std::vector<double> frac{0.0, 0.5, 0.0};
  CHECK_THROWS_AS(encode_sample(frac, view), InputError);
}

TEST_CASE("attended concepts") {
  auto p = NetworkParams::zeros(two_continuous(), 1, 2);
  silence(p);
  p.attention_raw(0, 0) = constrain01_inv(0.9);
  p.attention_raw(1, 0) = constrain01_inv(0.1);
  p.attention_raw(2, 0) = constrain01_inv(0.1);
  const NetworkView view(p);
  const std::vector<double> mem{1.0, 0.0, 0.0, 0.2, 0.3, 0.5};
  Matrix att(2, 1), raw(2, 1);
  attended_concepts(mem, view, att, raw);
  CHECK(att(0, 0) == doctest::Approx(0.9).epsilon(1e-12));
  // x2's block is all ~0
  CHECK(att(1, 0) == kClampFloor);
}

TEST_CASE("rule strengths") {
  auto p = NetworkParams::zeros(two_continuous(), 1, 2);
  p.eps = Smoothness(0.5);
  p.connection_raw.fill(-40.0);
  Matrix att(2, 1);
  att(0, 0) = 0.5;
  att(1, 0) = 0.5;
  CHECK(rule_strengths(att, NetworkView(p))[0] == doctest::Approx(1.0).epsilon(1e-12));
  p.connection_raw.fill(40.0);
  CHECK(rule_strengths(att, NetworkView(p))[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  p.connection_raw(1, 0) = -40.0;
  att(0, 0) = 0.37;
  CHECK(rule_strengths(att, NetworkView(p))[0] == doctest::Approx(0.37).epsilon(1e-9));
}

TEST_CASE("class scores") {
  auto p = NetworkParams::zeros(two_continuous(), 2, 2);
  p.eps = Smoothness(0.5);
  p.inference_raw(0, 1) = constrain_pos_inv(1.0);
  p.inference_raw(1, 1) = constrain_pos_inv(1.0);
  p.inference_raw(0, 0) = 5.0;  // masked, ignored
  const std::vector<double> r{0.3, 0.4};
  std::vector<double> o, prob;
  class_scores(r, NetworkView(p), o, prob);
  CHECK(o[0] == 0.0);
  CHECK(o[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(prob[1] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-12));
  p.inference_raw.fill(-800.0);
  class_scores(r, NetworkView(p), o, prob);
  CHECK(prob[0] == doctest::Approx(0.5));
  CHECK(prob[1] == doctest::Approx(0.5));
}

TEST_CASE("forward with W all zero predicts class 0") {
  auto p = NetworkParams::zeros(mixed(), 3, 2);
  p.inference_raw.fill(-800.0);
  const std::vector<double> x{0.3, 2.0, -1.0};
  const auto t = forward(x, p);
  CHECK(t.probability[0] == doctest::Approx(0.5));
  CHECK(predict(x, p) == 0);
}

TEST_CASE("hand-built x1 low rule") {
  auto p = NetworkParams::zeros(two_continuous(), 1, 2);
  p.eps = Smoothness(0.05);
  silence(p);
  p.attention_raw(0, 0) = 20.0;   // x1 low
  p.connection_raw(0, 0) = 20.0;  // x1 only
  p.inference_raw(0, 1) = constrain_pos_inv(5.0);
  const std::vector<double> x{-10.0, 0.0};
  CHECK(forward(x, p).probability[1] > 0.9);
  CHECK(predict(x, p) == 1);
}

TEST_CASE("traces are normalized, bounded and deterministic") {
  auto p = NetworkParams::zeros(mixed(), 4, 2);
  std::mt19937_64 rng(9);
  initialize_random(p, rng);
  std::normal_distribution<double> z(0, 2);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x{z(rng), static_cast<double>(rng() % 3), z(rng)};
    const auto t = forward(x, p);
    CHECK(std::abs(t.probability[0] + t.probability[1] - 1.0) < 1e-9);
    for (double r : t.rule_strength) {
      CHECK(r > 0.0);
      CHECK(r <= 1.0);
    }
    const auto t2 = forward(x, p);
    CHECK(t2.probability == t.probability);
    CHECK(t2.rule_strength == t.rule_strength);
  }
}

TEST_CASE("class score is monotone in W") {
  auto p = NetworkParams::zeros(mixed(), 3, 2);
  std::mt19937_64 rng(4);
  initialize_random(p, rng);
  const std::vector<double> x{0.1, 0.0, 0.4};
  double prev = forward(x, p).class_score[1];
  for (int step = 0; step < 10; ++step) {
    p.inference_raw(1, 1) += 0.3;
    const double o = forward(x, p).class_score[1];
    CHECK(o >= prev);
    prev = o;
  }
}

TEST_CASE("initialization ranges") {
  auto p = NetworkParams::zeros(mixed(), 10, 2);
  std::mt19937_64 rng(1);
  initialize_random(p, rng);
  for (double a : p.attention_raw.data()) {
    CHECK(a >= -2.5);
    CHECK(a <= -1.5);
  }
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(p.inference_raw(k, 0) == 0.0);
    CHECK(p.inference(k, 0) == 0.0);
    CHECK(p.inference_raw(k, 1) >= -1.0);
    CHECK(p.inference_raw(k, 1) <= 0.0);
  }
  std::vector<std::vector<double>> rows;
  for (int i = 0; i <= 100; ++i) rows.push_back({double(i), 0.0, double(-i)});
  initialize_knots(p, rows);
  const auto k = p.knots(0);
  CHECK(k.a[0] == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(k.a[1] == doctest::Approx(35.0).epsilon(1e-9));
  CHECK(k.a[2] == doctest::Approx(65.0).epsilon(1e-9));
  CHECK(k.a[3] == doctest::Approx(95.0).epsilon(1e-9));
}

TEST_CASE("pack and unpack round-trip") {
  auto p = NetworkParams::zeros(mixed(), 3, 2);
  std::mt19937_64 rng(8);
  initialize_random(p, rng);
  p.negative_bias = 0.25;
  const auto flat = pack_params(p);
  // knots 2x4, A 9x3, M 3x3, W 3 (masked column skipped), bias
  CHECK(flat.size() == 8 + 27 + 9 + 3 + 1);
  CHECK(param_names(p).size() == flat.size());
  auto q = NetworkParams::zeros(mixed(), 3, 2);
  unpack_params(flat, q);
  CHECK(q == p);
}
