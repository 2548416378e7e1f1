#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "agest/margin.hpp"

using namespace agest;

namespace {

// Row loss ln(1 + sum_j exp(c_j - n)) for target exponent n and competitor
// logits c_j, evaluated in extended precision.
long double row_loss(long double n, const std::vector<long double>& negs) {
  long double acc = 1.0L;
  for (long double c : negs) acc += std::exp(c - n);
  return std::log(acc);
}

// Mirrors the library's clamped arccos so oracles share the exact branch.
double clamped_acos(double c) {
  const double m = 1e-9;
  return std::acos(std::min(1.0 - m, std::max(-1.0 + m, c)));
}

ClassifierHead planar_head(const std::vector<double>& angles, const std::vector<int>& ages) {
  Rng rng(1);
  ClassifierHead head = ClassifierHead::init(0, int(angles.size()) - 1, 2, rng);
  head.ages = ages;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    head.weight.value.at(i, 0) = std::cos(angles[i]);
    head.weight.value.at(i, 1) = std::sin(angles[i]);
  }
  return head;
}

DenseMatrix planar_features(const std::vector<double>& angles,
                            const std::vector<double>& radii) {
  DenseMatrix f(angles.size(), 2);
  for (std::size_t i = 0; i < angles.size(); ++i) {
    f.at(i, 0) = radii[i] * std::cos(angles[i]);
    f.at(i, 1) = radii[i] * std::sin(angles[i]);
  }
  return f;
}

}  // namespace

TEST_CASE("group_of_age boundaries") {
  CHECK(group_of_age(0) == 0);
  CHECK(group_of_age(12) == 0);
  CHECK(group_of_age(13) == 1);
  CHECK(group_of_age(17) == 1);
  CHECK(group_of_age(18) == 2);
  CHECK(group_of_age(65) == 2);
  CHECK(group_of_age(66) == 3);
  CHECK(group_of_age(120) == 3);
  CHECK_THROWS_AS(group_of_age(-1), std::invalid_argument);
  int prev = 0;
  for (int a = 0; a <= 120; ++a) {
    const int g = group_of_age(a);
    CHECK(g >= prev);
    prev = g;
  }
  CHECK(std::string(group_name(0)) == "children");
  CHECK(std::string(group_name(2)) == "adult");
  CHECK_THROWS_AS(group_name(4), std::invalid_argument);
}

TEST_CASE("classifier head init yields unit rows over the requested age range") {
  Rng rng(7);
  ClassifierHead head = ClassifierHead::init(1, 81, 16, rng);
  CHECK(head.classes() == 81);
  CHECK(head.ages.front() == 1);
  CHECK(head.ages.back() == 81);
  for (std::size_t i = 0; i < head.weight.value.rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < 16; ++j) sq += head.weight.value.at(i, j) * head.weight.value.at(i, j);
    CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
  }
  // renormalize restores unit rows after an optimizer-style perturbation.
  head.weight.value.at(3, 0) += 0.7;
  head.renormalize();
  double sq = 0.0;
  for (std::size_t j = 0; j < 16; ++j) sq += head.weight.value.at(3, j) * head.weight.value.at(3, j);
  CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
  CHECK_THROWS_AS(ClassifierHead::init(5, 4, 8, rng), std::invalid_argument);
  CHECK_THROWS_AS(ClassifierHead::init(-1, 4, 8, rng), std::invalid_argument);
}

TEST_CASE("group margin params defaults") {
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  CHECK(mp.scale == 16.0);
  for (int g = 0; g < kNumGroups; ++g) {
    CHECK(mp.curvature.value.at(std::size_t(g), 0) == -8.0);
    CHECK(mp.offset.value.at(std::size_t(g), 0) == 16.0);
    CHECK(mp.margin(g) == 0.4);
  }
  CHECK_FALSE(mp.vertex.requires_grad);
  mp.set_margin(1, 0.6);
  CHECK(mp.margin(1) == 0.6);
  CHECK(mp.margin(0) == 0.4);
  CHECK_THROWS_AS(GroupMarginParams::init(0.0, 0.4), std::invalid_argument);
}

TEST_CASE("dgm loss is zero with a single class") {
  ClassifierHead head = planar_head({0.0}, {30});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  Parameter feat(planar_features({0.7}, {2.0}));
  const ad::Var loss = dgm_loss(ad::leaf(feat), {0}, head, mp);
  CHECK(std::abs(loss->value.at(0, 0)) < 1e-15);
}

TEST_CASE("dgm loss equals ln 2 for one orthogonal competitor at zero exponents") {
  ClassifierHead head = planar_head({0.0, std::numbers::pi / 2}, {30, 40});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  mp.curvature.value.fill(0.0);
  mp.offset.value.fill(0.0);
  Parameter feat(planar_features({0.0}, {1.0}));
  const ad::Var loss = dgm_loss(ad::leaf(feat), {0}, head, mp);
  CHECK(std::abs(loss->value.at(0, 0) - std::log(2.0)) < 1e-12);
}

TEST_CASE("dgm loss matches a hand-evaluated two-sample planar oracle") {
  // Classes at angles 0, pi/2, pi with ages in groups 0, 2, 3.
  ClassifierHead head = planar_head({0.0, std::numbers::pi / 2, std::numbers::pi}, {10, 30, 70});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  for (int g = 0; g < kNumGroups; ++g) {
    mp.curvature.value.at(std::size_t(g), 0) = -8.0 + double(g);
    mp.vertex.value.at(std::size_t(g), 0) = 0.2 + 0.1 * double(g);
    mp.offset.value.at(std::size_t(g), 0) = 16.0 - double(g);
  }
  Parameter feat(planar_features({0.3, 2.0}, {1.7, 0.6}));
  const std::vector<std::size_t> labels = {0, 2};

  const ad::Var loss = dgm_loss(ad::leaf(feat), labels, head, mp);

  // Sample 1: target class 0 (group 0), competitors at cos offsets.
  const double s = 16.0;
  const double c10 = std::cos(0.3), c11 = std::cos(0.3 - std::numbers::pi / 2),
               c12 = std::cos(0.3 - std::numbers::pi);
  const double theta1 = clamped_acos(c10);
  const long double n1 = (-8.0L) * (theta1 - 0.2L) * (theta1 - 0.2L) + 16.0L;
  const long double l1 = row_loss(n1, {s * c11, s * c12});

  // Sample 2: target class 2 (group 3).
  const double c20 = std::cos(2.0), c21 = std::cos(2.0 - std::numbers::pi / 2),
               c22 = std::cos(2.0 - std::numbers::pi);
  const double theta2 = clamped_acos(c22);
  const long double n2 = (-5.0L) * (theta2 - 0.5L) * (theta2 - 0.5L) + 13.0L;
  const long double l2 = row_loss(n2, {s * c20, s * c21});

  const double expected = double((l1 + l2) / 2.0L);
  CHECK(std::abs(loss->value.at(0, 0) - expected) < 1e-10);
}

TEST_CASE("dgm loss depends on groups only through their parameters") {
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  Parameter feat(planar_features({0.4}, {1.0}));
  ClassifierHead adult = planar_head({0.0, 1.2}, {30, 5});
  ClassifierHead senior = planar_head({0.0, 1.2}, {70, 5});
  const double la = dgm_loss(ad::leaf(feat), {0}, adult, mp)->value.at(0, 0);
  const double ls = dgm_loss(ad::leaf(feat), {0}, senior, mp)->value.at(0, 0);
  CHECK(la == ls);
}

TEST_CASE("dgm loss decreases when the group offset grows") {
  ClassifierHead head = planar_head({0.0, 1.0, 2.2}, {30, 31, 32});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  Parameter feat(planar_features({0.25}, {1.0}));
  const double base = dgm_loss(ad::leaf(feat), {0}, head, mp)->value.at(0, 0);
  mp.offset.value.at(2, 0) = 17.0;
  const double raised = dgm_loss(ad::leaf(feat), {0}, head, mp)->value.at(0, 0);
  CHECK(raised < base);
}

TEST_CASE("dgm loss rejects a non-finite target exponent") {
  ClassifierHead head = planar_head({0.0, 1.5}, {30, 40});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  mp.curvature.value.at(2, 0) = -1e308;
  mp.vertex.value.at(2, 0) = -3.0;
  Parameter feat(planar_features({0.4}, {1.0}));
  CHECK_THROWS_WITH_AS(dgm_loss(ad::leaf(feat), {0}, head, mp),
                       "dgm_loss: non-finite target-class exponent", std::runtime_error);
}

TEST_CASE("dgm loss validates labels") {
  ClassifierHead head = planar_head({0.0, 1.5}, {30, 40});
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  Parameter feat(planar_features({0.4}, {1.0}));
  CHECK_THROWS_AS(dgm_loss(ad::leaf(feat), {2}, head, mp), std::invalid_argument);
  CHECK_THROWS_AS(dgm_loss(ad::leaf(feat), {0, 1}, head, mp), std::invalid_argument);
}

TEST_CASE("dgm loss gradients pass central-difference verification") {
  Rng rng(42);
  ClassifierHead head = ClassifierHead::init(0, 3, 3, rng);
  head.ages = {8, 15, 30, 70};  // one class per group
  GroupMarginParams mp = GroupMarginParams::init(16.0, 0.4);
  mp.vertex.requires_grad = true;  // exercised here even though training freezes it
  Parameter feat(DenseMatrix::randn(3, 3, rng));
  const std::vector<std::size_t> labels = {0, 2, 3};
  const double err = gradient_check(
      [&] { return dgm_loss(ad::leaf(feat), labels, head, mp); },
      {&feat, &head.weight, &mp.curvature, &mp.vertex, &mp.offset}, 1e-4);
  CHECK(err < 1e-4);
}

TEST_CASE("margin variant names round-trip and unknown names throw") {
  CHECK(margin_variant_from_string("softmax") == MarginVariant::kSoftmax);
  CHECK(margin_variant_from_string("cos") == MarginVariant::kCosMargin);
  CHECK(margin_variant_from_string("arc") == MarginVariant::kArcMargin);
  for (MarginVariant v :
       {MarginVariant::kSoftmax, MarginVariant::kCosMargin, MarginVariant::kArcMargin})
    CHECK(margin_variant_from_string(to_string(v)) == v);
  CHECK_THROWS_AS(margin_variant_from_string("sphere"), std::invalid_argument);
}

TEST_CASE("cos margin with m = 0 reduces to plain softmax") {
  ClassifierHead head = planar_head({0.1, 1.3, 2.4}, {20, 40, 60});
  Parameter feat(planar_features({0.5, 1.9}, {1.2, 0.8}));
  const std::vector<std::size_t> labels = {0, 2};
  const double soft =
      unified_margin_loss(ad::leaf(feat), labels, head, 0.0, 16.0, MarginVariant::kSoftmax)
          ->value.at(0, 0);
  const double cosm =
      unified_margin_loss(ad::leaf(feat), labels, head, 0.0, 16.0, MarginVariant::kCosMargin)
          ->value.at(0, 0);
  CHECK(soft == cosm);
}

TEST_CASE("arc margin with m = 0 reduces to plain softmax") {
  ClassifierHead head = planar_head({0.1, 1.3, 2.4}, {20, 40, 60});
  Parameter feat(planar_features({0.5, 1.9}, {1.2, 0.8}));
  const std::vector<std::size_t> labels = {0, 2};
  const double soft =
      unified_margin_loss(ad::leaf(feat), labels, head, 0.0, 16.0, MarginVariant::kSoftmax)
          ->value.at(0, 0);
  const double arc =
      unified_margin_loss(ad::leaf(feat), labels, head, 0.0, 16.0, MarginVariant::kArcMargin)
          ->value.at(0, 0);
  CHECK(std::abs(soft - arc) < 1e-12);
}

TEST_CASE("cos margin matches a planar oracle") {
  ClassifierHead head = planar_head({0.0, std::numbers::pi / 2}, {25, 45});
  Parameter feat(planar_features({0.4}, {1.0}));
  const double s = 10.0, m = 0.35;
  const double loss =
      unified_margin_loss(ad::leaf(feat), {0}, head, m, s, MarginVariant::kCosMargin)
          ->value.at(0, 0);
  const long double n = s * (std::cos(0.4) - m);
  const long double expected = row_loss(n, {s * std::cos(0.4 - std::numbers::pi / 2)});
  CHECK(std::abs(loss - double(expected)) < 1e-12);
}

TEST_CASE("arc margin clamps theta + m at pi") {
  ClassifierHead head = planar_head({0.0, std::numbers::pi / 2}, {25, 45});
  Parameter feat(planar_features({3.0}, {1.0}));
  const double s = 16.0, m = 0.5;  // theta_y = 3.0, so theta + m exceeds pi
  const double loss =
      unified_margin_loss(ad::leaf(feat), {0}, head, m, s, MarginVariant::kArcMargin)
          ->value.at(0, 0);
  const double theta = clamped_acos(std::cos(3.0));
  REQUIRE(theta + m > std::numbers::pi);
  const long double n = s * std::cos(std::numbers::pi);
  const long double expected = row_loss(n, {s * std::cos(3.0 - std::numbers::pi / 2)});
  CHECK(std::abs(loss - double(expected)) < 1e-12);
}

TEST_CASE("unified margin losses pass gradient verification") {
  Rng rng(11);
  ClassifierHead head = ClassifierHead::init(0, 3, 4, rng);
  // Features near their target weight rows keep theta + m clear of the clamp.
  DenseMatrix f(3, 4);
  const std::vector<std::size_t> labels = {0, 1, 3};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      f.at(i, j) = head.weight.value.at(labels[i], j) + 0.25 * rng.normal();
  Parameter feat(f);
  for (MarginVariant v :
       {MarginVariant::kSoftmax, MarginVariant::kCosMargin, MarginVariant::kArcMargin}) {
    const double err = gradient_check(
        [&] { return unified_margin_loss(ad::leaf(feat), labels, head, 0.35, 16.0, v); },
        {&feat, &head.weight}, 1e-4);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("unified margin loss validates inputs") {
  ClassifierHead head = planar_head({0.0, 1.5}, {30, 40});
  Parameter feat(planar_features({0.4}, {1.0}));
  CHECK_THROWS_AS(
      unified_margin_loss(ad::leaf(feat), {0}, head, -0.1, 16.0, MarginVariant::kCosMargin),
      std::invalid_argument);
  CHECK_THROWS_AS(
      unified_margin_loss(ad::leaf(feat), {0}, head, 0.2, 0.0, MarginVariant::kCosMargin),
      std::invalid_argument);
}

TEST_CASE("age expectation over uniform logits is the mean age") {
  std::vector<int> ages;
  for (int a = 0; a <= 30; ++a) ages.push_back(a);
  const DenseMatrix logits = DenseMatrix::zeros(2, 31);
  const DenseMatrix pred = predict_age_expectation(logits, ages);
  CHECK(std::abs(pred.at(0, 0) - 15.0) < 1e-12);
  CHECK(std::abs(pred.at(1, 0) - 15.0) < 1e-12);
}

TEST_CASE("age expectation saturates to the boosted class") {
  std::vector<int> ages;
  for (int a = 0; a <= 30; ++a) ages.push_back(a);
  DenseMatrix logits = DenseMatrix::zeros(1, 31);
  logits.at(0, 7) = 50.0;
  const DenseMatrix pred = predict_age_expectation(logits, ages);
  CHECK(std::abs(pred.at(0, 0) - 7.0) < 1e-6);
}

TEST_CASE("age expectation matches a three-class oracle") {
  const std::vector<int> ages = {20, 30, 40};
  const DenseMatrix logits(1, 3, {1.0, 2.0, 3.0});
  const DenseMatrix pred = predict_age_expectation(logits, ages);
  const long double e1 = std::exp(1.0L), e2 = std::exp(2.0L), e3 = std::exp(3.0L);
  const long double expected = (20.0L * e1 + 30.0L * e2 + 40.0L * e3) / (e1 + e2 + e3);
  CHECK(std::abs(pred.at(0, 0) - double(expected)) < 1e-12);
}

TEST_CASE("age expectation stays inside the age range") {
  Rng rng(5);
  const std::vector<int> ages = {1, 15, 40, 81};
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix logits = DenseMatrix::randn(3, 4, rng, 4.0);
    const DenseMatrix pred = predict_age_expectation(logits, ages);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(pred.at(i, 0) >= 1.0);
      CHECK(pred.at(i, 0) <= 81.0);
    }
  }
}

TEST_CASE("differentiable age expectation matches the plain kernel and backprops") {
  Rng rng(9);
  const std::vector<int> ages = {20, 30, 40};
  Parameter logits(DenseMatrix::randn(2, 3, rng));
  const ad::Var pred = predict_age_expectation(ad::leaf(logits), ages);
  const DenseMatrix plain = predict_age_expectation(logits.value, ages);
  CHECK(max_rel_diff(pred->value, plain) < 1e-15);

  const DenseMatrix targets(2, 1, {24.0, 37.0});
  const double err = gradient_check(
      [&] {
        const ad::Var p = predict_age_expectation(ad::leaf(logits), ages);
        return ad::mean_all(ad::abs_v(ad::sub(p, ad::constant(targets))));
      },
      {&logits}, 1e-4);
  CHECK(err < 1e-4);
}

TEST_CASE("joint loss interpolates its two terms") {
  Parameter a(DenseMatrix(1, 1, {2.0}));
  Parameter b(DenseMatrix(1, 1, {3.0}));
  const ad::Var ce = ad::leaf(a), mae_term = ad::leaf(b);
  CHECK(joint_loss(ce, mae_term, 1.0)->value.at(0, 0) == 2.0);
  CHECK(joint_loss(ce, mae_term, 0.0)->value.at(0, 0) == 3.0);
  CHECK(std::abs(joint_loss(ce, mae_term, 0.3)->value.at(0, 0) - 2.7) < 1e-15);
  CHECK_THROWS_AS(joint_loss(ce, mae_term, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(joint_loss(ce, mae_term, -0.1), std::invalid_argument);
  Parameter wide(DenseMatrix::zeros(1, 2));
  CHECK_THROWS_AS(joint_loss(ad::leaf(wide), mae_term, 0.5), std::invalid_argument);
}
