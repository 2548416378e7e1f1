#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "agest/autodiff.hpp"
#include "agest/matrix.hpp"
#include "agest/rng.hpp"

namespace agest {

// Age groups: 0 children (0-12), 1 teenager (13-17), 2 adult (18-65),
// 3 senior (66+). The adult group anchors the imbalance statistics.
inline constexpr int kNumGroups = 4;
inline constexpr int kAdultGroup = 2;

// Throws std::invalid_argument for negative ages.
int group_of_age(int age);
const char* group_name(int group);

// Per-group quadratic logit parameters. The target-class logit is
// curvature_g * (theta_y - vertex_g)^2 + offset_g; curvature and offset are
// gradient-trained, the vertex carries the group margin assigned by the
// margin tuner and is frozen by default.
struct GroupMarginParams {
  Parameter curvature;  // a_g, groups x 1
  Parameter vertex;     // h_g, groups x 1
  Parameter offset;     // k_g, groups x 1
  double scale = 16.0;  // s, multiplies competitor cosines

  // curvature = -s/2 and offset = s make the quadratic track s*cos(theta)
  // near theta = 0.
  static GroupMarginParams init(double s, double initial_margin);
  std::vector<std::pair<std::string, Parameter*>> parameters(const std::string& prefix);

  void set_margin(int group, double m) { vertex.value.at(std::size_t(group), 0) = m; }
  double margin(int group) const { return vertex.value.at(std::size_t(group), 0); }
};

// One unit-normalized weight vector per integer age in [age_min, age_max].
struct ClassifierHead {
  Parameter weight;       // C x d
  std::vector<int> ages;  // class index -> age

  static ClassifierHead init(int age_min, int age_max, std::size_t d, Rng& rng);
  std::size_t classes() const { return ages.size(); }
  // Projects weight rows back onto the unit sphere (call after optimizer steps).
  void renormalize();
  std::vector<std::pair<std::string, Parameter*>> parameters(const std::string& prefix);
};

// Cosines between unit-normalized features and class weights, batch x classes.
ad::Var class_cosines(const ad::Var& features, ClassifierHead& head);

// Group-aware margin loss. The target class y_i uses the quadratic logit of
// the sample's group (from group_of_age of the label age); competitors use
// s * cos(theta_j). Throws std::runtime_error naming the offending term if an
// exponent is non-finite.
ad::Var dgm_loss(const ad::Var& features, const std::vector<std::size_t>& labels,
                 ClassifierHead& head, GroupMarginParams& mp);

enum class MarginVariant { kSoftmax, kCosMargin, kArcMargin };

// "softmax" | "cos" | "arc"; anything else throws std::invalid_argument.
MarginVariant margin_variant_from_string(const std::string& name);
std::string to_string(MarginVariant v);

// Classic unified margin softmax: target logit is s*cos(theta_y) (softmax),
// s*(cos(theta_y) - m) (cos), or s*cos(min(theta_y + m, pi)) (arc).
ad::Var unified_margin_loss(const ad::Var& features, const std::vector<std::size_t>& labels,
                            ClassifierHead& head, double margin, double s, MarginVariant v);

// Softmax expectation over class ages; returns batch x 1 predicted ages.
DenseMatrix predict_age_expectation(const DenseMatrix& logits, const std::vector<int>& ages);
ad::Var predict_age_expectation(const ad::Var& logits, const std::vector<int>& ages);

// lambda * ce + (1 - lambda) * mae_term; lambda must lie in [0, 1].
ad::Var joint_loss(const ad::Var& ce, const ad::Var& mae_term, double lambda);

}  // namespace agest
