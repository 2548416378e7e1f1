#include "agest/margin.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agest {

int group_of_age(int age) {
  if (age < 0) throw std::invalid_argument("group_of_age: negative age");
  if (age <= 12) return 0;
  if (age <= 17) return 1;
  if (age <= 65) return 2;
  return 3;
}

const char* group_name(int group) {
  switch (group) {
    case 0: return "children";
    case 1: return "teenager";
    case 2: return "adult";
    case 3: return "senior";
    default: throw std::invalid_argument("group_name: unknown group id");
  }
}

GroupMarginParams GroupMarginParams::init(double s, double initial_margin) {
  if (!(s > 0.0)) throw std::invalid_argument("GroupMarginParams: scale must be positive");
  GroupMarginParams p;
  p.scale = s;
  p.curvature = Parameter(DenseMatrix::filled(kNumGroups, 1, -0.5 * s));
  p.vertex = Parameter(DenseMatrix::filled(kNumGroups, 1, initial_margin),
                       /*requires_grad=*/false);
  p.offset = Parameter(DenseMatrix::filled(kNumGroups, 1, s));
  return p;
}

std::vector<std::pair<std::string, Parameter*>> GroupMarginParams::parameters(
    const std::string& prefix) {
  return {{prefix + ".curvature", &curvature},
          {prefix + ".vertex", &vertex},
          {prefix + ".offset", &offset}};
}

ClassifierHead ClassifierHead::init(int age_min, int age_max, std::size_t d, Rng& rng) {
  if (age_min < 0 || age_max < age_min)
    throw std::invalid_argument("ClassifierHead: invalid age range");
  if (d == 0) throw std::invalid_argument("ClassifierHead: zero feature dim");
  ClassifierHead head;
  head.ages.reserve(std::size_t(age_max - age_min) + 1);
  for (int a = age_min; a <= age_max; ++a) head.ages.push_back(a);
  head.weight = Parameter(DenseMatrix::randn(head.ages.size(), d, rng));
  head.renormalize();
  return head;
}

void ClassifierHead::renormalize() {
  for (std::size_t i = 0; i < weight.value.rows; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < weight.value.cols; ++j) {
      const double v = weight.value.at(i, j);
      sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm == 0.0) throw std::runtime_error("ClassifierHead: zero weight row");
    for (std::size_t j = 0; j < weight.value.cols; ++j) weight.value.at(i, j) /= norm;
  }
}

std::vector<std::pair<std::string, Parameter*>> ClassifierHead::parameters(
    const std::string& prefix) {
  return {{prefix + ".weight", &weight}};
}

ad::Var class_cosines(const ad::Var& features, ClassifierHead& head) {
  if (features->value.cols != head.weight.value.cols)
    throw std::invalid_argument("class_cosines: feature dim mismatch");
  const ad::Var xn = ad::row_l2_normalize(features);
  const ad::Var wn = ad::row_l2_normalize(ad::leaf(head.weight));
  return ad::matmul_nt(xn, wn);
}

namespace {

void check_labels(const std::vector<std::size_t>& labels, std::size_t batch,
                  std::size_t classes) {
  if (labels.empty() || labels.size() != batch)
    throw std::invalid_argument("margin loss: label count does not match batch");
  for (std::size_t y : labels) {
    if (y >= classes) throw std::invalid_argument("margin loss: label out of range");
  }
}

}  // namespace

ad::Var dgm_loss(const ad::Var& features, const std::vector<std::size_t>& labels,
                 ClassifierHead& head, GroupMarginParams& mp) {
  check_labels(labels, features->value.rows, head.classes());

  std::vector<std::size_t> groups;
  groups.reserve(labels.size());
  for (std::size_t y : labels)
    groups.push_back(std::size_t(group_of_age(head.ages[y])));

  const ad::Var cos = class_cosines(features, head);
  const ad::Var theta_y = ad::select_cols(ad::acos_clamped(cos), labels);

  ad::Var target;
  try {
    const ad::Var a = ad::gather_rows(ad::leaf(mp.curvature), groups);
    const ad::Var h = ad::gather_rows(ad::leaf(mp.vertex), groups);
    const ad::Var k = ad::gather_rows(ad::leaf(mp.offset), groups);
    const ad::Var diff = ad::sub(theta_y, h);
    target = ad::add(ad::hadamard(a, ad::hadamard(diff, diff)), k);
  } catch (const std::runtime_error&) {
    // The kernels reject non-finite intermediates; name the term for callers.
    throw std::runtime_error("dgm_loss: non-finite target-class exponent");
  }
  if (!target->value.all_finite())
    throw std::runtime_error("dgm_loss: non-finite target-class exponent");

  const ad::Var competitors = ad::scale(cos, mp.scale);
  if (!competitors->value.all_finite())
    throw std::runtime_error("dgm_loss: non-finite competitor logit");

  const ad::Var z = ad::replace_cols(competitors, labels, target);
  return ad::mean_all(ad::sub(ad::row_logsumexp(z), target));
}

MarginVariant margin_variant_from_string(const std::string& name) {
  if (name == "softmax") return MarginVariant::kSoftmax;
  if (name == "cos") return MarginVariant::kCosMargin;
  if (name == "arc") return MarginVariant::kArcMargin;
  throw std::invalid_argument("margin_variant_from_string: unknown variant '" + name + "'");
}

std::string to_string(MarginVariant v) {
  switch (v) {
    case MarginVariant::kSoftmax: return "softmax";
    case MarginVariant::kCosMargin: return "cos";
    case MarginVariant::kArcMargin: return "arc";
  }
  throw std::invalid_argument("to_string: unknown margin variant");
}

ad::Var unified_margin_loss(const ad::Var& features, const std::vector<std::size_t>& labels,
                            ClassifierHead& head, double margin, double s, MarginVariant v) {
  check_labels(labels, features->value.rows, head.classes());
  if (!(s > 0.0)) throw std::invalid_argument("unified_margin_loss: scale must be positive");
  if (margin < 0.0) throw std::invalid_argument("unified_margin_loss: negative margin");

  const ad::Var cos = class_cosines(features, head);
  const ad::Var cos_y = ad::select_cols(cos, labels);

  ad::Var target;
  switch (v) {
    case MarginVariant::kSoftmax:
      target = ad::scale(cos_y, s);
      break;
    case MarginVariant::kCosMargin:
      target = ad::scale(ad::add_scalar(cos_y, -margin), s);
      break;
    case MarginVariant::kArcMargin: {
      // theta + m is clamped at pi so the penalized logit stays monotone.
      const ad::Var shifted = ad::add_scalar(ad::acos_clamped(cos_y), margin);
      target = ad::scale(ad::cos_v(ad::clamp_max(shifted, std::numbers::pi)), s);
      break;
    }
  }

  const ad::Var z = ad::replace_cols(ad::scale(cos, s), labels, target);
  return ad::mean_all(ad::sub(ad::row_logsumexp(z), target));
}

DenseMatrix predict_age_expectation(const DenseMatrix& logits, const std::vector<int>& ages) {
  if (logits.cols != ages.size())
    throw std::invalid_argument("predict_age_expectation: class count mismatch");
  const DenseMatrix p = row_softmax(logits);
  DenseMatrix out = DenseMatrix::zeros(logits.rows, 1);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) e += p.at(i, j) * double(ages[j]);
    out.at(i, 0) = e;
  }
  return out;
}

ad::Var predict_age_expectation(const ad::Var& logits, const std::vector<int>& ages) {
  if (logits->value.cols != ages.size())
    throw std::invalid_argument("predict_age_expectation: class count mismatch");
  DenseMatrix age_col(ages.size(), 1);
  for (std::size_t j = 0; j < ages.size(); ++j) age_col.at(j, 0) = double(ages[j]);
  return ad::matmul(ad::row_softmax(logits), ad::constant(std::move(age_col)));
}

ad::Var joint_loss(const ad::Var& ce, const ad::Var& mae_term, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("joint_loss: lambda must lie in [0, 1]");
  if (ce->value.rows != 1 || ce->value.cols != 1 || mae_term->value.rows != 1 ||
      mae_term->value.cols != 1)
    throw std::invalid_argument("joint_loss: terms must be scalars");
  return ad::add(ad::scale(ce, lambda), ad::scale(mae_term, 1.0 - lambda));
}

}  // namespace agest
