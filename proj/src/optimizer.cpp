#include "agest/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace agest {

namespace {

void validate_groups(const std::vector<ParamGroup>& groups) {
  for (const ParamGroup& g : groups) {
    if (g.param == nullptr) throw std::invalid_argument("optimizer: null parameter");
  }
}

}  // namespace

SgdMomentum::SgdMomentum(std::vector<ParamGroup> groups, double lr, double momentum,
                         double weight_decay)
    : groups_(std::move(groups)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
  validate_groups(groups_);
  if (!(lr > 0.0)) throw std::invalid_argument("SgdMomentum: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("SgdMomentum: momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("SgdMomentum: negative weight decay");
  velocity_.reserve(groups_.size());
  for (const ParamGroup& g : groups_)
    velocity_.push_back(DenseMatrix::zeros(g.param->value.rows, g.param->value.cols));
}

void SgdMomentum::step() {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    Parameter& p = *groups_[i].param;
    if (!p.requires_grad) continue;
    const double wd = groups_[i].weight_decay ? weight_decay_ : 0.0;
    DenseMatrix& v = velocity_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.gradient.data[j] + wd * p.value.data[j];
      v.data[j] = momentum_ * v.data[j] + g;
      p.value.data[j] -= lr_ * v.data[j];
    }
    p.value.ensure_finite("SgdMomentum: parameter update");
  }
}

void SgdMomentum::zero_grad() {
  for (const ParamGroup& g : groups_) g.param->zero_grad();
}

Adam::Adam(std::vector<ParamGroup> groups, double lr, double beta1, double beta2, double eps,
           double weight_decay)
    : groups_(std::move(groups)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  validate_groups(groups_);
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("Adam: eps must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("Adam: negative weight decay");
  m_.reserve(groups_.size());
  v_.reserve(groups_.size());
  for (const ParamGroup& g : groups_) {
    m_.push_back(DenseMatrix::zeros(g.param->value.rows, g.param->value.cols));
    v_.push_back(DenseMatrix::zeros(g.param->value.rows, g.param->value.cols));
  }
}

void Adam::step() {
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    Parameter& p = *groups_[i].param;
    if (!p.requires_grad) continue;
    const double wd = groups_[i].weight_decay ? weight_decay_ : 0.0;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.gradient.data[j] + wd * p.value.data[j];
      m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
      v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i].data[j] / bc1;
      const double vhat = v_[i].data[j] / bc2;
      p.value.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    p.value.ensure_finite("Adam: parameter update");
  }
}

void Adam::zero_grad() {
  for (const ParamGroup& g : groups_) g.param->zero_grad();
}

double cosine_lr(double base, double floor, long t, long total) {
  if (total <= 0) throw std::invalid_argument("cosine_lr: total must be positive");
  if (floor < 0.0 || floor > base) throw std::invalid_argument("cosine_lr: invalid floor");
  const long tc = t < 0 ? 0 : (t > total ? total : t);
  const double phase = std::numbers::pi * double(tc) / double(total);
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(phase));
}

}  // namespace agest
