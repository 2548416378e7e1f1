#pragma once

#include <cstddef>
#include <vector>

#include "agest/autodiff.hpp"
#include "agest/matrix.hpp"

namespace agest {

// One optimized tensor; weight decay is opt-out so margin, norm, and bias
// parameters can be excluded.
struct ParamGroup {
  Parameter* param = nullptr;
  bool weight_decay = true;
};

// Stochastic gradient descent with classical momentum. Parameters with
// requires_grad == false are skipped entirely.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<ParamGroup> groups, double lr, double momentum = 0.9,
              double weight_decay = 0.0);

  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<DenseMatrix> velocity_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

// Adam with L2-style decay folded into the gradient.
class Adam {
 public:
  Adam(std::vector<ParamGroup> groups, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8, double weight_decay = 0.0);

  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
  long t_ = 0;
};

// Cosine annealing from `base` down to `floor` over `total` steps; t is
// clamped into [0, total].
double cosine_lr(double base, double floor, long t, long total);

}  // namespace agest
