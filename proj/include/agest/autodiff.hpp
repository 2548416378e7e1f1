#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "agest/matrix.hpp"
#include "agest/rng.hpp"

namespace agest {

// Trainable tensor: value plus accumulated gradient of identical shape.
class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(DenseMatrix v, bool requires_grad_ = true)
      : value(std::move(v)),
        gradient(DenseMatrix::zeros(value.rows, value.cols)),
        requires_grad(requires_grad_) {}

  DenseMatrix value;
  DenseMatrix gradient;
  bool requires_grad = true;

  void zero_grad() { gradient.fill(0.0); }
};

namespace ad {

// One node of the reverse-mode graph. Nodes form a DAG through `inputs`;
// backward() runs a topological sweep and each node's pull function adds its
// contribution into the inputs' grad buffers. Leaves created from a Parameter
// additionally accumulate into Parameter::gradient.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  DenseMatrix value;
  DenseMatrix grad;  // allocated on first use during backward
  bool needs_grad = false;
  Parameter* param = nullptr;
  std::vector<Var> inputs;
  std::function<void(Node&)> pull;
  std::uint64_t id = 0;

  void add_grad(const DenseMatrix& g);
};

Var constant(DenseMatrix v);
Var leaf(Parameter& p);

// Root must be 1 x 1. Accumulates into every reachable Parameter's gradient.
void backward(const Var& root);

// --- arithmetic -------------------------------------------------------------
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
// Multiply a matrix by a 1 x 1 variable.
Var scale_var(const Var& a, const Var& s);
// a is n x d, bias is 1 x d, added to every row.
Var add_row_broadcast(const Var& a, const Var& bias);

// --- shape ------------------------------------------------------------------
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);  // [c0, c1)
Var slice_rows(const Var& a, std::size_t r0, std::size_t r1);  // [r0, r1)
// out_ij = p_i + q_j for column vectors p (n x 1), q (m x 1).
Var outer_sum(const Var& p, const Var& q);
// Picks rows of `a` by index; duplicates allowed (scatter-add on backward).
Var gather_rows(const Var& a, std::vector<std::size_t> idx);
// out_i = a(i, col_idx[i]); one picked entry per row.
Var select_cols(const Var& a, std::vector<std::size_t> idx);
// Copy of `a` with a(i, col_idx[i]) replaced by b(i, 0).
Var replace_cols(const Var& a, std::vector<std::size_t> idx, const Var& b);

// --- elementwise ------------------------------------------------------------
Var leaky_relu(const Var& a, double slope);
Var tanh_v(const Var& a);
Var sigmoid_v(const Var& a);
Var abs_v(const Var& a);
Var cos_v(const Var& a);
// acos of the input clamped into [-1 + margin, 1 - margin]; clamped entries
// get zero gradient.
Var acos_clamped(const Var& a, double margin = 1e-9);
Var clamp_max(const Var& a, double bound);

// --- rows and reductions ----------------------------------------------------
// Masked row softmax; mask entries equal to 0 are excluded (see kernel).
Var row_softmax(const Var& a, DenseMatrix mask);
Var row_softmax(const Var& a);
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
Var row_logsumexp(const Var& a);  // n x 1
Var row_l2_normalize(const Var& a);
Var mean_rows(const Var& a);  // 1 x d
Var mean_all(const Var& a);   // 1 x 1
Var sum_all(const Var& a);    // 1 x 1

// --- stochastic -------------------------------------------------------------
// Multiplies by a Bernoulli(1 - rho) mask scaled by 1/(1 - rho) when training;
// identity when !training or rho == 0. rho must lie in [0, 1).
Var dropout(const Var& a, double rho, Rng& rng, bool training);

}  // namespace ad

// Central-difference gradient verification. `build` reconstructs the scalar
// graph from the current parameter values; `h` must lie in [1e-6, 1e-3].
// Returns the max over parameter entries of
//   |analytic - fd| / max(1, |fd|).
// Throws std::runtime_error naming the parameter coordinate if a perturbed
// evaluation produces a non-finite value.
double gradient_check(const std::function<ad::Var()>& build,
                      const std::vector<Parameter*>& params, double h);

}  // namespace agest
