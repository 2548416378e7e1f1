#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "agest/rng.hpp"

namespace agest {

// Dense row-major matrix of doubles. Desk-scale: no views, no expression
// templates. Public operations validate shapes and leave every entry finite.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0);
  DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values);

  static DenseMatrix zeros(std::size_t r, std::size_t c) { return {r, c, 0.0}; }
  static DenseMatrix filled(std::size_t r, std::size_t c, double v) { return {r, c, v}; }
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix randn(std::size_t r, std::size_t c, Rng& rng, double stddev = 1.0);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return rows * cols; }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v);
  bool all_finite() const;
  // Throws std::runtime_error naming `what` if any entry is NaN or infinite.
  void ensure_finite(const std::string& what) const;
};

bool operator==(const DenseMatrix& a, const DenseMatrix& b);

// ---------------------------------------------------------------------------
// Kernels. Shape mismatches throw std::invalid_argument.
// ---------------------------------------------------------------------------

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix transpose(const DenseMatrix& a);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double c);
DenseMatrix add_scalar(const DenseMatrix& a, double c);
void add_in_place(DenseMatrix& a, const DenseMatrix& b);

// Activations. slope must lie in (0, 1).
DenseMatrix leaky_relu(const DenseMatrix& a, double slope);
DenseMatrix tanh_mat(const DenseMatrix& a);
DenseMatrix sigmoid(const DenseMatrix& a);

// Row-wise softmax. When `mask` is non-null, entries with mask == 0 are
// excluded (probability exactly 0); a row whose mask is all zero throws
// std::runtime_error("degenerate attention row"). Without a mask every entry
// participates.
DenseMatrix row_softmax(const DenseMatrix& a, const DenseMatrix* mask = nullptr);

// Row-wise standardization followed by elementwise gain and bias (both 1 x d).
// The denominator is sqrt(max(var, eps)): rows with variance >= eps are
// standardized exactly, zero-variance rows map to bias.
DenseMatrix layer_normalize(const DenseMatrix& a, const DenseMatrix& gain,
                            const DenseMatrix& bias, double eps = 1e-5);

double sum_all(const DenseMatrix& a);
double mean_all(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);  // entrywise infinity norm
DenseMatrix mean_rows(const DenseMatrix& a);  // 1 x cols, mean over rows

// Max over entries of |a - b| / max(1, |b|).
double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace agest
