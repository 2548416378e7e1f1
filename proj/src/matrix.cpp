#include "agest/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agest {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, double fill)
    : rows(r), cols(c), data(r * c, fill) {}

DenseMatrix::DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  require(data.size() == rows * cols, "DenseMatrix: data length != rows * cols");
  ensure_finite("DenseMatrix constructor");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::randn(std::size_t r, std::size_t c, Rng& rng, double stddev) {
  DenseMatrix m(r, c);
  for (double& v : m.data) v = rng.normal(0.0, stddev);
  return m;
}

void DenseMatrix::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool DenseMatrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void DenseMatrix::ensure_finite(const std::string& what) const {
  if (!all_finite()) throw std::runtime_error(what + ": non-finite value");
}

bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  DenseMatrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  out.ensure_finite("matmul");
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
  DenseMatrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
      out.at(i, j) = s;
    }
  }
  out.ensure_finite("matmul_nt");
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows == b.rows, "matmul_tn: inner dimensions differ");
  DenseMatrix out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a.at(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) {
        out.at(i, j) += aki * b.at(k, j);
      }
    }
  }
  out.ensure_finite("matmul_tn");
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "add: shape mismatch");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  out.ensure_finite("add");
  return out;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "sub: shape mismatch");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  out.ensure_finite("sub");
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "hadamard: shape mismatch");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  out.ensure_finite("hadamard");
  return out;
}

DenseMatrix scale(const DenseMatrix& a, double c) {
  DenseMatrix out = a;
  for (double& v : out.data) v *= c;
  out.ensure_finite("scale");
  return out;
}

DenseMatrix add_scalar(const DenseMatrix& a, double c) {
  DenseMatrix out = a;
  for (double& v : out.data) v += c;
  out.ensure_finite("add_scalar");
  return out;
}

void add_in_place(DenseMatrix& a, const DenseMatrix& b) {
  require(a.same_shape(b), "add_in_place: shape mismatch");
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

DenseMatrix leaky_relu(const DenseMatrix& a, double slope) {
  require(slope > 0.0 && slope < 1.0, "leaky_relu: slope must lie in (0, 1)");
  DenseMatrix out = a;
  for (double& v : out.data) {
    if (v < 0.0) v *= slope;
  }
  return out;
}

DenseMatrix tanh_mat(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

DenseMatrix sigmoid(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

DenseMatrix row_softmax(const DenseMatrix& a, const DenseMatrix* mask) {
  if (mask != nullptr) {
    require(a.same_shape(*mask), "row_softmax: mask shape mismatch");
  }
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols; ++j) {
      if (mask != nullptr && mask->at(i, j) == 0.0) continue;
      mx = std::max(mx, a.at(i, j));
    }
    if (!std::isfinite(mx)) throw std::runtime_error("degenerate attention row");
    double denom = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      if (mask != nullptr && mask->at(i, j) == 0.0) continue;
      const double e = std::exp(a.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < a.cols; ++j) out.at(i, j) /= denom;
  }
  out.ensure_finite("row_softmax");
  return out;
}

DenseMatrix layer_normalize(const DenseMatrix& a, const DenseMatrix& gain,
                            const DenseMatrix& bias, double eps) {
  require(gain.rows == 1 && gain.cols == a.cols, "layer_normalize: gain must be 1 x cols");
  require(bias.rows == 1 && bias.cols == a.cols, "layer_normalize: bias must be 1 x cols");
  require(eps > 0.0, "layer_normalize: eps must be positive");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) mean += a.at(i, j);
    mean /= static_cast<double>(a.cols);
    double var = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double d = a.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(a.cols);
    const double denom = std::sqrt(std::max(var, eps));
    for (std::size_t j = 0; j < a.cols; ++j) {
      out.at(i, j) = gain.at(0, j) * (a.at(i, j) - mean) / denom + bias.at(0, j);
    }
  }
  out.ensure_finite("layer_normalize");
  return out;
}

double sum_all(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double mean_all(const DenseMatrix& a) {
  require(a.size() > 0, "mean_all: empty matrix");
  return sum_all(a) / static_cast<double>(a.size());
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

DenseMatrix mean_rows(const DenseMatrix& a) {
  require(a.rows > 0, "mean_rows: empty matrix");
  DenseMatrix out(1, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out.at(0, j) += a.at(i, j);
  }
  for (double& v : out.data) v /= static_cast<double>(a.rows);
  return out;
}

double max_rel_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_rel_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double denom = std::max(1.0, std::abs(b.data[i]));
    m = std::max(m, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return m;
}

}  // namespace agest
