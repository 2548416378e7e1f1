#include "agest/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace agest {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

PatchEmbed PatchEmbed::init(std::size_t patch_size, std::size_t d, Rng& rng) {
  const std::size_t in_dim = patch_size * patch_size * 3;
  PatchEmbed e;
  e.weight = Parameter(DenseMatrix::randn(in_dim, d, rng, 1.0 / std::sqrt(double(in_dim))));
  e.bias = Parameter(DenseMatrix(1, d));
  return e;
}

DenseMatrix flatten_patches(const PatchGrid& grid, std::size_t patch_size) {
  require(patch_size > 0, "flatten_patches: patch_size must be positive");
  require(grid.height % patch_size == 0 && grid.width % patch_size == 0,
          "flatten_patches: image size not divisible by patch size");
  const std::size_t py = grid.height / patch_size;
  const std::size_t px = grid.width / patch_size;
  DenseMatrix out(py * px, patch_size * patch_size * 3);
  for (std::size_t gy = 0; gy < py; ++gy) {
    for (std::size_t gx = 0; gx < px; ++gx) {
      const std::size_t row = gy * px + gx;
      std::size_t col = 0;
      for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
          for (std::size_t c = 0; c < 3; ++c) {
            out.at(row, col++) = grid.at(gy * patch_size + y, gx * patch_size + x, c);
          }
        }
      }
    }
  }
  return out;
}

DenseMatrix build_patch_embeddings(const PatchGrid& grid, std::size_t patch_size, std::size_t d,
                                   const PatchEmbed& params) {
  require(params.weight.value.cols == d, "build_patch_embeddings: weight cols != d");
  require(params.weight.value.rows == patch_size * patch_size * 3,
          "build_patch_embeddings: weight rows != patch elements");
  DenseMatrix flat = flatten_patches(grid, patch_size);
  DenseMatrix x = matmul(flat, params.weight.value);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < x.cols; ++j) x.at(i, j) += params.bias.value.at(0, j);
  }
  return x;
}

ad::Var patch_embeddings_var(const PatchGrid& grid, std::size_t patch_size, PatchEmbed& params) {
  ad::Var flat = ad::constant(flatten_patches(grid, patch_size));
  return ad::add_row_broadcast(ad::matmul(flat, ad::leaf(params.weight)),
                               ad::leaf(params.bias));
}

std::vector<std::pair<std::size_t, std::size_t>> knn_edges(const DenseMatrix& x, std::size_t k) {
  const std::size_t n = x.rows;
  require(n >= 2, "knn_edges: need at least two nodes");
  require(k >= 1 && k < n, "knn_edges: k must satisfy 1 <= k < N");
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double dv = x.at(i, c) - x.at(j, c);
        d2 += dv * dv;
      }
      cand.emplace_back(d2, j);
    }
    // Ties resolve toward the lower index.
    std::sort(cand.begin(), cand.end());
    for (std::size_t r = 0; r < k; ++r) edges.emplace_back(i, cand[r].second);
  }
  return edges;
}

PatchGraph build_graph(DenseMatrix x,
                       const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const std::size_t n = x.rows;
  require(n > 0, "build_graph: empty feature matrix");
  PatchGraph g;
  g.adjacency = DenseMatrix(n, n);
  for (const auto& [i, j] : edges) {
    require(i < n && j < n, "build_graph: edge index out of range");
    g.adjacency.at(i, j) = 1.0;
    g.adjacency.at(j, i) = 1.0;  // union symmetrization
  }
  for (std::size_t i = 0; i < n; ++i) g.adjacency.at(i, i) = 1.0;
  g.degrees = DenseMatrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += g.adjacency.at(i, j);
    g.degrees.at(i, 0) = d;
  }
  g.message = x;
  g.features = std::move(x);
  return g;
}

}  // namespace agest
