#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "agest/autodiff.hpp"
#include "agest/matrix.hpp"

namespace agest {

// Square RGB image with pixel values in [0, 1], row-major, channel-interleaved.
struct PatchGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // height * width * 3

  PatchGrid() = default;
  PatchGrid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

// Learned linear projection of flattened patches.
struct PatchEmbed {
  Parameter weight;  // (patch*patch*3) x d
  Parameter bias;    // 1 x d

  static PatchEmbed init(std::size_t patch_size, std::size_t d, Rng& rng);
};

// Node set with fixed structure for one sample. The adjacency is binary,
// symmetric, with self-loops on the diagonal; message starts as a copy of the
// node features.
struct PatchGraph {
  DenseMatrix features;   // N x d
  DenseMatrix adjacency;  // N x N
  DenseMatrix degrees;    // N x 1, row sums of adjacency
  DenseMatrix message;    // N x d
};

// Rows of flattened patches, one per patch, raster order. height and width
// must be divisible by patch_size.
DenseMatrix flatten_patches(const PatchGrid& grid, std::size_t patch_size);

// flatten_patches followed by the learned projection; returns N x d.
DenseMatrix build_patch_embeddings(const PatchGrid& grid, std::size_t patch_size,
                                   std::size_t d, const PatchEmbed& params);

// Differentiable variant used during training.
ad::Var patch_embeddings_var(const PatchGrid& grid, std::size_t patch_size, PatchEmbed& params);

// Directed k-nearest-neighbour edges under Euclidean distance, one block of k
// per node, ties broken toward the lower node index. Requires 1 <= k < N.
std::vector<std::pair<std::size_t, std::size_t>> knn_edges(const DenseMatrix& x, std::size_t k);

// Symmetrizes the edge list by union, adds self-loops, fills degrees and the
// initial message.
PatchGraph build_graph(DenseMatrix x,
                       const std::vector<std::pair<std::size_t, std::size_t>>& edges);

}  // namespace agest
