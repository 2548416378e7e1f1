#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "agest/autodiff.hpp"
#include "agest/graph.hpp"
#include "agest/matrix.hpp"
#include "agest/rng.hpp"

namespace agest {

struct DiffusionConfig {
  std::size_t max_hops = 4;   // K, hop orders 0..K
  std::size_t heads = 2;      // M, must divide the embedding dim
  std::size_t layers = 2;     // L
  double drop_ratio = 0.1;    // message dropout probability
  double leaky_slope = 0.01;
  bool use_power_iteration = false;  // replace exact diffusion by the truncated series
  std::size_t power_iters = 8;       // n, series terms when enabled
  double spectral_scale = 0.9;       // theta, keeps the iterated matrix contractive
};

// One attention head acting on its d/M column slice.
struct AttentionHeadParams {
  Parameter w_i;   // dh x dh, source projection
  Parameter w_j;   // dh x dh, target projection
  Parameter attn;  // 1 x 2*dh, scoring vector over the concatenated pair
};

struct LayerParams {
  std::vector<AttentionHeadParams> heads;
  Parameter decay;     // (K+1) x 1, pre-sigmoid hop weights, shared across heads
  Parameter w_mix;     // d x d, mixes concatenated head outputs
  Parameter ln1_gain;  // 1 x d, pre-attention normalization
  Parameter ln1_bias;
  Parameter ln2_gain;  // 1 x d, normalization inside the feed-forward block
  Parameter ln2_bias;
  Parameter ffn_w1;  // d x d
  Parameter ffn_w2;  // d x d
};

// Full extractor stack. d must be divisible by the head count.
struct ExtractorParams {
  std::vector<LayerParams> layers;
  std::size_t dim = 0;

  static ExtractorParams init(std::size_t d, const DiffusionConfig& cfg, Rng& rng);
  // Deterministic enumeration of every tensor, keyed by dotted path.
  std::vector<std::pair<std::string, Parameter*>> parameters(const std::string& prefix);
};

// --- layer operations --------------------------------------------------------

// Masked attention over graph edges: LeakyReLU-scored pairs, row softmax over
// neighbours (self-loops included). Off-edge entries are exactly zero.
ad::Var edge_attention(const ad::Var& h, const DenseMatrix& adjacency,
                       AttentionHeadParams& p, double slope);

// sum_{k=0..K} sigmoid(decay_k) * attention^k * h, dense matrix powers.
ad::Var multi_hop_diffuse(const ad::Var& attention, const ad::Var& h, Parameter& decay,
                          std::size_t max_hops);

// Truncated series sum_{i=1..n} (theta * attention)^i h, computed by the
// recurrence P_i = theta * attention * P_{i-1}. Approximation mode; the hop
// decay parameters are not used here.
ad::Var neumann_diffuse(const ad::Var& attention, const ad::Var& h, std::size_t n, double theta);

// LN, per-head slice -> attention -> diffusion, concat, mix.
ad::Var multi_head_diffusion(const ad::Var& h, const DenseMatrix& adjacency, LayerParams& p,
                             const DiffusionConfig& cfg);

// Residual node update h + message.
ad::Var update_nodes(const ad::Var& h, const ad::Var& message);

// Adds the layer-stack input back in, then LeakyReLU(LN(t) W1) W2 + t.
ad::Var ffn_block(const ad::Var& h_pre, const ad::Var& h0, LayerParams& p, double slope);

// Whole stack: layers of {diffusion -> message dropout -> node update -> ffn},
// then mean readout over nodes (1 x d). `x` carries the node features (a
// constant or the differentiable patch projection).
ad::Var extractor_forward(const ad::Var& x, const DenseMatrix& adjacency,
                          ExtractorParams& params, const DiffusionConfig& cfg, Rng& rng,
                          bool training);

// Evaluation convenience, no dropout.
DenseMatrix extract_features(const PatchGraph& g, ExtractorParams& params,
                             const DiffusionConfig& cfg);

// --- plain kernels ------------------------------------------------------------

// Bernoulli(1 - rho) mask scaled by 1/(1 - rho); rho = 0 returns the input
// unchanged without consuming randomness.
DenseMatrix drop_message(const DenseMatrix& m, double rho, Rng& rng);

// Truncated series H(n) = sum_{i=1..n} Q^i X via H(t) = Q H(t-1) + H(1).
// Throws std::runtime_error("spectral radius >= 1") when the power terms stop
// decaying. `transpose` iterates with Q^T instead.
DenseMatrix power_iterate(const DenseMatrix& q, const DenseMatrix& x, std::size_t n,
                          bool transpose = false);

// D^-1 A: rows scaled to sum 1. Rows must have positive sums.
DenseMatrix row_normalized(const DenseMatrix& adjacency);

}  // namespace agest
