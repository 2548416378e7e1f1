#include "agest/gcn.hpp"

#include <cmath>
#include <stdexcept>

namespace agest {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

Parameter glorot(std::size_t r, std::size_t c, Rng& rng) {
  return Parameter(DenseMatrix::randn(r, c, rng, 1.0 / std::sqrt(double(r))));
}

}  // namespace

ExtractorParams ExtractorParams::init(std::size_t d, const DiffusionConfig& cfg, Rng& rng) {
  require(cfg.heads >= 1, "ExtractorParams: head count must be positive");
  require(d % cfg.heads == 0, "ExtractorParams: embedding dim not divisible by head count");
  const std::size_t dh = d / cfg.heads;
  ExtractorParams p;
  p.dim = d;
  p.layers.resize(cfg.layers);
  for (LayerParams& layer : p.layers) {
    layer.heads.resize(cfg.heads);
    for (AttentionHeadParams& head : layer.heads) {
      head.w_i = glorot(dh, dh, rng);
      head.w_j = glorot(dh, dh, rng);
      head.attn = glorot(1, 2 * dh, rng);
    }
    layer.decay = Parameter(DenseMatrix(cfg.max_hops + 1, 1, 0.0));
    layer.w_mix = glorot(d, d, rng);
    layer.ln1_gain = Parameter(DenseMatrix(1, d, 1.0));
    layer.ln1_bias = Parameter(DenseMatrix(1, d, 0.0));
    layer.ln2_gain = Parameter(DenseMatrix(1, d, 1.0));
    layer.ln2_bias = Parameter(DenseMatrix(1, d, 0.0));
    layer.ffn_w1 = glorot(d, d, rng);
    layer.ffn_w2 = glorot(d, d, rng);
  }
  return p;
}

std::vector<std::pair<std::string, Parameter*>> ExtractorParams::parameters(
    const std::string& prefix) {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    LayerParams& layer = layers[l];
    for (std::size_t m = 0; m < layer.heads.size(); ++m) {
      const std::string hb = base + ".head" + std::to_string(m);
      out.emplace_back(hb + ".w_i", &layer.heads[m].w_i);
      out.emplace_back(hb + ".w_j", &layer.heads[m].w_j);
      out.emplace_back(hb + ".attn", &layer.heads[m].attn);
    }
    out.emplace_back(base + ".decay", &layer.decay);
    out.emplace_back(base + ".w_mix", &layer.w_mix);
    out.emplace_back(base + ".ln1_gain", &layer.ln1_gain);
    out.emplace_back(base + ".ln1_bias", &layer.ln1_bias);
    out.emplace_back(base + ".ln2_gain", &layer.ln2_gain);
    out.emplace_back(base + ".ln2_bias", &layer.ln2_bias);
    out.emplace_back(base + ".ffn_w1", &layer.ffn_w1);
    out.emplace_back(base + ".ffn_w2", &layer.ffn_w2);
  }
  return out;
}

ad::Var edge_attention(const ad::Var& h, const DenseMatrix& adjacency, AttentionHeadParams& p,
                       double slope) {
  const std::size_t n = h->value.rows;
  require(adjacency.rows == n && adjacency.cols == n, "edge_attention: adjacency shape");
  const std::size_t dh = p.w_i.value.cols;
  require(h->value.cols == p.w_i.value.rows, "edge_attention: feature dim mismatch");
  ad::Var attn = ad::leaf(p.attn);
  ad::Var a_left = ad::slice_cols(attn, 0, dh);
  ad::Var a_right = ad::slice_cols(attn, dh, 2 * dh);
  // tanh of the concatenated pair splits into per-node terms, so the N x N
  // score matrix is an outer sum of two N x 1 projections.
  ad::Var u = ad::tanh_v(ad::matmul(h, ad::leaf(p.w_i)));
  ad::Var v = ad::tanh_v(ad::matmul(h, ad::leaf(p.w_j)));
  ad::Var pi = ad::matmul_nt(u, a_left);
  ad::Var qj = ad::matmul_nt(v, a_right);
  ad::Var scores = ad::leaky_relu(ad::outer_sum(pi, qj), slope);
  return ad::row_softmax(scores, adjacency);
}

ad::Var multi_hop_diffuse(const ad::Var& attention, const ad::Var& h, Parameter& decay,
                          std::size_t max_hops) {
  require(decay.value.rows == max_hops + 1 && decay.value.cols == 1,
          "multi_hop_diffuse: decay must be (K+1) x 1");
  ad::Var deltas = ad::sigmoid_v(ad::leaf(decay));
  ad::Var out = ad::scale_var(h, ad::slice_rows(deltas, 0, 1));
  ad::Var power = attention;
  for (std::size_t k = 1; k <= max_hops; ++k) {
    ad::Var term = ad::matmul(power, h);
    out = ad::add(out, ad::scale_var(term, ad::slice_rows(deltas, k, k + 1)));
    if (k < max_hops) power = ad::matmul(power, attention);
  }
  return out;
}

ad::Var neumann_diffuse(const ad::Var& attention, const ad::Var& h, std::size_t n, double theta) {
  require(n >= 1, "neumann_diffuse: need at least one term");
  require(theta > 0.0 && theta < 1.0, "neumann_diffuse: theta must lie in (0, 1)");
  ad::Var term = ad::scale(ad::matmul(attention, h), theta);
  ad::Var out = term;
  for (std::size_t i = 2; i <= n; ++i) {
    term = ad::scale(ad::matmul(attention, term), theta);
    out = ad::add(out, term);
  }
  return out;
}

ad::Var multi_head_diffusion(const ad::Var& h, const DenseMatrix& adjacency, LayerParams& p,
                             const DiffusionConfig& cfg) {
  const std::size_t d = h->value.cols;
  require(d % p.heads.size() == 0, "multi_head_diffusion: dim not divisible by head count");
  const std::size_t dh = d / p.heads.size();
  ad::Var hn = ad::layer_norm(h, ad::leaf(p.ln1_gain), ad::leaf(p.ln1_bias));
  std::vector<ad::Var> outs;
  outs.reserve(p.heads.size());
  for (std::size_t m = 0; m < p.heads.size(); ++m) {
    ad::Var slice = ad::slice_cols(hn, m * dh, (m + 1) * dh);
    ad::Var att = edge_attention(slice, adjacency, p.heads[m], cfg.leaky_slope);
    if (cfg.use_power_iteration) {
      outs.push_back(neumann_diffuse(att, slice, cfg.power_iters, cfg.spectral_scale));
    } else {
      outs.push_back(multi_hop_diffuse(att, slice, p.decay, cfg.max_hops));
    }
  }
  return ad::matmul(ad::concat_cols(outs), ad::leaf(p.w_mix));
}

ad::Var update_nodes(const ad::Var& h, const ad::Var& message) {
  require(h->value.same_shape(message->value), "update_nodes: shape mismatch");
  return ad::add(h, message);
}

ad::Var ffn_block(const ad::Var& h_pre, const ad::Var& h0, LayerParams& p, double slope) {
  ad::Var t = ad::add(h_pre, h0);
  ad::Var inner = ad::layer_norm(t, ad::leaf(p.ln2_gain), ad::leaf(p.ln2_bias));
  ad::Var ff = ad::matmul(ad::leaky_relu(ad::matmul(inner, ad::leaf(p.ffn_w1)), slope),
                          ad::leaf(p.ffn_w2));
  return ad::add(ff, t);
}

ad::Var extractor_forward(const ad::Var& x, const DenseMatrix& adjacency,
                          ExtractorParams& params, const DiffusionConfig& cfg, Rng& rng,
                          bool training) {
  ad::Var h = x;
  for (LayerParams& layer : params.layers) {
    ad::Var msg = multi_head_diffusion(h, adjacency, layer, cfg);
    msg = ad::dropout(msg, cfg.drop_ratio, rng, training);
    ad::Var upd = update_nodes(h, msg);
    h = ffn_block(upd, x, layer, cfg.leaky_slope);
  }
  return ad::mean_rows(h);
}

DenseMatrix extract_features(const PatchGraph& g, ExtractorParams& params,
                             const DiffusionConfig& cfg) {
  Rng dead(0);
  return extractor_forward(ad::constant(g.features), g.adjacency, params, cfg, dead, false)
      ->value;
}

DenseMatrix drop_message(const DenseMatrix& m, double rho, Rng& rng) {
  if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("drop_message: rho must lie in [0, 1)");
  if (rho == 0.0) return m;
  DenseMatrix out = m;
  const double keep_scale = 1.0 / (1.0 - rho);
  for (double& v : out.data) v = rng.bernoulli(1.0 - rho) ? v * keep_scale : 0.0;
  return out;
}

DenseMatrix power_iterate(const DenseMatrix& q, const DenseMatrix& x, std::size_t n,
                          bool transpose_q) {
  require(q.rows == q.cols, "power_iterate: Q must be square");
  require(q.rows == x.rows, "power_iterate: Q and X row mismatch");
  require(n >= 1, "power_iterate: need at least one iteration");
  const DenseMatrix qq = transpose_q ? transpose(q) : q;
  DenseMatrix term = matmul(qq, x);
  DenseMatrix acc = term;
  double prev_norm = max_abs(term);
  for (std::size_t t = 2; t <= n; ++t) {
    term = matmul(qq, term);
    const double norm = max_abs(term);
    if (norm > 0.0 && norm >= prev_norm) throw std::runtime_error("spectral radius >= 1");
    prev_norm = norm;
    add_in_place(acc, term);
  }
  return acc;
}

DenseMatrix row_normalized(const DenseMatrix& adjacency) {
  require(adjacency.rows == adjacency.cols, "row_normalized: matrix must be square");
  DenseMatrix out = adjacency;
  for (std::size_t i = 0; i < out.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) s += out.at(i, j);
    if (s <= 0.0) throw std::runtime_error("row_normalized: non-positive row sum");
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) /= s;
  }
  return out;
}

}  // namespace agest
