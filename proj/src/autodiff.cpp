#include "agest/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

namespace agest {
namespace ad {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

Var make_node(DenseMatrix value, std::vector<Var> inputs, std::function<void(Node&)> pull) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  n->pull = std::move(pull);
  n->id = next_id();
  for (const Var& in : n->inputs) {
    if (in->needs_grad) n->needs_grad = true;
  }
  return n;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void Node::add_grad(const DenseMatrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    add_in_place(grad, g);
  }
}

Var constant(DenseMatrix v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->id = next_id();
  return n;
}

Var leaf(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;
  n->needs_grad = p.requires_grad;
  n->param = &p;
  n->id = next_id();
  return n;
}

void backward(const Var& root) {
  require(root != nullptr, "backward: null root");
  require(root->value.rows == 1 && root->value.cols == 1, "backward: root must be 1 x 1");

  // Post-order DFS, children before consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back().first;
    if (stack.back().second < n->inputs.size()) {
      Node* child = n->inputs[stack.back().second].get();
      ++stack.back().second;
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root->add_grad(DenseMatrix(1, 1, 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->needs_grad || n->grad.size() == 0 || !n->pull) continue;
    n->pull(*n);
  }
  for (Node* n : order) {
    if (n->param != nullptr && n->param->requires_grad && n->grad.size() != 0) {
      add_in_place(n->param->gradient, n->grad);
    }
  }
}

// ---------------------------------------------------------------------------
// arithmetic
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  return make_node(agest::matmul(a->value, b->value), {a, b}, [a, b](Node& self) {
    if (a->needs_grad) a->add_grad(agest::matmul_nt(self.grad, b->value));
    if (b->needs_grad) b->add_grad(agest::matmul_tn(a->value, self.grad));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  return make_node(agest::matmul_nt(a->value, b->value), {a, b}, [a, b](Node& self) {
    if (a->needs_grad) a->add_grad(agest::matmul(self.grad, b->value));
    if (b->needs_grad) b->add_grad(agest::matmul_tn(self.grad, a->value));
  });
}

Var add(const Var& a, const Var& b) {
  return make_node(agest::add(a->value, b->value), {a, b}, [a, b](Node& self) {
    if (a->needs_grad) a->add_grad(self.grad);
    if (b->needs_grad) b->add_grad(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  return make_node(agest::sub(a->value, b->value), {a, b}, [a, b](Node& self) {
    if (a->needs_grad) a->add_grad(self.grad);
    if (b->needs_grad) b->add_grad(agest::scale(self.grad, -1.0));
  });
}

Var hadamard(const Var& a, const Var& b) {
  return make_node(agest::hadamard(a->value, b->value), {a, b}, [a, b](Node& self) {
    if (a->needs_grad) a->add_grad(agest::hadamard(self.grad, b->value));
    if (b->needs_grad) b->add_grad(agest::hadamard(self.grad, a->value));
  });
}

Var scale(const Var& a, double c) {
  return make_node(agest::scale(a->value, c), {a}, [a, c](Node& self) {
    if (a->needs_grad) a->add_grad(agest::scale(self.grad, c));
  });
}

Var add_scalar(const Var& a, double c) {
  return make_node(agest::add_scalar(a->value, c), {a}, [a](Node& self) {
    if (a->needs_grad) a->add_grad(self.grad);
  });
}

Var scale_var(const Var& a, const Var& s) {
  require(s->value.rows == 1 && s->value.cols == 1, "scale_var: scalar must be 1 x 1");
  return make_node(agest::scale(a->value, s->value.at(0, 0)), {a, s}, [a, s](Node& self) {
    if (a->needs_grad) a->add_grad(agest::scale(self.grad, s->value.at(0, 0)));
    if (s->needs_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.data.size(); ++i) {
        acc += self.grad.data[i] * a->value.data[i];
      }
      s->add_grad(DenseMatrix(1, 1, acc));
    }
  });
}

Var add_row_broadcast(const Var& a, const Var& bias) {
  require(bias->value.rows == 1 && bias->value.cols == a->value.cols,
          "add_row_broadcast: bias must be 1 x cols");
  DenseMatrix out = a->value;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) += bias->value.at(0, j);
  }
  return make_node(std::move(out), {a, bias}, [a, bias](Node& self) {
    if (a->needs_grad) a->add_grad(self.grad);
    if (bias->needs_grad) {
      DenseMatrix g(1, self.grad.cols);
      for (std::size_t i = 0; i < self.grad.rows; ++i) {
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.at(0, j) += self.grad.at(i, j);
      }
      bias->add_grad(g);
    }
  });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const std::size_t rows = parts[0]->value.rows;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(p->value.rows == rows, "concat_cols: row mismatch");
    total += p->value.cols;
  }
  DenseMatrix out(rows, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < p->value.cols; ++j) out.at(i, off + j) = p->value.at(i, j);
    }
    off += p->value.cols;
  }
  return make_node(std::move(out), parts, [parts](Node& self) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      if (p->needs_grad) {
        DenseMatrix g(p->value.rows, p->value.cols);
        for (std::size_t i = 0; i < g.rows; ++i) {
          for (std::size_t j = 0; j < g.cols; ++j) g.at(i, j) = self.grad.at(i, off + j);
        }
        p->add_grad(g);
      }
      off += p->value.cols;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  const std::size_t cols = parts[0]->value.cols;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require(p->value.cols == cols, "concat_rows: column mismatch");
    total += p->value.rows;
  }
  DenseMatrix out(total, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t i = 0; i < p->value.rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) out.at(off + i, j) = p->value.at(i, j);
    }
    off += p->value.rows;
  }
  return make_node(std::move(out), parts, [parts](Node& self) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      if (p->needs_grad) {
        DenseMatrix g(p->value.rows, p->value.cols);
        for (std::size_t i = 0; i < g.rows; ++i) {
          for (std::size_t j = 0; j < g.cols; ++j) g.at(i, j) = self.grad.at(off + i, j);
        }
        p->add_grad(g);
      }
      off += p->value.rows;
    }
  });
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  require(c0 < c1 && c1 <= a->value.cols, "slice_cols: bad range");
  DenseMatrix out(a->value.rows, c1 - c0);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = a->value.at(i, c0 + j);
  }
  return make_node(std::move(out), {a}, [a, c0](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < self.grad.rows; ++i) {
      for (std::size_t j = 0; j < self.grad.cols; ++j) g.at(i, c0 + j) = self.grad.at(i, j);
    }
    a->add_grad(g);
  });
}

Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
  require(r0 < r1 && r1 <= a->value.rows, "slice_rows: bad range");
  DenseMatrix out(r1 - r0, a->value.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = a->value.at(r0 + i, j);
  }
  return make_node(std::move(out), {a}, [a, r0](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < self.grad.rows; ++i) {
      for (std::size_t j = 0; j < self.grad.cols; ++j) g.at(r0 + i, j) = self.grad.at(i, j);
    }
    a->add_grad(g);
  });
}

Var outer_sum(const Var& p, const Var& q) {
  require(p->value.cols == 1 && q->value.cols == 1, "outer_sum: inputs must be column vectors");
  DenseMatrix out(p->value.rows, q->value.rows);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) {
      out.at(i, j) = p->value.at(i, 0) + q->value.at(j, 0);
    }
  }
  return make_node(std::move(out), {p, q}, [p, q](Node& self) {
    if (p->needs_grad) {
      DenseMatrix g(p->value.rows, 1);
      for (std::size_t i = 0; i < self.grad.rows; ++i) {
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.at(i, 0) += self.grad.at(i, j);
      }
      p->add_grad(g);
    }
    if (q->needs_grad) {
      DenseMatrix g(q->value.rows, 1);
      for (std::size_t i = 0; i < self.grad.rows; ++i) {
        for (std::size_t j = 0; j < self.grad.cols; ++j) g.at(j, 0) += self.grad.at(i, j);
      }
      q->add_grad(g);
    }
  });
}

Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
  for (std::size_t r : idx) require(r < a->value.rows, "gather_rows: index out of range");
  DenseMatrix out(idx.size(), a->value.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = a->value.at(idx[i], j);
  }
  return make_node(std::move(out), {a}, [a, idx = std::move(idx)](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) g.at(idx[i], j) += self.grad.at(i, j);
    }
    a->add_grad(g);
  });
}

Var select_cols(const Var& a, std::vector<std::size_t> idx) {
  require(idx.size() == a->value.rows, "select_cols: one index per row required");
  for (std::size_t c : idx) require(c < a->value.cols, "select_cols: index out of range");
  DenseMatrix out(a->value.rows, 1);
  for (std::size_t i = 0; i < out.rows; ++i) out.at(i, 0) = a->value.at(i, idx[i]);
  return make_node(std::move(out), {a}, [a, idx = std::move(idx)](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) g.at(i, idx[i]) = self.grad.at(i, 0);
    a->add_grad(g);
  });
}

Var replace_cols(const Var& a, std::vector<std::size_t> idx, const Var& b) {
  require(idx.size() == a->value.rows, "replace_cols: one index per row required");
  require(b->value.rows == a->value.rows && b->value.cols == 1,
          "replace_cols: replacement must be rows x 1");
  for (std::size_t c : idx) require(c < a->value.cols, "replace_cols: index out of range");
  DenseMatrix out = a->value;
  for (std::size_t i = 0; i < out.rows; ++i) out.at(i, idx[i]) = b->value.at(i, 0);
  return make_node(std::move(out), {a, b}, [a, b, idx = std::move(idx)](Node& self) {
    if (a->needs_grad) {
      DenseMatrix g = self.grad;
      for (std::size_t i = 0; i < idx.size(); ++i) g.at(i, idx[i]) = 0.0;
      a->add_grad(g);
    }
    if (b->needs_grad) {
      DenseMatrix g(b->value.rows, 1);
      for (std::size_t i = 0; i < idx.size(); ++i) g.at(i, 0) = self.grad.at(i, idx[i]);
      b->add_grad(g);
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var leaky_relu(const Var& a, double slope) {
  return make_node(agest::leaky_relu(a->value, slope), {a}, [a, slope](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (a->value.data[i] < 0.0) g.data[i] *= slope;
    }
    a->add_grad(g);
  });
}

Var tanh_v(const Var& a) {
  return make_node(tanh_mat(a->value), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double t = self.value.data[i];
      g.data[i] *= 1.0 - t * t;
    }
    a->add_grad(g);
  });
}

Var sigmoid_v(const Var& a) {
  return make_node(sigmoid(a->value), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double s = self.value.data[i];
      g.data[i] *= s * (1.0 - s);
    }
    a->add_grad(g);
  });
}

Var abs_v(const Var& a) {
  DenseMatrix out = a->value;
  for (double& v : out.data) v = std::abs(v);
  return make_node(std::move(out), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double v = a->value.data[i];
      g.data[i] *= (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
    a->add_grad(g);
  });
}

Var cos_v(const Var& a) {
  DenseMatrix out = a->value;
  for (double& v : out.data) v = std::cos(v);
  return make_node(std::move(out), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      g.data[i] *= -std::sin(a->value.data[i]);
    }
    a->add_grad(g);
  });
}

Var acos_clamped(const Var& a, double margin) {
  require(margin > 0.0 && margin < 1.0, "acos_clamped: margin must lie in (0, 1)");
  const double lo = -1.0 + margin;
  const double hi = 1.0 - margin;
  DenseMatrix out = a->value;
  for (double& v : out.data) v = std::acos(std::min(hi, std::max(lo, v)));
  return make_node(std::move(out), {a}, [a, lo, hi](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      const double c = a->value.data[i];
      if (c <= lo || c >= hi) {
        g.data[i] = 0.0;
      } else {
        g.data[i] *= -1.0 / std::sqrt(1.0 - c * c);
      }
    }
    a->add_grad(g);
  });
}

Var clamp_max(const Var& a, double bound) {
  DenseMatrix out = a->value;
  for (double& v : out.data) v = std::min(v, bound);
  return make_node(std::move(out), {a}, [a, bound](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g = self.grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      if (a->value.data[i] >= bound) g.data[i] = 0.0;
    }
    a->add_grad(g);
  });
}

// ---------------------------------------------------------------------------
// rows and reductions
// ---------------------------------------------------------------------------

namespace {

Var row_softmax_impl(const Var& a, std::shared_ptr<DenseMatrix> mask) {
  DenseMatrix out = agest::row_softmax(a->value, mask.get());
  return make_node(std::move(out), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    // Masked entries have probability 0, which zeroes their contribution.
    DenseMatrix g(self.grad.rows, self.grad.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) {
        dot += self.grad.at(i, j) * self.value.at(i, j);
      }
      for (std::size_t j = 0; j < g.cols; ++j) {
        g.at(i, j) = self.value.at(i, j) * (self.grad.at(i, j) - dot);
      }
    }
    a->add_grad(g);
  });
}

}  // namespace

Var row_softmax(const Var& a, DenseMatrix mask) {
  return row_softmax_impl(a, std::make_shared<DenseMatrix>(std::move(mask)));
}

Var row_softmax(const Var& a) { return row_softmax_impl(a, nullptr); }

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  DenseMatrix out = agest::layer_normalize(a->value, gain->value, bias->value, eps);
  return make_node(std::move(out), {a, gain, bias}, [a, gain, bias, eps](Node& self) {
    const DenseMatrix& x = a->value;
    const std::size_t d = x.cols;
    DenseMatrix dx(x.rows, x.cols);
    DenseMatrix dgain(1, d);
    DenseMatrix dbias(1, d);
    for (std::size_t i = 0; i < x.rows; ++i) {
      double mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) mean += x.at(i, j);
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = x.at(i, j) - mean;
        var += dv * dv;
      }
      var /= static_cast<double>(d);
      const double denom = std::sqrt(std::max(var, eps));

      double dxhat_mean = 0.0;
      double dxhat_xhat_mean = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (x.at(i, j) - mean) / denom;
        const double gy = self.grad.at(i, j);
        dgain.at(0, j) += gy * xhat;
        dbias.at(0, j) += gy;
        const double dxhat = gy * gain->value.at(0, j);
        dxhat_mean += dxhat;
        dxhat_xhat_mean += dxhat * xhat;
      }
      dxhat_mean /= static_cast<double>(d);
      dxhat_xhat_mean /= static_cast<double>(d);
      const bool var_active = var > eps;
      for (std::size_t j = 0; j < d; ++j) {
        const double xhat = (x.at(i, j) - mean) / denom;
        const double dxhat = self.grad.at(i, j) * gain->value.at(0, j);
        double v = dxhat - dxhat_mean;
        if (var_active) v -= xhat * dxhat_xhat_mean;
        dx.at(i, j) = v / denom;
      }
    }
    if (a->needs_grad) a->add_grad(dx);
    if (gain->needs_grad) gain->add_grad(dgain);
    if (bias->needs_grad) bias->add_grad(dbias);
  });
}

Var row_logsumexp(const Var& a) {
  DenseMatrix out(a->value.rows, 1);
  for (std::size_t i = 0; i < a->value.rows; ++i) {
    double mx = a->value.at(i, 0);
    for (std::size_t j = 1; j < a->value.cols; ++j) mx = std::max(mx, a->value.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < a->value.cols; ++j) s += std::exp(a->value.at(i, j) - mx);
    out.at(i, 0) = mx + std::log(s);
  }
  out.ensure_finite("row_logsumexp");
  return make_node(std::move(out), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    const DenseMatrix p = agest::row_softmax(a->value);
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) {
        g.at(i, j) = self.grad.at(i, 0) * p.at(i, j);
      }
    }
    a->add_grad(g);
  });
}

Var row_l2_normalize(const Var& a) {
  DenseMatrix out = a->value;
  std::vector<double> norms(a->value.rows);
  for (std::size_t i = 0; i < out.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < out.cols; ++j) s += out.at(i, j) * out.at(i, j);
    const double n = std::sqrt(s);
    if (n < 1e-30) throw std::runtime_error("row_l2_normalize: zero row");
    norms[i] = n;
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) /= n;
  }
  return make_node(std::move(out), {a}, [a, norms = std::move(norms)](Node& self) {
    if (!a->needs_grad) return;
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols; ++j) dot += self.grad.at(i, j) * self.value.at(i, j);
      for (std::size_t j = 0; j < g.cols; ++j) {
        g.at(i, j) = (self.grad.at(i, j) - self.value.at(i, j) * dot) / norms[i];
      }
    }
    a->add_grad(g);
  });
}

Var mean_rows(const Var& a) {
  return make_node(agest::mean_rows(a->value), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    const double inv = 1.0 / static_cast<double>(a->value.rows);
    DenseMatrix g(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < g.cols; ++j) g.at(i, j) = self.grad.at(0, j) * inv;
    }
    a->add_grad(g);
  });
}

Var mean_all(const Var& a) {
  return make_node(DenseMatrix(1, 1, agest::mean_all(a->value)), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    const double g0 = self.grad.at(0, 0) / static_cast<double>(a->value.size());
    a->add_grad(DenseMatrix::filled(a->value.rows, a->value.cols, g0));
  });
}

Var sum_all(const Var& a) {
  return make_node(DenseMatrix(1, 1, agest::sum_all(a->value)), {a}, [a](Node& self) {
    if (!a->needs_grad) return;
    a->add_grad(DenseMatrix::filled(a->value.rows, a->value.cols, self.grad.at(0, 0)));
  });
}

Var dropout(const Var& a, double rho, Rng& rng, bool training) {
  require(rho >= 0.0 && rho < 1.0, "dropout: rho must lie in [0, 1)");
  if (!training || rho == 0.0) return a;
  DenseMatrix factor(a->value.rows, a->value.cols);
  const double keep_scale = 1.0 / (1.0 - rho);
  for (double& v : factor.data) v = rng.bernoulli(1.0 - rho) ? keep_scale : 0.0;
  DenseMatrix out = agest::hadamard(a->value, factor);
  return make_node(std::move(out), {a}, [a, factor = std::move(factor)](Node& self) {
    if (!a->needs_grad) return;
    a->add_grad(agest::hadamard(self.grad, factor));
  });
}

}  // namespace ad

double gradient_check(const std::function<ad::Var()>& build,
                      const std::vector<Parameter*>& params, double h) {
  if (h < 1e-6 || h > 1e-3) {
    throw std::invalid_argument("gradient_check: h must lie in [1e-6, 1e-3]");
  }
  for (Parameter* p : params) p->zero_grad();
  ad::Var root = build();
  ad::backward(root);
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->gradient);

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (std::size_t e = 0; e < p->value.data.size(); ++e) {
      const double orig = p->value.data[e];
      p->value.data[e] = orig + h;
      const double fp = build()->value.at(0, 0);
      p->value.data[e] = orig - h;
      const double fm = build()->value.at(0, 0);
      p->value.data[e] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::runtime_error("gradient_check: non-finite value at parameter " +
                                 std::to_string(pi) + " entry " + std::to_string(e));
      }
      const double fd = (fp - fm) / (2.0 * h);
      const double rel = std::abs(analytic[pi].data[e] - fd) / std::max(1.0, std::abs(fd));
      max_err = std::max(max_err, rel);
    }
  }
  return max_err;
}

}  // namespace agest
