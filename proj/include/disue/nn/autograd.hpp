#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// Every op returns a Var wrapping a graph Node. A node records its inputs and a
// backward closure only when at least one input requires a gradient, so
// evaluation-only forward passes keep no graph alive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "disue/error.hpp"
#include "disue/nn/tensor.hpp"

namespace disue::nn {

// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbFloor = 1e-12;

struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer() {
    if (!has_grad) {
      grad = Tensor(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  static Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }

  // Gradient from the last backward pass; zeros if this node was unreachable.
  Tensor grad() const { return node_->has_grad ? node_->grad : Tensor(node_->value.shape()); }

  double item() const { return node_->value.item(); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

inline Var make_result(Tensor value, std::initializer_list<Var> inputs, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (const auto& in : inputs) n->inputs.push_back(in.node());
    n->backward_fn = std::move(fn);
  }
  return Var(std::move(n));
}

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw InvalidInput(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

// Runs reverse accumulation from a scalar loss. Every node reachable from
// `loss` has its gradient reset to zero first, so repeated calls do not
// accumulate across passes.
inline void backward(const Var& loss) {
  if (!loss.node() || !loss.requires_grad()) {
    throw InvalidState("backward called on a detached scalar (no recorded graph)");
  }
  if (loss.value().size() != 1) {
    throw InvalidInput("backward expects a scalar loss, got shape " + shape_str(loss.shape()));
  }

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->has_grad = false;
    n->grad_buffer();
  }
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

inline Var detach(const Var& x) { return Var::constant(x.value()); }

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  detail::require_rank2(A, "matmul");
  detail::require_rank2(B, "matmul");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw InvalidInput("matmul: inner dimensions differ, " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return detail::make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    const Tensor& g = self.grad;
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) {
      Tensor& ga = na.grad_buffer();
      const Tensor& Bv = nb.value;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * Bv[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      Tensor& gb = nb.grad_buffer();
      const Tensor& Av = na.value;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
      }
    }
  });
}

// x[m, n] + bias[n] broadcast over rows.
inline Var add_bias(const Var& x, const Var& bias) {
  const Tensor& X = x.value();
  detail::require_rank2(X, "add_bias");
  const std::size_t m = X.rows(), n = X.cols();
  if (bias.value().size() != n) {
    throw InvalidInput("add_bias: bias of size " + std::to_string(bias.value().size()) + " for " +
                       std::to_string(n) + " columns");
  }
  Tensor out = X;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.value()[j];
  return detail::make_result(std::move(out), {x, bias}, [m, n](Node& self) {
    const Tensor& g = self.grad;
    if (self.inputs[0]->requires_grad) {
      Tensor& gx = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
    }
    if (self.inputs[1]->requires_grad) {
      Tensor& gb = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

// [m, p] ++ [m, q] -> [m, p + q]
inline Var concat_cols(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  detail::require_rank2(A, "concat_cols");
  detail::require_rank2(B, "concat_cols");
  if (A.rows() != B.rows()) throw InvalidInput("concat_cols: row counts differ");
  const std::size_t m = A.rows(), p = A.cols(), q = B.cols();
  Tensor out({m, p + q});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(&A[i * p], p, &out[i * (p + q)]);
    std::copy_n(&B[i * q], q, &out[i * (p + q) + p]);
  }
  return detail::make_result(std::move(out), {a, b}, [m, p, q](Node& self) {
    const Tensor& g = self.grad;
    if (self.inputs[0]->requires_grad) {
      Tensor& ga = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * (p + q) + j];
    }
    if (self.inputs[1]->requires_grad) {
      Tensor& gb = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * (p + q) + p + j];
    }
  });
}

// Embedding lookup: row `indices[b]` of table[V, e] for each b.
inline Var gather_rows(const Var& table, std::span<const int> indices) {
  const Tensor& T = table.value();
  detail::require_rank2(T, "gather_rows");
  const std::size_t vocab = T.rows(), e = T.cols();
  Tensor out({indices.size(), e});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] < 0 || static_cast<std::size_t>(indices[b]) >= vocab) {
      throw InvalidInput("gather_rows: index " + std::to_string(indices[b]) + " outside [0, " +
                         std::to_string(vocab) + ")");
    }
    std::copy_n(&T[static_cast<std::size_t>(indices[b]) * e], e, &out[b * e]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return detail::make_result(std::move(out), {table}, [idx = std::move(idx), e](Node& self) {
    Tensor& gt = self.inputs[0]->grad_buffer();
    for (std::size_t b = 0; b < idx.size(); ++b)
      for (std::size_t j = 0; j < e; ++j) gt[static_cast<std::size_t>(idx[b]) * e + j] += self.grad[b * e + j];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var relu(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return detail::make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    const Tensor& in = self.inputs[0]->value;
    for (std::size_t i = 0; i < in.size(); ++i)
      if (in[i] > 0.0) gx[i] += self.grad[i];
  });
}

inline Var tanh(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return detail::make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      gx[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return detail::make_result(std::move(out), {a, b}, [](Node& self) {
    for (int s = 0; s < 2; ++s) {
      if (!self.inputs[s]->requires_grad) continue;
      Tensor& g = self.inputs[s]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return detail::make_result(std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

inline Var scale(const Var& x, double c) {
  Tensor out = x.value();
  for (auto& v : out.values()) v *= c;
  return detail::make_result(std::move(out), {x}, [c](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

inline Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return detail::make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const double up = self.grad[0];
    for (auto& v : g.values()) v += up;
  });
}

inline Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

// Linear combination of scalars: sum_i coeffs[i] * terms[i].
inline Var combine(std::span<const Var> terms, std::span<const double> coeffs) {
  if (terms.size() != coeffs.size() || terms.empty()) throw InvalidInput("combine: mismatched terms");
  Var acc = scale(terms[0], coeffs[0]);
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, scale(terms[i], coeffs[i]));
  return acc;
}

// ---------------------------------------------------------------------------
// Softmax family

namespace detail {

// Iterates softmax groups of a tensor along `axis`: calls fn(offset, stride, len).
template <typename Fn>
void for_each_group(const Tensor& t, int axis, Fn&& fn) {
  if (t.rank() <= 1) {
    fn(std::size_t{0}, std::size_t{1}, t.size());
    return;
  }
  if (t.rank() != 2 || (axis != 0 && axis != 1)) {
    throw InvalidInput("softmax: unsupported axis " + std::to_string(axis) + " for shape " + shape_str(t.shape()));
  }
  const std::size_t m = t.rows(), n = t.cols();
  if (axis == 1) {
    for (std::size_t i = 0; i < m; ++i) fn(i * n, std::size_t{1}, n);
  } else {
    for (std::size_t j = 0; j < n; ++j) fn(j, n, m);
  }
}

inline void log_softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(in[j] - mx);
  const double lse = mx + std::log(s);
  for (std::size_t j = 0; j < n; ++j) out[j] = in[j] - lse;
}

}  // namespace detail

// Max-subtracted softmax along `axis` (1 = per row).
inline Var softmax(const Var& logits, int axis = 1) {
  const Tensor& X = logits.value();
  Tensor out(X.shape());
  detail::for_each_group(X, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
    double mx = X[off];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, X[off + j * stride]);
    double s = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double e = std::exp(X[off + j * stride] - mx);
      out[off + j * stride] = e;
      s += e;
    }
    for (std::size_t j = 0; j < len; ++j) out[off + j * stride] /= s;
  });
  return detail::make_result(std::move(out), {logits}, [axis](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    const Tensor& y = self.value;
    const Tensor& g = self.grad;
    detail::for_each_group(y, axis, [&](std::size_t off, std::size_t stride, std::size_t len) {
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += g[off + j * stride] * y[off + j * stride];
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t i = off + j * stride;
        gx[i] += y[i] * (g[i] - dot);
      }
    });
  });
}

inline Var log_softmax(const Var& logits) {
  const Tensor& X = logits.value();
  detail::require_rank2(X, "log_softmax");
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out(X.shape());
  for (std::size_t i = 0; i < m; ++i) detail::log_softmax_row(&X[i * n], &out[i * n], n);
  return detail::make_result(std::move(out), {logits}, [m, n](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
    }
  });
}

// Per-row KL(p_b || q_b) for probability rows. Entries with p == 0 contribute
// 0; q is floored at kProbFloor before the logarithm.
inline Var kl_rows(const Var& p, const Var& q) {
  require_same_shape(p, q, "kl_rows");
  const Tensor& P = p.value();
  const Tensor& Q = q.value();
  const std::size_t m = P.rows(), n = P.cols();
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double pv = P[i * n + j];
      if (pv > 0.0) s += pv * (std::log(pv) - std::log(std::max(Q[i * n + j], kProbFloor)));
    }
    out[i] = s;
  }
  return detail::make_result(std::move(out), {p, q}, [m, n](Node& self) {
    Node& np = *self.inputs[0];
    Node& nq = *self.inputs[1];
    for (std::size_t i = 0; i < m; ++i) {
      const double up = self.grad[i];
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        const double pv = np.value[k];
        const double qv = nq.value[k];
        if (np.requires_grad) {
          np.grad_buffer()[k] +=
              up * (std::log(std::max(pv, kProbFloor)) + 1.0 - std::log(std::max(qv, kProbFloor)));
        }
        if (nq.requires_grad && qv >= kProbFloor) nq.grad_buffer()[k] -= up * pv / qv;
      }
    }
  });
}

// Per-row -log softmax(logits)[label].
inline Var cross_entropy_rows(const Var& logits, std::span<const int> labels) {
  const Tensor& X = logits.value();
  detail::require_rank2(X, "cross_entropy");
  const std::size_t m = X.rows(), n = X.cols();
  if (labels.size() != m) {
    throw InvalidInput("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(m) +
                       " rows");
  }
  std::vector<double> logp(m * n);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n) {
      throw InvalidInput("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                         std::to_string(n) + ")");
    }
    detail::log_softmax_row(&X[i * n], &logp[i * n], n);
    out[i] = -logp[i * n + static_cast<std::size_t>(labels[i])];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return detail::make_result(std::move(out), {logits},
                             [m, n, lab = std::move(lab), logp = std::move(logp)](Node& self) {
                               Tensor& gx = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < m; ++i) {
                                 const double up = self.grad[i];
                                 for (std::size_t j = 0; j < n; ++j) {
                                   const double target = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                                   gx[i * n + j] += up * (std::exp(logp[i * n + j]) - target);
                                 }
                               }
                             });
}

// (1/B) * sum_b w_b * rows_b
inline Var weighted_mean(const Var& rows, std::span<const double> weights) {
  const std::size_t m = rows.value().size();
  if (weights.size() != m) throw InvalidInput("weighted_mean: weight count differs from row count");
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) s += weights[i] * rows.value()[i];
  std::vector<double> w(weights.begin(), weights.end());
  return detail::make_result(Tensor::scalar(s / static_cast<double>(m)), {rows}, [w = std::move(w)](Node& self) {
    Tensor& g = self.inputs[0]->grad_buffer();
    const double up = self.grad[0] / static_cast<double>(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] += up * w[i];
  });
}

// Batch-mean KL divergence between probability rows.
inline Var kl_divergence(const Var& p, const Var& q) { return mean(kl_rows(p, q)); }

// Batch-mean cross-entropy of raw logits against integer labels.
inline Var cross_entropy(const Var& logits, std::span<const int> labels) {
  return mean(cross_entropy_rows(logits, labels));
}

// Diversity penalty over a generated batch x[Q, d] with its noise z[Q, dz]:
//   exp( (1/Q^2) * sum_{i,j} -|x_i - x_j| * |z_i - z_j| )
// Gradients flow to x only.
inline Var diversity_loss(const Var& x, const Tensor& z) {
  const Tensor& X = x.value();
  detail::require_rank2(X, "diversity_loss");
  const std::size_t q = X.rows(), d = X.cols();
  if (z.rows() != q) throw InvalidInput("diversity_loss: noise rows differ from sample rows");
  const std::size_t dz = z.cols();
  std::vector<double> xdist(q * q, 0.0), zdist(q * q, 0.0);
  double expo = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = i + 1; j < q; ++j) {
      double sx = 0.0, sz = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = X[i * d + c] - X[j * d + c];
        sx += t * t;
      }
      for (std::size_t c = 0; c < dz; ++c) {
        const double t = z[i * dz + c] - z[j * dz + c];
        sz += t * t;
      }
      xdist[i * q + j] = xdist[j * q + i] = std::sqrt(sx);
      zdist[i * q + j] = zdist[j * q + i] = std::sqrt(sz);
      expo -= 2.0 * xdist[i * q + j] * zdist[i * q + j];
    }
  }
  const double inv = 1.0 / static_cast<double>(q * q);
  const double value = std::exp(expo * inv);
  return detail::make_result(
      Tensor::scalar(value), {x},
      [q, d, inv, xdist = std::move(xdist), zdist = std::move(zdist)](Node& self) {
        Tensor& gx = self.inputs[0]->grad_buffer();
        const Tensor& X = self.inputs[0]->value;
        const double up = self.grad[0] * self.value[0] * inv;
        for (std::size_t i = 0; i < q; ++i) {
          for (std::size_t j = 0; j < q; ++j) {
            const double dx = xdist[i * q + j];
            if (i == j || dx == 0.0) continue;
            // Both ordered pairs (i, j) and (j, i) carry this term.
            const double coef = -2.0 * up * zdist[i * q + j] / dx;
            for (std::size_t c = 0; c < d; ++c) gx[i * d + c] += coef * (X[i * d + c] - X[j * d + c]);
          }
        }
      });
}

}  // namespace disue::nn
