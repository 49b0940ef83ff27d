#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ces/nd/autodiff.hpp"
#include "ces/nd/random.hpp"

namespace ces::nd {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename T>
void require_matrix(const Var<T>& x, const char* op) {
  if (x.value().rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

// Elementwise unary op whose derivative is expressed through the output.
template <typename T, typename F, typename D>
Var<T> unary(const Var<T>& x, F f, D dfdy) {
  Tensor<T> out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return make_result<T>(std::move(out), {x.node()}, [dfdy](Node<T>& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdy(self.value[i], p.value[i]);
  });
}

}  // namespace detail

// (m×k)·(k×n)
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " · " + shape_string(b.shape()));
  }
  Tensor<T> out({a.value().rows(), b.value().cols()});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.grad_buffer().mat().noalias() += self.grad.mat() * pb.value.mat().transpose();
    if (pb.requires_grad) pb.grad_buffer().mat().noalias() += pa.value.mat().transpose() * self.grad.mat();
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

// Elementwise product.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * s;
  return make_result<T>(std::move(out), {x.node()}, [s](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
  });
}

// x (n×d) + bias (d) broadcast over rows.
template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias) {
  detail::require_matrix(x, "add_bias");
  if (bias.value().rank() != 1 || bias.value().size() != x.value().cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " does not match " + shape_string(x.shape()));
  }
  Tensor<T> out = x.value();
  out.mat().rowwise() += bias.value().mat().row(0);
  return make_result<T>(std::move(out), {x.node(), bias.node()}, [](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) px.grad_buffer().mat() += self.grad.mat();
    if (pb.requires_grad) pb.grad_buffer().mat().row(0) += self.grad.mat().colwise().sum();
  });
}

// Concatenation along the feature (column) axis.
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::string shapes;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_cols");
    shapes += shape_string(p.shape());
    cols += p.value().cols();
  }
  for (const auto& p : parts) {
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row counts differ " + shapes);
  }
  Tensor<T> out({rows, cols});
  std::size_t off = 0;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) {
    const auto c = p.value().cols();
    out.mat().middleCols(off, c) = p.value().mat();
    off += c;
    nodes.push_back(p.node());
  }
  return make_result<T>(std::move(out), std::move(nodes), [](Node<T>& self) {
    std::size_t o = 0;
    for (auto& p : self.parents) {
      const auto c = p->value.cols();
      if (p->requires_grad) p->grad_buffer().mat() += self.grad.mat().middleCols(o, c);
      o += c;
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t start, std::size_t width) {
  detail::require_matrix(x, "slice_cols");
  if (start + width > x.value().cols()) throw ShapeError("slice_cols: range exceeds " + shape_string(x.shape()));
  Tensor<T> out({x.value().rows(), width});
  out.mat() = x.value().mat().middleCols(start, width);
  return make_result<T>(std::move(out), {x.node()}, [start, width](Node<T>& self) {
    self.parents[0]->grad_buffer().mat().middleCols(start, width) += self.grad.mat();
  });
}

// Row i of x as a 1×d matrix.
template <typename T>
Var<T> row(const Var<T>& x, std::size_t i) {
  detail::require_matrix(x, "row");
  if (i >= x.value().rows()) throw ShapeError("row: index out of range for " + shape_string(x.shape()));
  Tensor<T> out({1, x.value().cols()});
  out.mat() = x.value().mat().row(i);
  return make_result<T>(std::move(out), {x.node()}, [i](Node<T>& self) {
    self.parents[0]->grad_buffer().mat().row(i) += self.grad.mat().row(0);
  });
}

// Stacks 1×d rows into an n×d matrix.
template <typename T>
Var<T> stack_rows(const std::vector<Var<T>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t d = rows.front().value().cols();
  Tensor<T> out({rows.size(), d});
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].value().rows() != 1 || rows[i].value().cols() != d) {
      throw ShapeError("stack_rows: row " + std::to_string(i) + " has shape " + shape_string(rows[i].shape()));
    }
    out.mat().row(i) = rows[i].value().mat().row(0);
    nodes.push_back(rows[i].node());
  }
  return make_result<T>(std::move(out), std::move(nodes), [](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      auto& p = *self.parents[i];
      if (p.requires_grad) p.grad_buffer().mat().row(0) += self.grad.mat().row(i);
    }
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(x, [](T v) { return v > T(0) ? v : T(0); },
                       [](T, T in) { return in > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(x, [](T v) { return std::tanh(v); }, [](T y, T) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T y, T) { return y * (T(1) - y); });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = T(0);
  for (auto v : x.value().values()) s += v;
  return make_result<T>(Tensor<T>({1}, std::vector<T>{s}), {x.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
  });
}

namespace detail {

template <typename T>
void softmax_row(const T* in, T* out, std::size_t c) {
  T m = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < c; ++j) m = std::max(m, in[j]);
  T z = T(0);
  for (std::size_t j = 0; j < c; ++j) {
    out[j] = std::exp(in[j] - m);
    z += out[j];
  }
  for (std::size_t j = 0; j < c; ++j) out[j] /= z;
}

template <typename T>
void log_softmax_row(const T* in, T* out, std::size_t c) {
  T m = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < c; ++j) m = std::max(m, in[j]);
  T z = T(0);
  for (std::size_t j = 0; j < c; ++j) z += std::exp(in[j] - m);
  const T lz = m + std::log(z);
  for (std::size_t j = 0; j < c; ++j) out[j] = in[j] - lz;
}

}  // namespace detail

// Row-wise softmax.
template <typename T>
Var<T> softmax(const Var<T>& x) {
  detail::require_matrix(x, "softmax");
  const auto n = x.value().rows();
  const auto c = x.value().cols();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < n; ++i) detail::softmax_row(x.value().data() + i * c, out.data() + i * c, c);
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const auto n = self.value.rows();
    const auto c = self.value.cols();
    for (std::size_t i = 0; i < n; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < c; ++j) dot += self.grad(i, j) * self.value(i, j);
      for (std::size_t j = 0; j < c; ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
    }
  });
}

// Row-wise log-softmax.
template <typename T>
Var<T> log_softmax(const Var<T>& x) {
  detail::require_matrix(x, "log_softmax");
  const auto n = x.value().rows();
  const auto c = x.value().cols();
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < n; ++i) detail::log_softmax_row(x.value().data() + i * c, out.data() + i * c, c);
  return make_result<T>(std::move(out), {x.node()}, [](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    const auto n = self.value.rows();
    const auto c = self.value.cols();
    for (std::size_t i = 0; i < n; ++i) {
      T gsum = T(0);
      for (std::size_t j = 0; j < c; ++j) gsum += self.grad(i, j);
      for (std::size_t j = 0; j < c; ++j) g(i, j) += self.grad(i, j) - std::exp(self.value(i, j)) * gsum;
    }
  });
}

enum class Mode { kTrain, kEval };

// Inverted dropout: in training each element is zeroed with probability rho
// and survivors are scaled by 1/(1-rho); evaluation is the identity.
template <typename T>
Var<T> dropout(const Var<T>& x, double rho, Mode mode, Rng* rng) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("dropout probability must lie in [0, 1), got " + std::to_string(rho));
  }
  if (mode == Mode::kEval || rho == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout in training mode needs an rng");
  const T keep_scale = T(1.0 / (1.0 - rho));
  Tensor<T> mask(x.shape());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng->uniform() < rho ? T(0) : keep_scale;
    out[i] = x.value()[i] * mask[i];
  }
  return make_result<T>(std::move(out), {x.node()}, [mask = std::move(mask)](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

// out[v] = mean of x[u] over u in neighbors[v]; an empty neighborhood gives a
// zero row.
template <typename T>
Var<T> mean_aggregate(const Var<T>& x, const std::vector<std::vector<std::size_t>>& neighbors) {
  detail::require_matrix(x, "mean_aggregate");
  const auto n = x.value().rows();
  if (neighbors.size() != n) {
    throw ShapeError("mean_aggregate: " + std::to_string(neighbors.size()) + " neighbor lists for " +
                     std::to_string(n) + " rows");
  }
  Tensor<T> out(x.shape());
  for (std::size_t v = 0; v < n; ++v) {
    if (neighbors[v].empty()) continue;
    auto r = out.mat().row(v);
    for (auto u : neighbors[v]) {
      if (u >= n) throw ShapeError("mean_aggregate: neighbor index out of range");
      r += x.value().mat().row(u);
    }
    r /= static_cast<T>(neighbors[v].size());
  }
  return make_result<T>(std::move(out), {x.node()}, [neighbors](Node<T>& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t v = 0; v < neighbors.size(); ++v) {
      if (neighbors[v].empty()) continue;
      const T w = T(1) / static_cast<T>(neighbors[v].size());
      for (auto u : neighbors[v]) g.mat().row(u) += w * self.grad.mat().row(v);
    }
  });
}

// One LSTM direction over the rows of x (n×d) with zero initial state.
// w_input is d×4h, w_hidden h×4h, bias 4h; gate blocks are ordered input,
// forget, cell, output. Returns the n×h hidden states in row order; with
// `reverse` the recurrence runs from the last row to the first.
template <typename T>
Var<T> lstm(const Var<T>& x, const Var<T>& w_input, const Var<T>& w_hidden, const Var<T>& bias, bool reverse) {
  detail::require_matrix(x, "lstm");
  detail::require_matrix(w_input, "lstm");
  detail::require_matrix(w_hidden, "lstm");
  const std::size_t n = x.value().rows();
  const std::size_t h = w_hidden.value().rows();
  if (w_input.value().rows() != x.value().cols() || w_input.value().cols() != 4 * h ||
      w_hidden.value().cols() != 4 * h || bias.value().rank() != 1 || bias.value().size() != 4 * h) {
    throw ShapeError("lstm: inconsistent shapes x" + shape_string(x.shape()) + " W_in" +
                     shape_string(w_input.shape()) + " W_h" + shape_string(w_hidden.shape()) + " b" +
                     shape_string(bias.shape()));
  }
  using Mat = RowMatrix<T>;
  Mat gates = x.value().mat() * w_input.value().mat();  // activated gate values after the loop
  gates.rowwise() += bias.value().mat().row(0);
  Mat cell = Mat::Zero(n, h);
  Mat hidden = Mat::Zero(n, h);
  Mat prev_h = Mat::Zero(n, h);  // hidden state fed into each step
  auto sig = [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  };
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    if (k > 0) {
      const std::size_t p = reverse ? t + 1 : t - 1;
      prev_h.row(t) = hidden.row(p);
      gates.row(t).noalias() += prev_h.row(t) * w_hidden.value().mat();
    }
    for (std::size_t j = 0; j < h; ++j) {
      const T i = sig(gates(t, j));
      const T f = sig(gates(t, h + j));
      const T g = std::tanh(gates(t, 2 * h + j));
      const T o = sig(gates(t, 3 * h + j));
      gates(t, j) = i;
      gates(t, h + j) = f;
      gates(t, 2 * h + j) = g;
      gates(t, 3 * h + j) = o;
      const T c_prev = k > 0 ? cell(reverse ? t + 1 : t - 1, j) : T(0);
      cell(t, j) = f * c_prev + i * g;
      hidden(t, j) = o * std::tanh(cell(t, j));
    }
  }
  Tensor<T> out({n, h});
  out.mat() = hidden;
  return make_result<T>(
      std::move(out), {x.node(), w_input.node(), w_hidden.node(), bias.node()},
      [gates = std::move(gates), cell = std::move(cell), prev_h = std::move(prev_h), n, h, reverse](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pwi = *self.parents[1];
        auto& pwh = *self.parents[2];
        auto& pb = *self.parents[3];
        Mat dz(n, 4 * h);
        Mat dh_next = Mat::Zero(1, h);
        std::vector<T> dc_next(h, T(0));
        for (std::size_t k = n; k-- > 0;) {
          const std::size_t t = reverse ? n - 1 - k : k;
          for (std::size_t j = 0; j < h; ++j) {
            const T i = gates(t, j);
            const T f = gates(t, h + j);
            const T g = gates(t, 2 * h + j);
            const T o = gates(t, 3 * h + j);
            const T tc = std::tanh(cell(t, j));
            const T dh = self.grad(t, j) + dh_next(0, j);
            const T dc = dc_next[j] + dh * o * (T(1) - tc * tc);
            const T c_prev = k > 0 ? cell(reverse ? t + 1 : t - 1, j) : T(0);
            dz(t, j) = dc * g * i * (T(1) - i);
            dz(t, h + j) = dc * c_prev * f * (T(1) - f);
            dz(t, 2 * h + j) = dc * i * (T(1) - g * g);
            dz(t, 3 * h + j) = dh * tc * o * (T(1) - o);
            dc_next[j] = dc * f;
          }
          if (k > 0) dh_next.noalias() = dz.row(t) * pwh.value.mat().transpose();
        }
        if (px.requires_grad) px.grad_buffer().mat().noalias() += dz * pwi.value.mat().transpose();
        if (pwi.requires_grad) pwi.grad_buffer().mat().noalias() += px.value.mat().transpose() * dz;
        if (pwh.requires_grad) pwh.grad_buffer().mat().noalias() += prev_h.transpose() * dz;
        if (pb.requires_grad) pb.grad_buffer().mat().row(0) += dz.colwise().sum();
      });
}

// Mean over unmasked rows of -log softmax(logits)[target]. Nonzero entries
// of `include` mark the rows that contribute (empty span = all rows).
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const std::size_t> targets,
                     std::span<const std::uint8_t> include = {}) {
  detail::require_matrix(logits, "cross_entropy");
  const auto n = logits.value().rows();
  const auto c = logits.value().cols();
  if (targets.size() != n) throw ShapeError("cross_entropy: target count does not match rows");
  if (!include.empty() && include.size() != n) throw ShapeError("cross_entropy: mask length does not match rows");
  std::vector<bool> use(n, true);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!include.empty()) use[i] = include[i] != 0;
    if (use[i]) {
      if (targets[i] >= c) throw ShapeError("cross_entropy: target class out of range");
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("cross_entropy: every row is masked");

  Tensor<T> probs(logits.shape());
  std::vector<T> logp(c);
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row_in = logits.value().data() + i * c;
    detail::softmax_row(row_in, probs.data() + i * c, c);
    if (!use[i]) continue;
    detail::log_softmax_row(row_in, logp.data(), c);
    loss -= logp[targets[i]];
  }
  const T inv = T(1) / static_cast<T>(count);
  loss *= inv;
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result<T>(Tensor<T>({1}, std::vector<T>{loss}), {logits.node()},
                        [probs = std::move(probs), tgt = std::move(tgt), use = std::move(use), inv](Node<T>& self) {
                          auto& g = self.parents[0]->grad_buffer();
                          const T gs = self.grad[0] * inv;
                          const auto c = probs.cols();
                          for (std::size_t i = 0; i < use.size(); ++i) {
                            if (!use[i]) continue;
                            for (std::size_t j = 0; j < c; ++j) {
                              g(i, j) += gs * (probs(i, j) - (j == tgt[i] ? T(1) : T(0)));
                            }
                          }
                        });
}

}  // namespace ces::nd
