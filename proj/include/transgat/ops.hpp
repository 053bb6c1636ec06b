#pragma once

// Differentiable ops over Tensor. Everything is rank <= 2; rank-1 inputs are
// treated as column vectors. Each op records a backward rule only when some
// input requires a gradient.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgat/tensor.hpp"

namespace transgat::ops {

namespace detail {

template <typename T>
void require_2d(const Tensor<T>& t, const char* op) {
  if (t.rank() < 1 || t.rank() > 2)
    throw std::invalid_argument(std::string(op) + ": expected rank 1 or 2, got " + shape_str(t.shape()));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

template <typename T>
bool any_grad(std::initializer_list<const Tensor<T>*> ts) {
  for (auto* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

template <typename T>
Tensor<T> result(Shape shape, bool requires_grad) {
  return Tensor<T>::zeros(std::move(shape), requires_grad);
}

inline void check_index(std::size_t idx, std::size_t bound, const char* op) {
  if (idx >= bound)
    throw std::out_of_range(std::string(op) + ": index " + std::to_string(idx) + " out of range " +
                            std::to_string(bound));
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  if (b.rows() != q)
    throw std::invalid_argument("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " +
                                shape_str(b.shape()));
  const bool rg = detail::any_grad<T>({&a, &b});
  auto out = detail::result<T>({p, r}, rg);
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const T aik = A[i * q + k];
      if (aik == T(0)) continue;
      for (std::size_t j = 0; j < r; ++j) C[i * r + j] += aik * B[k * r + j];
    }
  if (rg && tape.recording()) {
    tape.record([a, b, out, p, q, r]() mutable {
      auto G = out.grad();
      auto A = a.data();
      auto B = b.data();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            T s = 0;
            for (std::size_t j = 0; j < r; ++j) s += G[i * r + j] * B[k * r + j];
            GA[i * q + k] += s;
          }
      }
      if (b.requires_grad()) {
        auto GB = b.grad();
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            const T aik = A[i * q + k];
            for (std::size_t j = 0; j < r; ++j) GB[k * r + j] += aik * G[i * r + j];
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, Tensor<T> a) {
  detail::require_2d(a, "transpose");
  const std::size_t p = a.rows(), q = a.cols();
  auto out = detail::result<T>({q, p}, a.requires_grad());
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out(j, i) = a(i, j);
  if (a.requires_grad() && tape.recording()) {
    tape.record([a, out, p, q]() mutable {
      auto G = out.grad();
      auto GA = a.grad();
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) GA[i * q + j] += G[j * p + i];
    });
  }
  return out;
}

namespace detail {

// out = alpha*a + beta*b, elementwise.
template <typename T>
Tensor<T> axpby(Tape<T>& tape, Tensor<T> a, Tensor<T> b, T alpha, T beta, const char* op) {
  require_same_shape(a, b, op);
  const bool rg = any_grad<T>({&a, &b});
  auto out = result<T>(a.shape(), rg);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + beta * b[i];
  if (rg && tape.recording()) {
    tape.record([a, b, out, alpha, beta]() mutable {
      auto G = out.grad();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += alpha * G[i];
      }
      if (b.requires_grad()) {
        auto GB = b.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += beta * G[i];
      }
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
  return detail::axpby(tape, std::move(a), std::move(b), T(1), T(1), "add");
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
  return detail::axpby(tape, std::move(a), std::move(b), T(1), T(-1), "sub");
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, Tensor<T> a, T factor) {
  auto out = detail::result<T>(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = factor * a[i];
  if (a.requires_grad() && tape.recording()) {
    tape.record([a, out, factor]() mutable {
      auto G = out.grad();
      auto GA = a.grad();
      for (std::size_t i = 0; i < G.size(); ++i) GA[i] += factor * G[i];
    });
  }
  return out;
}

// x: N x k, bias: k (any rank with k elements). Adds bias to every row.
template <typename T>
Tensor<T> add_bias(Tape<T>& tape, Tensor<T> x, Tensor<T> bias) {
  detail::require_2d(x, "add_bias");
  const std::size_t n = x.rows(), k = x.cols();
  if (bias.size() != k)
    throw std::invalid_argument("add_bias: bias length " + std::to_string(bias.size()) + " != " +
                                std::to_string(k) + " columns");
  const bool rg = detail::any_grad<T>({&x, &bias});
  auto out = detail::result<T>(x.shape(), rg);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out(i, j) = x(i, j) + bias[j];
  if (rg && tape.recording()) {
    tape.record([x, bias, out, n, k]() mutable {
      auto G = out.grad();
      if (x.requires_grad()) {
        auto GX = x.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GX[i] += G[i];
      }
      if (bias.requires_grad()) {
        auto GB = bias.grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) GB[j] += G[i * k + j];
      }
    });
  }
  return out;
}

// Derivative at exactly zero is taken as `slope`.
template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, Tensor<T> x, T slope) {
  auto out = detail::result<T>(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  if (x.requires_grad() && tape.recording()) {
    tape.record([x, out, slope]() mutable {
      auto G = out.grad();
      auto GX = x.grad();
      for (std::size_t i = 0; i < G.size(); ++i) GX[i] += x[i] > T(0) ? G[i] : slope * G[i];
    });
  }
  return out;
}

// Scalar leaky ReLU with the same convention, for forward-only code paths.
template <typename T>
T leaky_relu(T x, T slope) {
  return x > T(0) ? x : slope * x;
}

// Elementwise product of same-shaped tensors.
template <typename T>
Tensor<T> mul(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
  detail::require_same_shape(a, b, "mul");
  const bool rg = detail::any_grad<T>({&a, &b});
  auto out = detail::result<T>(a.shape(), rg);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (rg && tape.recording()) {
    tape.record([a, b, out]() mutable {
      auto G = out.grad();
      if (a.requires_grad()) {
        auto GA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * b[i];
      }
      if (b.requires_grad()) {
        auto GB = b.grad();
        for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * a[i];
      }
    });
  }
  return out;
}

// x: E x d, s: E (or E x 1). Row e of the result is s[e] * x[e].
template <typename T>
Tensor<T> scale_rows(Tape<T>& tape, Tensor<T> x, Tensor<T> s) {
  detail::require_2d(x, "scale_rows");
  const std::size_t e = x.rows(), d = x.cols();
  if (s.size() != e)
    throw std::invalid_argument("scale_rows: " + std::to_string(s.size()) + " scales for " + std::to_string(e) +
                                " rows");
  const bool rg = detail::any_grad<T>({&x, &s});
  auto out = detail::result<T>(x.shape(), rg);
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = s[i] * x(i, j);
  if (rg && tape.recording()) {
    tape.record([x, s, out, e, d]() mutable {
      auto G = out.grad();
      if (x.requires_grad()) {
        auto GX = x.grad();
        for (std::size_t i = 0; i < e; ++i)
          for (std::size_t j = 0; j < d; ++j) GX[i * d + j] += s[i] * G[i * d + j];
      }
      if (s.requires_grad()) {
        auto GS = s.grad();
        for (std::size_t i = 0; i < e; ++i) {
          T acc = 0;
          for (std::size_t j = 0; j < d; ++j) acc += x(i, j) * G[i * d + j];
          GS[i] += acc;
        }
      }
    });
  }
  return out;
}

// Concatenate along the feature (column) axis; all parts share a row count.
template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, std::vector<Tensor<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  bool rg = false;
  for (auto& p : parts) {
    detail::require_2d(p, "concat_cols");
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row count mismatch");
    total += p.cols();
    rg = rg || p.requires_grad();
  }
  auto out = detail::result<T>({n, total}, rg);
  std::size_t off = 0;
  for (auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) out(i, off + j) = p(i, j);
    off += c;
  }
  if (rg && tape.recording()) {
    tape.record([parts, out, n, total]() mutable {
      auto G = out.grad();
      std::size_t off = 0;
      for (auto& p : parts) {
        const std::size_t c = p.cols();
        if (p.requires_grad()) {
          auto GP = p.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) GP[i * c + j] += G[i * total + off + j];
        }
        off += c;
      }
    });
  }
  return out;
}

// out[e] = x[index[e]]
template <typename T>
Tensor<T> gather_rows(Tape<T>& tape, Tensor<T> x, std::vector<std::size_t> index) {
  detail::require_2d(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols();
  for (auto i : index) detail::check_index(i, n, "gather_rows");
  auto out = detail::result<T>({index.size(), d}, x.requires_grad());
  for (std::size_t e = 0; e < index.size(); ++e)
    for (std::size_t j = 0; j < d; ++j) out(e, j) = x(index[e], j);
  if (x.requires_grad() && tape.recording()) {
    tape.record([x, out, index = std::move(index), d]() mutable {
      auto G = out.grad();
      auto GX = x.grad();
      for (std::size_t e = 0; e < index.size(); ++e)
        for (std::size_t j = 0; j < d; ++j) GX[index[e] * d + j] += G[e * d + j];
    });
  }
  return out;
}

// out[index[e]] += x[e]; out has `num_rows` rows.
template <typename T>
Tensor<T> scatter_add_rows(Tape<T>& tape, Tensor<T> x, std::vector<std::size_t> index, std::size_t num_rows) {
  detail::require_2d(x, "scatter_add_rows");
  const std::size_t d = x.cols();
  if (index.size() != x.rows()) throw std::invalid_argument("scatter_add_rows: index length != row count");
  for (auto i : index) detail::check_index(i, num_rows, "scatter_add_rows");
  auto out = detail::result<T>({num_rows, d}, x.requires_grad());
  for (std::size_t e = 0; e < index.size(); ++e)
    for (std::size_t j = 0; j < d; ++j) out(index[e], j) += x(e, j);
  if (x.requires_grad() && tape.recording()) {
    tape.record([x, out, index = std::move(index), d]() mutable {
      auto G = out.grad();
      auto GX = x.grad();
      for (std::size_t e = 0; e < index.size(); ++e)
        for (std::size_t j = 0; j < d; ++j) GX[e * d + j] += G[index[e] * d + j];
    });
  }
  return out;
}

// Softmax within groups of rows sharing a segment id. Columns are independent,
// so an E x H logit matrix normalizes H heads at once.
template <typename T>
Tensor<T> segment_softmax(Tape<T>& tape, Tensor<T> logits, std::vector<std::size_t> segment_of,
                          std::size_t num_segments) {
  detail::require_2d(logits, "segment_softmax");
  const std::size_t e = logits.rows(), h = logits.cols();
  if (segment_of.size() != e) throw std::invalid_argument("segment_softmax: segment list length != row count");
  std::vector<std::size_t> count(num_segments, 0);
  for (auto s : segment_of) {
    detail::check_index(s, num_segments, "segment_softmax");
    ++count[s];
  }
  for (std::size_t s = 0; s < num_segments; ++s)
    if (count[s] == 0) throw std::invalid_argument("segment_softmax: segment " + std::to_string(s) + " is empty");

  auto out = detail::result<T>(logits.shape(), logits.requires_grad());
  std::vector<T> mx(num_segments * h, -std::numeric_limits<T>::infinity());
  std::vector<T> denom(num_segments * h, T(0));
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < h; ++c) {
      T& m = mx[segment_of[i] * h + c];
      m = std::max(m, logits(i, c));
    }
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < h; ++c) {
      const T v = std::exp(logits(i, c) - mx[segment_of[i] * h + c]);
      out(i, c) = v;
      denom[segment_of[i] * h + c] += v;
    }
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < h; ++c) out(i, c) /= denom[segment_of[i] * h + c];

  if (logits.requires_grad() && tape.recording()) {
    tape.record([logits, out, segment_of = std::move(segment_of), num_segments, e, h]() mutable {
      // dL/dl_i = y_i * (g_i - sum_seg g_k y_k)
      auto G = out.grad();
      auto GL = logits.grad();
      std::vector<T> dot(num_segments * h, T(0));
      for (std::size_t i = 0; i < e; ++i)
        for (std::size_t c = 0; c < h; ++c) dot[segment_of[i] * h + c] += G[i * h + c] * out(i, c);
      for (std::size_t i = 0; i < e; ++i)
        for (std::size_t c = 0; c < h; ++c)
          GL[i * h + c] += out(i, c) * (G[i * h + c] - dot[segment_of[i] * h + c]);
    });
  }
  return out;
}

// Row s of the result is the mean of the rows of x assigned to segment s.
template <typename T>
Tensor<T> segment_mean(Tape<T>& tape, Tensor<T> x, std::vector<std::size_t> segment_of, std::size_t num_segments) {
  detail::require_2d(x, "segment_mean");
  const std::size_t n = x.rows(), d = x.cols();
  if (segment_of.size() != n) throw std::invalid_argument("segment_mean: segment list length != row count");
  std::vector<std::size_t> count(num_segments, 0);
  for (auto s : segment_of) {
    detail::check_index(s, num_segments, "segment_mean");
    ++count[s];
  }
  for (std::size_t s = 0; s < num_segments; ++s)
    if (count[s] == 0) throw std::invalid_argument("segment_mean: segment " + std::to_string(s) + " is empty");

  auto out = detail::result<T>({num_segments, d}, x.requires_grad());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(segment_of[i], j) += x(i, j);
  for (std::size_t s = 0; s < num_segments; ++s)
    for (std::size_t j = 0; j < d; ++j) out(s, j) /= static_cast<T>(count[s]);

  if (x.requires_grad() && tape.recording()) {
    tape.record([x, out, segment_of = std::move(segment_of), count = std::move(count), d]() mutable {
      auto G = out.grad();
      auto GX = x.grad();
      for (std::size_t i = 0; i < segment_of.size(); ++i) {
        const T inv = T(1) / static_cast<T>(count[segment_of[i]]);
        for (std::size_t j = 0; j < d; ++j) GX[i * d + j] += G[segment_of[i] * d + j] * inv;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, Tensor<T> x) {
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  auto out = Tensor<T>::scalar(acc, x.requires_grad());
  if (x.requires_grad() && tape.recording()) {
    tape.record([x, out]() mutable {
      const T g = out.grad()[0];
      auto GX = x.grad();
      for (auto& v : GX) v += g;
    });
  }
  return out;
}

// Mean of squared differences over every element.
template <typename T>
Tensor<T> mse(Tape<T>& tape, Tensor<T> pred, Tensor<T> target) {
  detail::require_same_shape(pred, target, "mse");
  if (pred.size() == 0) throw std::invalid_argument("mse: empty input");
  const T inv_n = T(1) / static_cast<T>(pred.size());
  T acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    acc += d * d;
  }
  const bool rg = detail::any_grad<T>({&pred, &target});
  auto out = Tensor<T>::scalar(acc * inv_n, rg);
  if (rg && tape.recording()) {
    tape.record([pred, target, out, inv_n]() mutable {
      const T g = out.grad()[0];
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const T d = T(2) * (pred[i] - target[i]) * inv_n * g;
        if (pred.requires_grad()) pred.grad()[i] += d;
        if (target.requires_grad()) target.grad()[i] -= d;
      }
    });
  }
  return out;
}

}  // namespace transgat::ops
