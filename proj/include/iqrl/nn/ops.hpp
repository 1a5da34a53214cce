#pragma once

// Differentiable ops over 1-D and 2-D tensors. No implicit broadcasting:
// every op states the shapes it accepts and raises ShapeError otherwise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "iqrl/nn/tape.hpp"

namespace iqrl::nn {

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

inline bool is_vector(const Tensor& t) { return t.rank() == 1; }
inline bool is_matrix(const Tensor& t) { return t.rank() == 2; }

inline bool any_needs_grad(std::initializer_list<Var> vars) {
  for (const Var& v : vars) {
    if (v.needs_grad()) return true;
  }
  return false;
}

inline Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* tape = &vars.begin()->tape();
  for (const Var& v : vars) {
    if (&v.tape() != tape) throw Error("op inputs live on different tapes");
  }
  return *tape;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y[m] += A[m x n] * x[n]
inline void gemv_acc(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = a + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// y[n] += A^T x, A is m x n
inline void gemv_t_acc(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = a + i * n;
    for (std::size_t j = 0; j < n; ++j) y[j] += row[j] * xi;
  }
}

// G[m x n] += u[m] v[n]^T
inline void ger_acc(double* g, const double* u, const double* v, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    double* row = g + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += ui * v[j];
  }
}

}  // namespace detail

/// Numerically stable softmax of a plain vector.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of an empty vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    if (std::isnan(v)) throw Error("softmax input contains NaN");
    if (!std::isfinite(v)) throw Error("softmax input must be finite");
    top = std::max(top, v);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// -ln p[true_class], with p clamped below at 1e-12.
inline double cross_entropy_loss(std::span<const double> probs, std::size_t true_class) {
  if (true_class >= probs.size()) {
    throw Error("cross_entropy_loss: class " + std::to_string(true_class) + " out of range for " +
                std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[true_class], 1e-12));
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  detail::require(a.shape() == b.shape(),
                  "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({a, b}), [ia, ib](Tape& t, std::span<const double> g) {
    for (std::size_t id : {ia, ib}) {
      if (!t.needs_grad(id)) continue;
      auto& dst = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  detail::require(a.shape() == b.shape(),
                  "sub: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({a, b}), [ia, ib](Tape& t, std::span<const double> g) {
    if (t.needs_grad(ia)) {
      auto& dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto& dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
    }
  });
}

/// Hadamard product.
inline Var mul(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  detail::require(a.shape() == b.shape(),
                  "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  Tensor out = a.value();
  const auto& bv = b.value().storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({a, b}), [ia, ib](Tape& t, std::span<const double> g) {
    const auto& av = t.value(ia).storage();
    const auto& bv = t.value(ib).storage();
    if (t.needs_grad(ia)) {
      auto& dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      auto& dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * av[i];
    }
  });
}

inline Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  return a.tape().emit(std::move(out), a.needs_grad(), [ia, factor](Tape& t, std::span<const double> g) {
    auto& dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor;
  });
}

/// 1 - a, elementwise.
inline Var one_minus(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 - v;
  const std::size_t ia = a.id();
  return a.tape().emit(std::move(out), a.needs_grad(), [ia](Tape& t, std::span<const double> g) {
    auto& dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] -= g[i];
  });
}

inline Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = detail::sigmoid(v);
  const std::size_t ia = a.id();
  const std::size_t io = a.tape().size();
  return a.tape().emit(std::move(out), a.needs_grad(), [ia, io](Tape& t, std::span<const double> g) {
    const auto& y = t.value(io).storage();
    auto& dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t ia = a.id();
  const std::size_t io = a.tape().size();
  return a.tape().emit(std::move(out), a.needs_grad(), [ia, io](Tape& t, std::span<const double> g) {
    const auto& y = t.value(io).storage();
    auto& dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

/// Inverted dropout: keeps each unit with probability 1-rate and rescales the
/// survivors by 1/(1-rate). rate == 0 returns the input unchanged.
inline Var dropout(Var a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw Error("dropout rate must lie in [0,1)");
  if (rate == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(a.value().size());
  for (double& m : mask) m = uniform01(rng) >= rate ? keep_scale : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id();
  return a.tape().emit(std::move(out), a.needs_grad(),
                       [ia, mask = std::move(mask)](Tape& t, std::span<const double> g) {
                         auto& dst = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * mask[i];
                       });
}

inline Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t ia = a.id();
  return a.tape().emit(Tensor({1}, std::vector<double>{total}), a.needs_grad(),
                       [ia](Tape& t, std::span<const double> g) {
                         auto& dst = t.grad_buffer(ia);
                         for (double& d : dst) d += g[0];
                       });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// A[m x n] times B[n] -> [m], or A[m x n] times B[n x p] -> [m x p].
inline Var matmul(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require(detail::is_matrix(av), "matmul: left operand must be a matrix, got " + shape_string(av.shape()));
  const std::size_t m = av.rows(), n = av.cols();
  const bool vec = detail::is_vector(bv);
  detail::require(vec || detail::is_matrix(bv), "matmul: right operand must be 1-D or 2-D");
  detail::require(bv.rows() == n, "matmul: inner dimension mismatch " + shape_string(av.shape()) + " x " +
                                      shape_string(bv.shape()));
  const std::size_t p = vec ? 1 : bv.cols();
  Tensor out(vec ? Shape{m} : Shape{m, p});
  const double* A = av.data().data();
  const double* B = bv.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = A[i * n + k];
      for (std::size_t j = 0; j < p; ++j) C[i * p + j] += aik * B[k * p + j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({a, b}),
                   [ia, ib, m, n, p](Tape& t, std::span<const double> g) {
                     const double* A = t.value(ia).data().data();
                     const double* B = t.value(ib).data().data();
                     if (t.needs_grad(ia)) {
                       double* dA = t.grad_buffer(ia).data();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t k = 0; k < n; ++k) {
                           double acc = 0.0;
                           for (std::size_t j = 0; j < p; ++j) acc += g[i * p + j] * B[k * p + j];
                           dA[i * n + k] += acc;
                         }
                     }
                     if (t.needs_grad(ib)) {
                       double* dB = t.grad_buffer(ib).data();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t k = 0; k < n; ++k) {
                           const double aik = A[i * n + k];
                           for (std::size_t j = 0; j < p; ++j) dB[k * p + j] += aik * g[i * p + j];
                         }
                     }
                   });
}

inline Var transpose(Var a) {
  const Tensor& av = a.value();
  detail::require(detail::is_matrix(av), "transpose: expected a matrix, got " + shape_string(av.shape()));
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  const std::size_t ia = a.id();
  return a.tape().emit(std::move(out), a.needs_grad(), [ia, r, c](Tape& t, std::span<const double> g) {
    auto& dst = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += g[j * r + i];
  });
}

/// Dense layer applied to every row: X W^T + b. X is [K x n] or [n], W is
/// [m x n], b is [m]; the result is [K x m] or [m].
inline Var linear_rows(Var x, Var w, Var b) {
  Tape& tape = detail::same_tape({x, w, b});
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  detail::require(detail::is_matrix(wv), "linear_rows: weight must be a matrix");
  const std::size_t m = wv.rows(), n = wv.cols();
  detail::require(detail::is_vector(bv) && bv.size() == m,
                  "linear_rows: bias shape " + shape_string(bv.shape()) + " does not match weight " +
                      shape_string(wv.shape()));
  const bool vec = detail::is_vector(xv);
  detail::require((vec && xv.size() == n) || (detail::is_matrix(xv) && xv.cols() == n),
                  "linear_rows: input " + shape_string(xv.shape()) + " incompatible with weight " +
                      shape_string(wv.shape()));
  const std::size_t k = vec ? 1 : xv.rows();
  Tensor out(vec ? Shape{m} : Shape{k, m});
  for (std::size_t r = 0; r < k; ++r) {
    double* y = out.data().data() + r * m;
    std::copy(bv.data().begin(), bv.data().end(), y);
    detail::gemv_acc(wv.data().data(), xv.data().data() + r * n, y, m, n);
  }
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({x, w, b}),
                   [ix, iw, ib, k, m, n](Tape& t, std::span<const double> g) {
                     const double* X = t.value(ix).data().data();
                     const double* W = t.value(iw).data().data();
                     if (t.needs_grad(ix)) {
                       double* dX = t.grad_buffer(ix).data();
                       for (std::size_t r = 0; r < k; ++r) detail::gemv_t_acc(W, g.data() + r * m, dX + r * n, m, n);
                     }
                     if (t.needs_grad(iw)) {
                       double* dW = t.grad_buffer(iw).data();
                       for (std::size_t r = 0; r < k; ++r) detail::ger_acc(dW, g.data() + r * m, X + r * n, m, n);
                     }
                     if (t.needs_grad(ib)) {
                       double* db = t.grad_buffer(ib).data();
                       for (std::size_t r = 0; r < k; ++r)
                         for (std::size_t i = 0; i < m; ++i) db[i] += g[r * m + i];
                     }
                   });
}

// ---------------------------------------------------------------------------
// Structural

/// Concatenates 1-D tensors.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Tape& tape = parts.front().tape();
  std::vector<double> data;
  std::vector<std::size_t> ids, offsets;
  bool needs = false;
  for (const Var& p : parts) {
    detail::require(detail::is_vector(p.value()), "concat: parts must be 1-D, got " + shape_string(p.shape()));
    offsets.push_back(data.size());
    ids.push_back(p.id());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    needs = needs || p.needs_grad();
  }
  const std::size_t n = data.size();
  return tape.emit(Tensor({n}, std::move(data)), needs, [ids, offsets](Tape& t, std::span<const double> g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.needs_grad(ids[i])) continue;
      auto& dst = t.grad_buffer(ids[i]);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[offsets[i] + k];
    }
  });
}

/// Joins two matrices with equal row counts side by side.
inline Var hconcat(Var a, Var b) {
  Tape& tape = detail::same_tape({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require(detail::is_matrix(av) && detail::is_matrix(bv) && av.rows() == bv.rows(),
                  "hconcat: incompatible shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data().data() + r * ca, ca, out.data().data() + r * (ca + cb));
    std::copy_n(bv.data().data() + r * cb, cb, out.data().data() + r * (ca + cb) + ca);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.emit(std::move(out), detail::any_needs_grad({a, b}),
                   [ia, ib, rows, ca, cb](Tape& t, std::span<const double> g) {
                     const std::size_t w = ca + cb;
                     if (t.needs_grad(ia)) {
                       auto& dst = t.grad_buffer(ia);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < ca; ++c) dst[r * ca + c] += g[r * w + c];
                     }
                     if (t.needs_grad(ib)) {
                       auto& dst = t.grad_buffer(ib);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cb; ++c) dst[r * cb + c] += g[r * w + ca + c];
                     }
                   });
}

/// Stacks 1-D vectors (one row each) and/or matrices (their rows) into one
/// matrix. All parts must share the column count.
inline Var stack_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("stack_rows of zero tensors");
  Tape& tape = parts.front().tape();
  const Tensor& first = parts.front().value();
  const std::size_t cols = detail::is_vector(first) ? first.size() : first.cols();
  std::vector<double> data;
  std::vector<std::size_t> ids, offsets;
  bool needs = false;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t c = detail::is_vector(v) ? v.size() : v.cols();
    detail::require(v.rank() <= 2 && c == cols, "stack_rows: part " + shape_string(v.shape()) +
                                                    " does not have " + std::to_string(cols) + " columns");
    offsets.push_back(data.size());
    ids.push_back(p.id());
    data.insert(data.end(), v.data().begin(), v.data().end());
    needs = needs || p.needs_grad();
  }
  const std::size_t rows = data.size() / cols;
  return tape.emit(Tensor({rows, cols}, std::move(data)), needs, [ids, offsets](Tape& t, std::span<const double> g) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.needs_grad(ids[i])) continue;
      auto& dst = t.grad_buffer(ids[i]);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[offsets[i] + k];
    }
  });
}

/// Rows [begin, end) of a matrix.
inline Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  detail::require(detail::is_matrix(av), "slice_rows: expected a matrix");
  detail::require(begin < end && end <= av.rows(), "slice_rows: bad range [" + std::to_string(begin) + "," +
                                                       std::to_string(end) + ") for " + shape_string(av.shape()));
  const std::size_t cols = av.cols();
  std::vector<double> data(av.data().begin() + begin * cols, av.data().begin() + end * cols);
  const std::size_t ia = a.id();
  return a.tape().emit(Tensor({end - begin, cols}, std::move(data)), a.needs_grad(),
                       [ia, begin, cols](Tape& t, std::span<const double> g) {
                         auto& dst = t.grad_buffer(ia);
                         for (std::size_t k = 0; k < g.size(); ++k) dst[begin * cols + k] += g[k];
                       });
}

/// Row i of a matrix as a 1-D tensor.
inline Var row(Var a, std::size_t i) {
  const Tensor& av = a.value();
  detail::require(detail::is_matrix(av) && i < av.rows(), "row: index " + std::to_string(i) + " out of range for " +
                                                              shape_string(av.shape()));
  const std::size_t cols = av.cols();
  std::vector<double> data(av.data().begin() + i * cols, av.data().begin() + (i + 1) * cols);
  const std::size_t ia = a.id();
  return a.tape().emit(Tensor({cols}, std::move(data)), a.needs_grad(),
                       [ia, i, cols](Tape& t, std::span<const double> g) {
                         auto& dst = t.grad_buffer(ia);
                         for (std::size_t k = 0; k < cols; ++k) dst[i * cols + k] += g[k];
                       });
}

/// Rows of an embedding table selected by id.
inline Var embedding(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  detail::require(detail::is_matrix(tv), "embedding: table must be a matrix");
  if (ids.empty()) throw ShapeError("embedding: empty id sequence");
  const std::size_t vocab = tv.rows(), dim = tv.cols();
  Tensor out({ids.size(), dim});
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= vocab) {
      throw Error("embedding: token id " + std::to_string(ids[k]) + " out of range for vocabulary of " +
                  std::to_string(vocab));
    }
    std::copy_n(tv.data().data() + ids[k] * dim, dim, out.data().data() + k * dim);
  }
  const std::size_t it = table.id();
  return table.tape().emit(std::move(out), table.needs_grad(),
                           [it, dim, ids = std::vector<std::size_t>(ids.begin(), ids.end())](
                               Tape& t, std::span<const double> g) {
                             auto& dst = t.grad_buffer(it);
                             for (std::size_t k = 0; k < ids.size(); ++k)
                               for (std::size_t c = 0; c < dim; ++c) dst[ids[k] * dim + c] += g[k * dim + c];
                           });
}

// ---------------------------------------------------------------------------
// Probabilistic heads

/// Differentiable softmax over a 1-D tensor.
inline Var softmax(Var logits) {
  detail::require(detail::is_vector(logits.value()), "softmax: expected a 1-D tensor");
  std::vector<double> probs = softmax(logits.value().data());
  const std::size_t n = probs.size();
  const std::size_t il = logits.id();
  Var out = logits.tape().emit(Tensor({n}, probs), logits.needs_grad(),
                               [il, probs](Tape& t, std::span<const double> g) {
                                 double dot = 0.0;
                                 for (std::size_t i = 0; i < probs.size(); ++i) dot += g[i] * probs[i];
                                 auto& dst = t.grad_buffer(il);
                                 for (std::size_t i = 0; i < probs.size(); ++i) dst[i] += probs[i] * (g[i] - dot);
                               });
  return out;
}

namespace detail {

// log-sum-exp(l) - l[c] and the matching probability row.
inline double softmax_ce_row(const double* logits, std::size_t classes, std::size_t target, double* probs) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < classes; ++i) {
    if (!std::isfinite(logits[i])) throw Error("softmax_cross_entropy: non-finite logit");
    top = std::max(top, logits[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < classes; ++i) {
    probs[i] = std::exp(logits[i] - top);
    total += probs[i];
  }
  for (std::size_t i = 0; i < classes; ++i) probs[i] /= total;
  return std::log(total) + top - logits[target];
}

}  // namespace detail

/// Fused softmax + cross entropy for a 1-D logit vector.
inline Var softmax_cross_entropy(Var logits, std::size_t target) {
  const Tensor& lv = logits.value();
  detail::require(detail::is_vector(lv), "softmax_cross_entropy: expected 1-D logits");
  if (target >= lv.size()) {
    throw Error("softmax_cross_entropy: class " + std::to_string(target) + " out of range for " +
                std::to_string(lv.size()) + " classes");
  }
  std::vector<double> probs(lv.size());
  const double loss = detail::softmax_ce_row(lv.data().data(), lv.size(), target, probs.data());
  const std::size_t il = logits.id();
  return logits.tape().emit(Tensor({1}, std::vector<double>{loss}), logits.needs_grad(),
                            [il, target, probs](Tape& t, std::span<const double> g) {
                              auto& dst = t.grad_buffer(il);
                              for (std::size_t i = 0; i < probs.size(); ++i)
                                dst[i] += g[0] * (probs[i] - (i == target ? 1.0 : 0.0));
                            });
}

/// Summed softmax cross entropy over the rows of a [T x C] logit matrix.
/// Rows whose target is negative are unlabeled and contribute nothing.
inline Var softmax_cross_entropy_rows(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  detail::require(detail::is_matrix(lv), "softmax_cross_entropy_rows: expected a matrix");
  detail::require(targets.size() == lv.rows(), "softmax_cross_entropy_rows: " + std::to_string(targets.size()) +
                                                   " targets for " + std::to_string(lv.rows()) + " rows");
  const std::size_t rows = lv.rows(), classes = lv.cols();
  std::vector<double> probs(rows * classes, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= classes) {
      throw Error("softmax_cross_entropy_rows: class " + std::to_string(targets[r]) + " out of range");
    }
    loss += detail::softmax_ce_row(lv.data().data() + r * classes, classes, static_cast<std::size_t>(targets[r]),
                                   probs.data() + r * classes);
  }
  const std::size_t il = logits.id();
  return logits.tape().emit(
      Tensor({1}, std::vector<double>{loss}), logits.needs_grad(),
      [il, classes, probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end())](
          Tape& t, std::span<const double> g) {
        auto& dst = t.grad_buffer(il);
        for (std::size_t r = 0; r < tg.size(); ++r) {
          if (tg[r] < 0) continue;
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<int>(c) == tg[r] ? 1.0 : 0.0;
            dst[r * classes + c] += g[0] * (probs[r * classes + c] - onehot);
          }
        }
      });
}

}  // namespace iqrl::nn
