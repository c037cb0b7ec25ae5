#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "segfuse/tensor.hpp"

namespace segfuse {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

inline double stable_softplus(double x) {
  // softplus(x) = max(x, 0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_op(a.shape(), std::move(out), {a, b},
                         [](detail::TensorNode& self) {
                           for (int k = 0; k < 2; ++k) {
                             auto& p = self.parents[k];
                             if (!p->requires_grad) continue;
                             p->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               p->grad[i] += self.grad[i];
                           }
                         });
}

inline Tensor subtract(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "subtract");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return detail::make_op(a.shape(), std::move(out), {a, b},
                         [](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pb = self.parents[1];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa->grad[i] += self.grad[i];
                           }
                           if (pb->requires_grad) {
                             pb->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pb->grad[i] -= self.grad[i];
                           }
                         });
}

inline Tensor multiply(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "multiply");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_op(a.shape(), std::move(out), {a, b},
                         [](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pb = self.parents[1];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa->grad[i] += self.grad[i] * pb->values[i];
                           }
                           if (pb->requires_grad) {
                             pb->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pb->grad[i] += self.grad[i] * pa->values[i];
                           }
                         });
}

inline Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i];
                         });
}

inline Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return detail::make_op(a.shape(), std::move(out), {a},
                         [c](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i] * c;
                         });
}

/// Broadcast multiply by a one-element tensor (keeps the scalar in the graph).
inline Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s) {
  if (s.size() != 1)
    throw DimensionError("mul_scalar_tensor: scale must have one element, got " +
                         shape_str(s.shape()));
  const double c = s.values()[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return detail::make_op(a.shape(), std::move(out), {a, s},
                         [](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& ps = self.parents[1];
                           const double c = ps->values[0];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa->grad[i] += self.grad[i] * c;
                           }
                           if (ps->requires_grad) {
                             ps->ensure_grad();
                             double acc = 0.0;
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               acc += self.grad[i] * pa->values[i];
                             ps->grad[0] += acc;
                           }
                         });
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::min(std::max(a.values()[i], lo), hi);
  return detail::make_op(a.shape(), std::move(out), {a},
                         [lo, hi](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double x = p->values[i];
                             if (x > lo && x < hi) p->grad[i] += self.grad[i];
                           }
                         });
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

inline Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(a.values()[i]);
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             const double y = self.values[i];
                             p->grad[i] += self.grad[i] * y * (1.0 - y);
                           }
                         });
}

inline Tensor softplus(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(a.values()[i]);
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i] * stable_sigmoid(p->values[i]);
                         });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.values()[i], 0.0);
  return detail::make_op(a.shape(), std::move(out), {a},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             if (p->values[i] > 0.0) p->grad[i] += self.grad[i];
                         });
}

/// Softmax along an arbitrary axis, max-subtracted for stability.
inline Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw DimensionError("softmax: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(a.shape()));
  const Shape& shape = a.shape();
  const std::size_t dim = shape[axis];
  if (dim < 1) throw DimensionError("softmax: empty axis");
  std::size_t inner = 1, outer = 1;
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];

  std::vector<double> out(a.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * dim * inner + in;
      double mx = a.values()[base];
      for (std::size_t d = 1; d < dim; ++d)
        mx = std::max(mx, a.values()[base + d * inner]);
      double sum = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double e = std::exp(a.values()[base + d * inner] - mx);
        out[base + d * inner] = e;
        sum += e;
      }
      for (std::size_t d = 0; d < dim; ++d) out[base + d * inner] /= sum;
    }
  }
  return detail::make_op(
      a.shape(), std::move(out), {a},
      [dim, inner, outer](detail::TensorNode& self) {
        auto& p = self.parents[0];
        p->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * dim * inner + in;
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
              const std::size_t idx = base + d * inner;
              dot += self.grad[idx] * self.values[idx];
            }
            for (std::size_t d = 0; d < dim; ++d) {
              const std::size_t idx = base + d * inner;
              p->grad[idx] += self.values[idx] * (self.grad[idx] - dot);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul: expected rank-2 operands, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw DimensionError("matmul: inner dimensions disagree, " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      const double* brow = bv + kk * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return detail::make_op(
      {m, n}, std::move(out), {a, b},
      [m, k, n](detail::TensorNode& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const double* g = self.grad.data();
        if (pa->requires_grad) {
          pa->ensure_grad();
          const double* bv = pb->values.data();
          // dA = G * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              double acc = 0.0;
              const double* grow = g + i * n;
              const double* brow = bv + kk * n;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              pa->grad[i * k + kk] += acc;
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          const double* av = pa->values.data();
          // dB = A^T * G
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const double aik = av[i * k + kk];
              const double* grow = g + i * n;
              double* brow = pb->grad.data() + kk * n;
              for (std::size_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
            }
        }
      });
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose: expected rank-2, got " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  return detail::make_op({n, m}, std::move(out), {a},
                         [m, n](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j)
                               p->grad[i * n + j] += self.grad[j * m + i];
                         });
}

// ---------------------------------------------------------------------------
// broadcasting helpers
// ---------------------------------------------------------------------------

/// out[i, j] = a[i, j] + v[j]
inline Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  if (a.rank() != 2 || v.size() != a.shape()[1])
    throw DimensionError("add_rowvec: " + shape_str(a.shape()) + " vs " +
                         shape_str(v.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = a.values()[i * n + j] + v.values()[j];
  return detail::make_op(a.shape(), std::move(out), {a, v},
                         [m, n](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pv = self.parents[1];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < self.grad.size(); ++i)
                               pa->grad[i] += self.grad[i];
                           }
                           if (pv->requires_grad) {
                             pv->ensure_grad();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 pv->grad[j] += self.grad[i * n + j];
                           }
                         });
}

/// out[i, j] = a[i, j] * s[i]
inline Tensor scale_rows(const Tensor& a, const Tensor& s) {
  if (a.rank() != 2 || s.size() != a.shape()[0])
    throw DimensionError("scale_rows: " + shape_str(a.shape()) + " vs " +
                         shape_str(s.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i * n + j] = a.values()[i * n + j] * s.values()[i];
  return detail::make_op(a.shape(), std::move(out), {a, s},
                         [m, n](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& ps = self.parents[1];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 pa->grad[i * n + j] +=
                                     self.grad[i * n + j] * ps->values[i];
                           }
                           if (ps->requires_grad) {
                             ps->ensure_grad();
                             for (std::size_t i = 0; i < m; ++i) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < n; ++j)
                                 acc += self.grad[i * n + j] * pa->values[i * n + j];
                               ps->grad[i] += acc;
                             }
                           }
                         });
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  std::vector<double> out = a.values();
  return detail::make_op(std::move(shape), std::move(out), {a},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i];
                         });
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1])
    throw DimensionError("concat_rows: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const std::size_t n = a.shape()[1];
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t split = a.size();
  return detail::make_op({a.shape()[0] + b.shape()[0], n}, std::move(out), {a, b},
                         [split](detail::TensorNode& self) {
                           auto& pa = self.parents[0];
                           auto& pb = self.parents[1];
                           if (pa->requires_grad) {
                             pa->ensure_grad();
                             for (std::size_t i = 0; i < split; ++i)
                               pa->grad[i] += self.grad[i];
                           }
                           if (pb->requires_grad) {
                             pb->ensure_grad();
                             for (std::size_t i = split; i < self.grad.size(); ++i)
                               pb->grad[i - split] += self.grad[i];
                           }
                         });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidInputError("concat_cols: no tensors given");
  const std::size_t m = parts[0].shape()[0];
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.shape()[0] != m)
      throw DimensionError("concat_cols: row counts disagree");
    total += t.shape()[1];
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  std::vector<std::size_t> widths;
  for (const Tensor& t : parts) {
    const std::size_t w = t.shape()[1];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[i * total + offset + j] = t.values()[i * w + j];
    widths.push_back(w);
    offset += w;
  }
  return detail::make_op(
      {m, total}, std::move(out), parts,
      [m, total, widths](detail::TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          auto& p = self.parents[k];
          const std::size_t w = widths[k];
          if (p->requires_grad) {
            p->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < w; ++j)
                p->grad[i * w + j] += self.grad[i * total + off + j];
          }
          off += w;
        }
      });
}

inline Tensor slice_rows(const Tensor& a, std::size_t r0, std::size_t r1) {
  if (a.rank() != 2 || r0 > r1 || r1 > a.shape()[0])
    throw DimensionError("slice_rows: invalid range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") for " + shape_str(a.shape()));
  const std::size_t n = a.shape()[1];
  std::vector<double> out(a.values().begin() + r0 * n, a.values().begin() + r1 * n);
  return detail::make_op({r1 - r0, n}, std::move(out), {a},
                         [r0, n](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[r0 * n + i] += self.grad[i];
                         });
}

inline Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (a.rank() != 2 || c0 > c1 || c1 > a.shape()[1])
    throw DimensionError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") for " + shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1], w = c1 - c0;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.values()[i * n + c0 + j];
  return detail::make_op({m, w}, std::move(out), {a},
                         [m, n, c0, w](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                               p->grad[i * n + c0 + j] += self.grad[i * w + j];
                         });
}

inline Tensor select_row(const Tensor& a, std::size_t row) {
  return slice_rows(a, row, row + 1);
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

inline Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (const double v : a.values()) acc += v;
  return detail::make_op({1}, {acc}, {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0];
  });
}

inline Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw InvalidInputError("mean_all: empty tensor");
  double acc = 0.0;
  for (const double v : a.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  return detail::make_op({1}, {acc * inv}, {a}, [inv](detail::TensorNode& self) {
    auto& p = self.parents[0];
    p->ensure_grad();
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0] * inv;
  });
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

/// LayerNorm over the last axis of a rank-2 tensor with learnable affine.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  if (x.rank() != 2)
    throw DimensionError("layer_norm: expected rank-2 input, got " +
                         shape_str(x.shape()));
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  if (gamma.size() != n || beta.size() != n)
    throw DimensionError("layer_norm: affine parameters must have length " +
                         std::to_string(n));
  std::vector<double> out(x.size());
  std::vector<double> inv_std(m), mean(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x.values()[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = x.values()[i * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    mean[i] = mu;
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xhat = (x.values()[i * n + j] - mu) * is;
      out[i * n + j] = xhat * gamma.values()[j] + beta.values()[j];
    }
  }
  return detail::make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [m, n, mean, inv_std](detail::TensorNode& self) {
        auto& px = self.parents[0];
        auto& pg = self.parents[1];
        auto& pb = self.parents[2];
        for (std::size_t i = 0; i < m; ++i) {
          const double mu = mean[i], is = inv_std[i];
          // Recover xhat from the input row.
          double sum_gg = 0.0, sum_ggx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double xhat = (px->values[i * n + j] - mu) * is;
            const double gg = self.grad[i * n + j] * pg->values[j];
            sum_gg += gg;
            sum_ggx += gg * xhat;
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) pb->grad[j] += self.grad[i * n + j];
          }
          if (pg->requires_grad) {
            pg->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) {
              const double xhat = (px->values[i * n + j] - mu) * is;
              pg->grad[j] += self.grad[i * n + j] * xhat;
            }
          }
          if (px->requires_grad) {
            px->ensure_grad();
            const double invn = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              const double xhat = (px->values[i * n + j] - mu) * is;
              const double gg = self.grad[i * n + j] * pg->values[j];
              px->grad[i * n + j] +=
                  is * (gg - invn * sum_gg - xhat * invn * sum_ggx);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

/// Mean smooth-L1 (Huber) loss: 0.5 d^2 / beta for |d| < beta, |d| - 0.5 beta
/// otherwise, with d = pred - target.
inline Tensor smooth_l1_loss(const Tensor& pred, const Tensor& target, double beta = 1.0) {
  check_same_shape(pred, target, "smooth_l1_loss");
  if (beta <= 0.0) throw InvalidInputError("smooth_l1_loss: beta must be positive");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.values()[i] - target.values()[i];
    acc += std::abs(d) < beta ? 0.5 * d * d / beta : std::abs(d) - 0.5 * beta;
  }
  const double inv = 1.0 / static_cast<double>(pred.size());
  return detail::make_op(
      {1}, {acc * inv}, {pred, target},
      [beta, inv](detail::TensorNode& self) {
        auto& pp = self.parents[0];
        auto& pt = self.parents[1];
        const double g = self.grad[0] * inv;
        for (std::size_t i = 0; i < pp->values.size(); ++i) {
          const double d = pp->values[i] - pt->values[i];
          const double dd = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
          if (pp->requires_grad) {
            pp->ensure_grad();
            pp->grad[i] += g * dd;
          }
          if (pt->requires_grad) {
            pt->ensure_grad();
            pt->grad[i] -= g * dd;
          }
        }
      });
}

constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross entropy; probabilities are clamped into
/// [kBceEpsilon, 1 - kBceEpsilon] before the logs (no gradient through the clamp).
inline Tensor binary_cross_entropy_loss(const Tensor& prob, const Tensor& target) {
  check_same_shape(prob, target, "binary_cross_entropy_loss");
  if (prob.size() == 0) throw InvalidInputError("binary_cross_entropy_loss: empty input");
  const double lo = kBceEpsilon, hi = 1.0 - kBceEpsilon;
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::min(std::max(prob.values()[i], lo), hi);
    const double t = target.values()[i];
    acc += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  const double inv = 1.0 / static_cast<double>(prob.size());
  return detail::make_op(
      {1}, {acc * inv}, {prob, target},
      [lo, hi, inv](detail::TensorNode& self) {
        auto& pp = self.parents[0];
        auto& pt = self.parents[1];
        const double g = self.grad[0] * inv;
        if (pp->requires_grad) {
          pp->ensure_grad();
          for (std::size_t i = 0; i < pp->values.size(); ++i) {
            const double raw = pp->values[i];
            if (raw <= lo || raw >= hi) continue;  // clamped region
            const double t = pt->values[i];
            pp->grad[i] += g * ((raw - t) / (raw * (1.0 - raw)));
          }
        }
        if (pt->requires_grad) {
          pt->ensure_grad();
          for (std::size_t i = 0; i < pt->values.size(); ++i) {
            const double p = std::min(std::max(pp->values[i], lo), hi);
            pt->grad[i] += g * (std::log(1.0 - p) - std::log(p));
          }
        }
      });
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

inline std::size_t argmax_index(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;  // ties keep the lowest index
  return best;
}

/// Hard one-hot argmax selection whose backward pass is the identity:
/// forward one-hot(argmax s); the one-hot and stop-gradient terms cancel,
/// leaving the scores' own gradient path.
inline Tensor straight_through_select(const Tensor& scores) {
  if (scores.size() < 1)
    throw InvalidInputError("straight_through_select: need at least one score");
  std::vector<double> out(scores.size(), 0.0);
  out[argmax_index(scores.values())] = 1.0;
  return detail::make_op(scores.shape(), std::move(out), {scores},
                         [](detail::TensorNode& self) {
                           auto& p = self.parents[0];
                           p->ensure_grad();
                           for (std::size_t i = 0; i < self.grad.size(); ++i)
                             p->grad[i] += self.grad[i];
                         });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return subtract(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return multiply(a, b); }

}  // namespace segfuse
