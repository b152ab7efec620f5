/*
 * Copyright 2026 The DRE Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dre/numerics/ops.hpp"

#include <cmath>
#include <numbers>

#include "dre/numerics/rng.hpp"

namespace dre::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op)
{
  a.value().require_same_shape(b.value(), op);
}

template <typename T>
const Tensor<T>& in(const Node<T>& self, std::size_t i)
{
  return self.inputs[i]->value;
}

// Elementwise op with forward f(a, b) and partials (da, db).
template <typename T, typename F, typename DA, typename DB>
Var<T> binary(const char* name, const Var<T>& a, const Var<T>& b, F f, DA da, DB db)
{
  require_same(a, b, name);
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return record<T>(name, std::move(out), {a, b},
                   [da, db](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const auto& x = in(self, 0);
                     const auto& y = in(self, 1);
                     if (gi[0]) {
                       auto& o = *gi[0];
                       for (std::size_t i = 0; i < g.size(); ++i) o[i] += g[i] * da(x[i], y[i]);
                     }
                     if (gi[1]) {
                       auto& o = *gi[1];
                       for (std::size_t i = 0; i < g.size(); ++i) o[i] += g[i] * db(x[i], y[i]);
                     }
                   });
}

// Elementwise op whose derivative is expressed through input x and output y.
template <typename T, typename F, typename D>
Var<T> unary(const char* name, const Var<T>& x, F f, D d)
{
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return record<T>(name, std::move(out), {x},
                   [d](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const auto& xv = in(self, 0);
                     const auto& yv = self.value;
                     auto& o = *gi[0];
                     for (std::size_t i = 0; i < g.size(); ++i) o[i] += g[i] * d(xv[i], yv[i]);
                   });
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b)
{
  return binary<T>(
    "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
    [](T, T) { return T(1); });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b)
{
  return binary<T>(
    "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
    [](T, T) { return T(-1); });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b)
{
  return binary<T>(
    "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
    [](T x, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b)
{
  return binary<T>(
    "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
    [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s)
{
  return unary<T>(
    "scale", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s)
{
  return unary<T>(
    "add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> square(const Var<T>& x)
{
  return unary<T>(
    "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> abs(const Var<T>& x)
{
  return unary<T>(
    "abs", x, [](T v) { return std::abs(v); },
    [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> relu(const Var<T>& x)
{
  return unary<T>(
    "relu", x, [](T v) { return v > T(0) ? v : T(0); },
    [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> gelu(const Var<T>& x)
{
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary<T>(
    "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
    [](T v, T) {
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      return cdf + v * pdf;
    });
}

template <typename T>
Var<T> sqrt(const Var<T>& x)
{
  return unary<T>(
    "sqrt", x, [](T v) { return std::sqrt(v); },
    [](T, T y) { return y > T(0) ? T(0.5) / y : T(0); });
}

template <typename T>
Var<T> rsqrt_or_zero(const Var<T>& x)
{
  return unary<T>(
    "rsqrt_or_zero", x, [](T v) { return v > T(0) ? T(1) / std::sqrt(v) : T(0); },
    [](T v, T y) { return v > T(0) ? T(-0.5) * y / v : T(0); });
}

template <typename T>
Var<T> clamp(const Var<T>& x, T lo, T hi)
{
  return unary<T>(
    "clamp", x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
    [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> detach(const Var<T>& x)
{
  return Var<T>::constant(x.value());
}

template <typename T>
Var<T> sum(const Var<T>& x)
{
  T s = 0;
  for (T v : x.value().values()) s += v;
  return record<T>("sum", Tensor<T>::scalar(s), {x},
                   [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const T gv = g[0];
                     for (auto& o : gi[0]->values()) o += gv;
                   });
}

template <typename T>
Var<T> mean(const Var<T>& x)
{
  const T n = static_cast<T>(x.value().size());
  T s = 0;
  for (T v : x.value().values()) s += v;
  return record<T>("mean", Tensor<T>::scalar(s / n), {x},
                   [n](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const T gv = g[0] / n;
                     for (auto& o : gi[0]->values()) o += gv;
                   });
}

template <typename T>
Var<T> sum_rows(const Var<T>& x)
{
  const auto& xv = x.value();
  Tensor<T> out({xv.rows(), 1});
  out.mat() = xv.mat().rowwise().sum();
  return record<T>("sum_rows", std::move(out), {x},
                   [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     auto o = gi[0]->mat();
                     o.colwise() += g.mat().col(0);
                   });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& bias)
{
  if (bias.value().size() != x.cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bias.shape()) + " vs input " +
                     shape_string(x.shape()));
  }
  Tensor<T> out = x.value();
  const auto& bv = bias.value();
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bv.data(), static_cast<Eigen::Index>(bv.size()));
  out.mat().rowwise() += b;
  return record<T>("add_bias", std::move(out), {x, bias},
                   [](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     if (gi[0]) gi[0]->mat() += g.mat();
                     if (gi[1]) {
                       auto& o = *gi[1];
                       const auto colsum = g.mat().colwise().sum();
                       for (std::size_t c = 0; c < o.size(); ++c) o[c] += colsum(static_cast<Eigen::Index>(c));
                     }
                   });
}

template <typename T>
Var<T> mul_col(const Var<T>& x, const Var<T>& col)
{
  if (col.value().size() != x.rows()) {
    throw ShapeError("mul_col: column " + shape_string(col.shape()) + " vs input " +
                     shape_string(x.shape()));
  }
  Tensor<T> out = x.value();
  const auto& cv = col.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    out.mat().row(static_cast<Eigen::Index>(r)) *= cv[r];
  }
  return record<T>("mul_col", std::move(out), {x, col},
                   [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const auto& xv = in(self, 0);
                     const auto& cv = in(self, 1);
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       const auto ri = static_cast<Eigen::Index>(r);
                       if (gi[0]) gi[0]->mat().row(ri) += cv[r] * g.mat().row(ri);
                       if (gi[1]) (*gi[1])[r] += g.mat().row(ri).dot(xv.mat().row(ri));
                     }
                   });
}

template <typename T>
Var<T> add_tiled(const Var<T>& x, const Var<T>& pos)
{
  const std::size_t len = pos.rows();
  if (pos.cols() != x.cols() || x.rows() % len != 0) {
    throw ShapeError("add_tiled: position " + shape_string(pos.shape()) + " vs input " +
                     shape_string(x.shape()));
  }
  Tensor<T> out = x.value();
  const std::size_t batch = x.rows() / len;
  for (std::size_t b = 0; b < batch; ++b) {
    out.mat().middleRows(static_cast<Eigen::Index>(b * len), static_cast<Eigen::Index>(len)) +=
      pos.value().mat();
  }
  return record<T>("add_tiled", std::move(out), {x, pos},
                   [batch, len](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     if (gi[0]) gi[0]->mat() += g.mat();
                     if (gi[1]) {
                       for (std::size_t b = 0; b < batch; ++b) {
                         gi[1]->mat() += g.mat().middleRows(static_cast<Eigen::Index>(b * len),
                                                            static_cast<Eigen::Index>(len));
                       }
                     }
                   });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b)
{
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor<T> out({a.rows(), b.cols()});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  return record<T>("matmul", std::move(out), {a, b},
                   [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     if (gi[0]) gi[0]->mat().noalias() += g.mat() * in(self, 1).mat().transpose();
                     if (gi[1]) gi[1]->mat().noalias() += in(self, 0).mat().transpose() * g.mat();
                   });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b)
{
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) +
                     "^T");
  }
  Tensor<T> out({a.rows(), b.rows()});
  out.mat().noalias() = a.value().mat() * b.value().mat().transpose();
  return record<T>("matmul_nt", std::move(out), {a, b},
                   [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     if (gi[0]) gi[0]->mat().noalias() += g.mat() * in(self, 1).mat();
                     if (gi[1]) gi[1]->mat().noalias() += g.mat().transpose() * in(self, 0).mat();
                   });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias)
{
  if (x.cols() != weight.cols()) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.value().size() != weight.rows()) {
    throw ShapeError("linear: bias " + shape_string(bias.shape()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  Tensor<T> out({x.rows(), weight.rows()});
  out.mat().noalias() = x.value().mat() * weight.value().mat().transpose();
  if (has_bias) {
    const auto& bv = bias.value();
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bv.data(), static_cast<Eigen::Index>(bv.size()));
    out.mat().rowwise() += b;
  }
  std::vector<Var<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return record<T>("linear", std::move(out), std::move(inputs),
                   [](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     if (gi[0]) gi[0]->mat().noalias() += g.mat() * in(self, 1).mat();
                     if (gi[1]) gi[1]->mat().noalias() += g.mat().transpose() * in(self, 0).mat();
                     if (gi.size() > 2 && gi[2]) {
                       auto& o = *gi[2];
                       Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> ob(o.data(), static_cast<Eigen::Index>(o.size()));
                       ob += g.mat().colwise().sum();
                     }
                   });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& rows)
{
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t c = x.cols();
  const auto& xv = x.value();
  Tensor<T> out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(rows[i]) + " out of range for " +
                       shape_string(x.shape()));
    }
    std::copy_n(xv.data() + rows[i] * c, c, out.data() + i * c);
  }
  return record<T>("gather_rows", std::move(out), {x},
                   [rows, c](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     auto& o = *gi[0];
                     for (std::size_t i = 0; i < rows.size(); ++i) {
                       for (std::size_t k = 0; k < c; ++k) o[rows[i] * c + k] += g[i * c + k];
                     }
                   });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts)
{
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row count mismatch");
    offsets.push_back(total);
    total += p.cols();
  }
  Tensor<T> out({r, total});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out.mat().middleCols(static_cast<Eigen::Index>(offsets[i]), static_cast<Eigen::Index>(parts[i].cols())) =
      parts[i].value().mat();
  }
  return record<T>("concat_cols", std::move(out), parts,
                   [offsets](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     for (std::size_t i = 0; i < gi.size(); ++i) {
                       if (!gi[i]) continue;
                       gi[i]->mat() += g.mat().middleCols(static_cast<Eigen::Index>(offsets[i]),
                                                          static_cast<Eigen::Index>(in(self, i).cols()));
                     }
                   });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts)
{
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
    offsets.push_back(total);
    total += p.rows();
  }
  Tensor<T> out({total, c});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::copy_n(parts[i].value().data(), parts[i].value().size(), out.data() + offsets[i] * c);
  }
  return record<T>("concat_rows", std::move(out), parts,
                   [offsets, c](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     for (std::size_t i = 0; i < gi.size(); ++i) {
                       if (!gi[i]) continue;
                       auto& o = *gi[i];
                       const T* src = g.data() + offsets[i] * c;
                       for (std::size_t k = 0; k < o.size(); ++k) o[k] += src[k];
                     }
                   });
}

template <typename T>
Var<T> prepend_tokens(const Var<T>& x, const Var<T>& tokens, std::size_t batch)
{
  const std::size_t d = x.cols();
  if (tokens.cols() != d || batch == 0 || x.rows() % batch != 0) {
    throw ShapeError("prepend_tokens: tokens " + shape_string(tokens.shape()) + " vs patches " +
                     shape_string(x.shape()));
  }
  const std::size_t n = x.rows() / batch;
  const std::size_t tk = tokens.rows();
  const std::size_t len = n + tk;
  Tensor<T> out({batch * len, d});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(tokens.value().data(), tk * d, out.data() + b * len * d);
    std::copy_n(x.value().data() + b * n * d, n * d, out.data() + (b * len + tk) * d);
  }
  return record<T>("prepend_tokens", std::move(out), {x, tokens},
                   [batch, n, tk, d](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     const std::size_t len = n + tk;
                     for (std::size_t b = 0; b < batch; ++b) {
                       const T* base = g.data() + b * len * d;
                       if (gi[1]) {
                         T* o = gi[1]->data();
                         for (std::size_t k = 0; k < tk * d; ++k) o[k] += base[k];
                       }
                       if (gi[0]) {
                         T* o = gi[0]->data() + b * n * d;
                         const T* src = base + tk * d;
                         for (std::size_t k = 0; k < n * d; ++k) o[k] += src[k];
                       }
                     }
                   });
}

template <typename T>
Var<T> log_softmax(const Var<T>& x)
{
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  const std::size_t c = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const T* row = xv.data() + r * c;
    T m = *std::max_element(row, row + c);
    T s = 0;
    for (std::size_t k = 0; k < c; ++k) s += std::exp(row[k] - m);
    const T lse = m + std::log(s);
    for (std::size_t k = 0; k < c; ++k) out[r * c + k] = row[k] - lse;
  }
  return record<T>("log_softmax", std::move(out), {x},
                   [c](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     auto& o = *gi[0];
                     const auto& y = self.value;
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       T gs = 0;
                       for (std::size_t k = 0; k < c; ++k) gs += g[r * c + k];
                       for (std::size_t k = 0; k < c; ++k) {
                         o[r * c + k] += g[r * c + k] - std::exp(y[r * c + k]) * gs;
                       }
                     }
                   });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps)
{
  const std::size_t d = x.cols();
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw ShapeError("layer_norm: affine parameters do not match width " + std::to_string(d));
  }
  const std::size_t rows = x.rows();
  const auto& xv = x.value();
  Tensor<T> out(xv.shape());
  // Saved per-row statistics: normalized input and reciprocal std.
  auto xhat = std::make_shared<Tensor<T>>(xv.shape());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  const T* gm = gamma.value().data();
  const T* bt = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = 0;
    for (std::size_t k = 0; k < d; ++k) mu += row[k];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t k = 0; k < d; ++k) var += (row[k] - mu) * (row[k] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t k = 0; k < d; ++k) {
      const T h = (row[k] - mu) * rs;
      (*xhat)[r * d + k] = h;
      out[r * d + k] = h * gm[k] + bt[k];
    }
  }
  return record<T>(
    "layer_norm", std::move(out), {x, gamma, beta},
    [xhat, rstd, d](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
      const T* gm = in(self, 1).data();
      const T inv_d = T(1) / static_cast<T>(d);
      std::vector<T> dh(d);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const T* gr = g.data() + r * d;
        const T* hr = xhat->data() + r * d;
        if (gi[1]) {
          for (std::size_t k = 0; k < d; ++k) (*gi[1])[k] += gr[k] * hr[k];
        }
        if (gi[2]) {
          for (std::size_t k = 0; k < d; ++k) (*gi[2])[k] += gr[k];
        }
        if (gi[0]) {
          T mean_dh = 0;
          T mean_dh_h = 0;
          for (std::size_t k = 0; k < d; ++k) {
            dh[k] = gr[k] * gm[k];
            mean_dh += dh[k];
            mean_dh_h += dh[k] * hr[k];
          }
          mean_dh *= inv_d;
          mean_dh_h *= inv_d;
          T* o = gi[0]->data() + r * d;
          const T rs = (*rstd)[r];
          for (std::size_t k = 0; k < d; ++k) o[k] += rs * (dh[k] - mean_dh - hr[k] * mean_dh_h);
        }
      }
    });
}

template <typename T>
Var<T> self_attention(const Var<T>& qkv, std::size_t batch, std::size_t length, std::size_t heads)
{
  const std::size_t width = qkv.cols();
  if (width % 3 != 0 || (width / 3) % heads != 0 || qkv.rows() != batch * length) {
    throw ShapeError("self_attention: qkv " + shape_string(qkv.shape()) + " incompatible with " +
                     std::to_string(batch) + " x " + std::to_string(length) + " x " +
                     std::to_string(heads) + " heads");
  }
  using Strided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
  const std::size_t dim = width / 3;
  const std::size_t dh = dim / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));
  const auto L = static_cast<Eigen::Index>(length);
  const auto Dh = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> in_stride(static_cast<Eigen::Index>(width));
  const Eigen::OuterStride<> out_stride(static_cast<Eigen::Index>(dim));

  const auto& qv = qkv.value();
  Tensor<T> out({batch * length, dim});
  auto probs = std::make_shared<std::vector<T>>(batch * heads * length * length);
  RowMat<T> scores(L, L);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const T* base = qv.data() + b * length * width + h * dh;
      Strided q(base, L, Dh, in_stride);
      Strided k(base + dim, L, Dh, in_stride);
      Strided v(base + 2 * dim, L, Dh, in_stride);
      scores.noalias() = (q * k.transpose()) * scale_factor;
      for (Eigen::Index r = 0; r < L; ++r) {
        const T m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
      }
      T* pbase = probs->data() + (b * heads + h) * length * length;
      Eigen::Map<RowMat<T>>(pbase, L, L) = scores;
      StridedMut o(out.data() + b * length * dim + h * dh, L, Dh, out_stride);
      o.noalias() = scores * v;
    }
  }
  return record<T>(
    "self_attention", std::move(out), {qkv},
    [probs, batch, length, heads, dim, dh, scale_factor](const Node<T>& self, const Tensor<T>& g,
                                                         std::span<Tensor<T>*> gi) {
      const std::size_t width = 3 * dim;
      const auto L = static_cast<Eigen::Index>(length);
      const auto Dh = static_cast<Eigen::Index>(dh);
      const Eigen::OuterStride<> in_stride(static_cast<Eigen::Index>(width));
      const Eigen::OuterStride<> out_stride(static_cast<Eigen::Index>(dim));
      const auto& qv = in(self, 0);
      auto& gq = *gi[0];
      RowMat<T> dp(L, L);
      RowMat<T> ds(L, L);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = b * length * width + h * dh;
          Strided q(qv.data() + off, L, Dh, in_stride);
          Strided k(qv.data() + off + dim, L, Dh, in_stride);
          Strided v(qv.data() + off + 2 * dim, L, Dh, in_stride);
          StridedMut dq(gq.data() + off, L, Dh, in_stride);
          StridedMut dk(gq.data() + off + dim, L, Dh, in_stride);
          StridedMut dv(gq.data() + off + 2 * dim, L, Dh, in_stride);
          Strided go(g.data() + b * length * dim + h * dh, L, Dh, out_stride);
          Eigen::Map<const RowMat<T>> p(probs->data() + (b * heads + h) * length * length, L, L);
          dv.noalias() += p.transpose() * go;
          dp.noalias() = go * v.transpose();
          for (Eigen::Index r = 0; r < L; ++r) {
            const T dot = dp.row(r).dot(p.row(r));
            ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
          }
          ds *= scale_factor;
          dq.noalias() += ds * k;
          dk.noalias() += ds.transpose() * q;
        }
      }
    });
}

template <typename T>
Var<T> dropout(const Var<T>& x, T rate, Rng& rng)
{
  if (rate <= T(0)) return x;
  auto mask = std::make_shared<Tensor<T>>(x.shape());
  const T keep = T(1) - rate;
  for (auto& m : mask->values()) m = rng.uniform() < static_cast<double>(keep) ? T(1) / keep : T(0);
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*mask)[i];
  return record<T>("dropout", std::move(out), {x},
                   [mask](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>*> gi) {
                     auto& o = *gi[0];
                     for (std::size_t i = 0; i < g.size(); ++i) o[i] += g[i] * (*mask)[i];
                   });
}

template <typename T>
Var<T> normalize_rows(const Var<T>& x)
{
  return mul_col(x, rsqrt_or_zero(sum_rows(square(x))));
}

template <typename T>
Var<T> cosine_rows(const Var<T>& a, const Var<T>& b)
{
  return sum_rows(mul(normalize_rows(a), normalize_rows(b)));
}

template <typename T>
Var<T> distance_rows(const Var<T>& a, const Var<T>& b)
{
  return sqrt(sum_rows(square(sub(a, b))));
}

#define DRE_INSTANTIATE_OPS(T)                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                        \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                        \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> div(const Var<T>&, const Var<T>&);                                        \
  template Var<T> scale(const Var<T>&, T);                                                  \
  template Var<T> add_scalar(const Var<T>&, T);                                             \
  template Var<T> square(const Var<T>&);                                                    \
  template Var<T> abs(const Var<T>&);                                                       \
  template Var<T> relu(const Var<T>&);                                                      \
  template Var<T> gelu(const Var<T>&);                                                      \
  template Var<T> sqrt(const Var<T>&);                                                      \
  template Var<T> rsqrt_or_zero(const Var<T>&);                                             \
  template Var<T> clamp(const Var<T>&, T, T);                                               \
  template Var<T> detach(const Var<T>&);                                                    \
  template Var<T> sum(const Var<T>&);                                                       \
  template Var<T> mean(const Var<T>&);                                                      \
  template Var<T> sum_rows(const Var<T>&);                                                  \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                                   \
  template Var<T> mul_col(const Var<T>&, const Var<T>&);                                    \
  template Var<T> add_tiled(const Var<T>&, const Var<T>&);                                  \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                     \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                  \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                      \
  template Var<T> gather_rows(const Var<T>&, const std::vector<std::size_t>&);              \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                  \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                                  \
  template Var<T> prepend_tokens(const Var<T>&, const Var<T>&, std::size_t);                \
  template Var<T> log_softmax(const Var<T>&);                                               \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);               \
  template Var<T> self_attention(const Var<T>&, std::size_t, std::size_t, std::size_t);     \
  template Var<T> dropout(const Var<T>&, T, Rng&);                                          \
  template Var<T> normalize_rows(const Var<T>&);                                            \
  template Var<T> cosine_rows(const Var<T>&, const Var<T>&);                                \
  template Var<T> distance_rows(const Var<T>&, const Var<T>&);

DRE_INSTANTIATE_OPS(float)
DRE_INSTANTIATE_OPS(double)

}  // namespace dre::ops
