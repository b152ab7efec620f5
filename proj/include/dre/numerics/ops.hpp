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

#pragma once

#include <cstddef>
#include <vector>

#include "dre/numerics/autograd.hpp"

namespace dre {

class Rng;

namespace ops {

// Elementwise, identical shapes.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> scale(const Var<T>& x, T s);
template <typename T> Var<T> add_scalar(const Var<T>& x, T s);
template <typename T> Var<T> square(const Var<T>& x);
template <typename T> Var<T> abs(const Var<T>& x);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> gelu(const Var<T>& x);
/// sqrt with a zero subgradient at 0.
template <typename T> Var<T> sqrt(const Var<T>& x);
/// 1/sqrt(x) for x > 0, 0 otherwise (zero-norm rows normalize to zero).
template <typename T> Var<T> rsqrt_or_zero(const Var<T>& x);
template <typename T> Var<T> clamp(const Var<T>& x, T lo, T hi);

/// Blocks gradient flow; the result is a constant copy.
template <typename T> Var<T> detach(const Var<T>& x);

// Reductions.
template <typename T> Var<T> sum(const Var<T>& x);
template <typename T> Var<T> mean(const Var<T>& x);
/// [R, C] -> [R, 1]
template <typename T> Var<T> sum_rows(const Var<T>& x);

// Broadcasting.
/// x [R, C] + b [C]
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& bias);
/// x [R, C] * c [R, 1]
template <typename T> Var<T> mul_col(const Var<T>& x, const Var<T>& col);
/// x [B*L, D] + pos [L, D], pos tiled over B.
template <typename T> Var<T> add_tiled(const Var<T>& x, const Var<T>& pos);

// Linear algebra.
/// a [M, K] . b [K, N]
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a [M, K] . b[N, K]^T
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
/// x [R, in] . weight[out, in]^T + bias [out]; bias may be undefined.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// Row manipulation.
template <typename T> Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& rows);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
/// Interleaves a token bank [Tk, D] in front of each of `batch` blocks of x [batch*N, D].
template <typename T> Var<T> prepend_tokens(const Var<T>& x, const Var<T>& tokens, std::size_t batch);

// Network blocks.
template <typename T> Var<T> log_softmax(const Var<T>& x);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-6));
/// Multi-head self-attention over qkv [B*L, 3D] with heads split contiguously.
template <typename T>
Var<T> self_attention(const Var<T>& qkv, std::size_t batch, std::size_t length, std::size_t heads);
template <typename T> Var<T> dropout(const Var<T>& x, T rate, Rng& rng);

// Composites.
/// Rows scaled to unit L2 norm; zero rows stay zero.
template <typename T> Var<T> normalize_rows(const Var<T>& x);
/// Per-row cosine similarity, [R, 1].
template <typename T> Var<T> cosine_rows(const Var<T>& a, const Var<T>& b);
/// Per-row euclidean distance, [R, 1].
template <typename T> Var<T> distance_rows(const Var<T>& a, const Var<T>& b);

}  // namespace ops
}  // namespace dre
