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

#include <vector>

#include "dre/numerics/ops.hpp"

namespace dre::acm {

/// Integrated primary P-hat and the per-sample weights omega_s = cos(P, A^s),
/// one [B, 1] column per auxiliary.
template <typename T>
struct Integration {
  Var<T> integrated;
  std::vector<Var<T>> weights;
};

/// P-hat = P + sum_s (1 - omega_s) * A^s. Weights stay on the record, so
/// gradients reach P and every A^s through both terms. `clamp_weights`
/// restricts omega to [0, 1].
template <typename T>
Integration<T> integrate(const Var<T>& primary, const std::vector<Var<T>>& auxiliary,
                         bool clamp_weights = false);

/// Mean over the batch and over unordered pairs i < j of |cos(A^i, A^j)|.
/// Zero (constant) when fewer than two auxiliaries are given.
template <typename T>
Var<T> orthogonal_loss(const std::vector<Var<T>>& auxiliary);

/// Mean pairwise |cos| as a plain number, for monitoring.
template <typename T>
double mean_pairwise_abs_cosine(const std::vector<Var<T>>& auxiliary);

}  // namespace dre::acm
