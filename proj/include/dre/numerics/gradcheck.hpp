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

#include <functional>
#include <vector>

#include "dre/numerics/autograd.hpp"

namespace dre {

struct GradCheckOptions {
  double step = 1e-5;
  /// Denominator floor of the relative error, so entries with near-zero
  /// gradient are judged on absolute error instead.
  double floor = 1e-4;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t entries = 0;
};

using LossBuilder = std::function<Var<double>(const std::vector<Var<double>>& leaves)>;

/// Compares reverse-mode gradients of `build` at `inputs` with central
/// finite differences, entry by entry.
GradCheckResult check_gradients(const LossBuilder& build, const std::vector<Tensor<double>>& inputs,
                                const GradCheckOptions& options = {});

}  // namespace dre
