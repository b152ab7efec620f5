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

#include "dre/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dre {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor<double>>& inputs)
{
  NoGradGuard no_grad;
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Var<double>::constant(t));
  return build(leaves).value().item();
}

}  // namespace

GradCheckResult check_gradients(const LossBuilder& build, const std::vector<Tensor<double>>& inputs,
                                const GradCheckOptions& options)
{
  std::vector<Var<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(Var<double>::leaf(t));
  const auto analytic = gradient_of(build(leaves), leaves);

  GradCheckResult result;
  auto probe = inputs;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (std::size_t k = 0; k < probe[i].size(); ++k) {
      const double original = probe[i][k];
      probe[i][k] = original + options.step;
      const double up = evaluate(build, probe);
      probe[i][k] = original - options.step;
      const double down = evaluate(build, probe);
      probe[i][k] = original;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[i][k];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      result.max_relative_error = std::max(result.max_relative_error, abs_err / denom);
      ++result.entries;
    }
  }
  return result;
}

}  // namespace dre
