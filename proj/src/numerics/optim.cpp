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

#include "dre/numerics/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dre {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr)
{
  if (total_steps <= 0) {
    throw std::invalid_argument("cosine_lr: total_steps must be positive");
  }
  step = std::clamp<std::int64_t>(step, 0, total_steps);
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double OptimizerState::current_lr() const
{
  return schedule == LrSchedule::kConstant ? base_lr : cosine_lr(step, total_steps, base_lr);
}

template <typename T>
void SgdMomentum<T>::step(ParamList<T>& params, const std::vector<Tensor<T>>& grads)
{
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].var.value().require_same_shape(grads[i], "sgd_step gradient");
    auto found = velocity_.find(params[i].name);
    if (found != velocity_.end()) {
      found->second.require_same_shape(grads[i], "sgd_step momentum");
    }
  }
  const T lr = static_cast<T>(state_.current_lr());
  const T mu = static_cast<T>(state_.momentum);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto [it, inserted] = velocity_.try_emplace(params[i].name, grads[i].shape());
    auto& v = it->second;
    auto& p = params[i].var.mutable_value();
    const auto& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = mu * v[k] + g[k];
      p[k] -= lr * v[k];
    }
  }
  ++state_.step;
}

template <typename T>
const Tensor<T>* SgdMomentum<T>::velocity(const std::string& name) const
{
  auto found = velocity_.find(name);
  return found == velocity_.end() ? nullptr : &found->second;
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;

}  // namespace dre
