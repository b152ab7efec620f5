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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dre/numerics/autograd.hpp"

namespace dre {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

template <typename T>
std::vector<Var<T>> param_vars(const ParamList<T>& params)
{
  std::vector<Var<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var);
  return out;
}

/// base_lr * (1 + cos(pi * step / total_steps)) / 2, with step clamped to total_steps.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr);

enum class LrSchedule { kCosine, kConstant };

struct OptimizerState {
  double base_lr = 0.0032;
  double momentum = 0.9;
  std::int64_t step = 0;
  std::int64_t total_steps = 1;
  LrSchedule schedule = LrSchedule::kCosine;

  double current_lr() const;
};

/// SGD with heavy-ball momentum: v <- mu * v + g; p <- p - lr(step) * v.
template <typename T>
class SgdMomentum {
public:
  explicit SgdMomentum(OptimizerState state) : state_(state) {}

  void step(ParamList<T>& params, const std::vector<Tensor<T>>& grads);

  const OptimizerState& state() const { return state_; }
  const Tensor<T>* velocity(const std::string& name) const;

private:
  OptimizerState state_;
  std::map<std::string, Tensor<T>> velocity_;
};

}  // namespace dre
