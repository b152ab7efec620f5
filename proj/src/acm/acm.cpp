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

#include "dre/acm/acm.hpp"

#include <spdlog/spdlog.h>

namespace dre::acm {

namespace {

template <typename T>
bool has_zero_row(const Var<T>& x)
{
  const auto& v = x.value();
  for (std::size_t r = 0; r < v.rows(); ++r) {
    if (v.mat().row(static_cast<Eigen::Index>(r)).squaredNorm() == T(0)) return true;
  }
  return false;
}

template <typename T>
void warn_zero_rows(const char* where, const Var<T>& x)
{
  if (has_zero_row(x)) {
    spdlog::warn("{}: zero-norm representation; its cosine is taken as 0", where);
  }
}

}  // namespace

template <typename T>
Integration<T> integrate(const Var<T>& primary, const std::vector<Var<T>>& auxiliary, bool clamp_weights)
{
  Integration<T> out;
  out.integrated = primary;
  if (auxiliary.empty()) return out;
  warn_zero_rows("integrate", primary);
  for (const auto& a : auxiliary) {
    primary.value().require_same_shape(a.value(), "integrate");
    auto omega = ops::cosine_rows(primary, a);
    if (clamp_weights) omega = ops::clamp(omega, T(0), T(1));
    out.weights.push_back(omega);
    auto contribution = ops::mul_col(a, ops::add_scalar(ops::scale(omega, T(-1)), T(1)));
    out.integrated = ops::add(out.integrated, contribution);
  }
  return out;
}

template <typename T>
Var<T> orthogonal_loss(const std::vector<Var<T>>& auxiliary)
{
  if (auxiliary.size() < 2) return Var<T>::constant(Tensor<T>::scalar(T(0)));
  std::vector<Var<T>> pairs;
  for (std::size_t i = 0; i < auxiliary.size(); ++i) {
    warn_zero_rows("orthogonal_loss", auxiliary[i]);
    for (std::size_t j = i + 1; j < auxiliary.size(); ++j) {
      pairs.push_back(ops::abs(ops::cosine_rows(auxiliary[i], auxiliary[j])));
    }
  }
  return ops::mean(ops::concat_cols(pairs));
}

template <typename T>
double mean_pairwise_abs_cosine(const std::vector<Var<T>>& auxiliary)
{
  NoGradGuard guard;
  return static_cast<double>(orthogonal_loss(auxiliary).value().item());
}

template Integration<float> integrate(const Var<float>&, const std::vector<Var<float>>&, bool);
template Integration<double> integrate(const Var<double>&, const std::vector<Var<double>>&, bool);
template Var<float> orthogonal_loss(const std::vector<Var<float>>&);
template Var<double> orthogonal_loss(const std::vector<Var<double>>&);
template double mean_pairwise_abs_cosine(const std::vector<Var<float>>&);
template double mean_pairwise_abs_cosine(const std::vector<Var<double>>&);

}  // namespace dre::acm
