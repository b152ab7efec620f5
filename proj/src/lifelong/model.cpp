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

#include "dre/lifelong/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dre::lifelong {

template <typename T>
std::int64_t ClassifierHead<T>::append(int task_id, const Tensor<T>& rows)
{
  if (offsets_.contains(task_id)) {
    throw std::invalid_argument("classifier head: task " + std::to_string(task_id) + " already registered");
  }
  const std::size_t count = rows.empty() ? 0 : rows.dim(0);
  const auto offset = static_cast<std::int64_t>(classes_);
  offsets_[task_id] = {offset, count};
  if (count == 0) return offset;

  Tensor<T> grown({classes_ + count, dim_});
  if (weight_.defined()) std::copy_n(weight_.value().data(), classes_ * dim_, grown.data());
  std::copy_n(rows.data(), count * dim_, grown.data() + classes_ * dim_);
  weight_ = Var<T>::leaf(std::move(grown));
  classes_ += count;
  return offset;
}

template <typename T>
std::int64_t ClassifierHead<T>::register_task(int task_id, std::size_t count, Rng& rng)
{
  if (count == 0) return append(task_id, Tensor<T>());
  return append(task_id, trunc_normal_tensor<T>({count, dim_}, rng));
}

template <typename T>
std::int64_t ClassifierHead<T>::register_copy(int task_id, const ClassifierHead& source)
{
  if (source.dim_ != dim_) throw ShapeError("classifier head: dimension mismatch");
  const auto [offset, count] = source.offsets_.at(task_id);
  if (count == 0) return append(task_id, Tensor<T>());
  Tensor<T> rows({count, dim_});
  std::copy_n(source.weight_.value().data() + static_cast<std::size_t>(offset) * dim_, count * dim_, rows.data());
  return append(task_id, rows);
}

template <typename T>
Var<T> ClassifierHead<T>::logits(const Var<T>& features) const
{
  if (!weight_.defined()) throw std::logic_error("classifier head: no classes registered");
  return ops::matmul_nt(features, weight_);
}

template <typename T>
std::int64_t ClassifierHead<T>::offset(int task_id) const
{
  return offsets_.at(task_id).first;
}

template <typename T>
std::size_t ClassifierHead<T>::task_classes(int task_id) const
{
  return offsets_.at(task_id).second;
}

template <typename T>
ParamList<T> ClassifierHead<T>::params() const
{
  if (!weight_.defined()) return {};
  return {{"head.weight", weight_}};
}

template <typename T>
void expand_classifier(ClassifierHead<T>& head, int task_id, std::size_t new_class_count, Rng& rng)
{
  head.register_task(task_id, new_class_count, rng);
}

template <typename T>
Model<T>::Model(const BackboneConfig& config, Rng& rng, bool clamp_weights)
    : backbone_(std::make_shared<Backbone<T>>(config, rng)), head_(config.dim), clamp_weights_(clamp_weights)
{
}

template <typename T>
Model<T>::Model(std::shared_ptr<Backbone<T>> backbone, ClassifierHead<T> head, bool clamp_weights)
    : backbone_(std::move(backbone)), head_(std::move(head)), clamp_weights_(clamp_weights)
{
}

template <typename T>
Model<T> Model<T>::clone() const
{
  Rng scratch(0);
  auto backbone = std::make_shared<Backbone<T>>(backbone_->config(), scratch);
  copy_param_values(backbone->params(), backbone_->params());
  ClassifierHead<T> head(head_.dim());
  for (const auto& [task_id, range] : head_.tasks()) head.register_copy(task_id, head_);
  return Model(std::move(backbone), std::move(head), clamp_weights_);
}

template <typename T>
ModelOutput<T> Model<T>::forward(const Tensor<T>& images, ForwardTrace* trace, Rng* dropout_rng) const
{
  ModelOutput<T> out;
  out.reps = backbone_->forward(images, trace, dropout_rng);
  auto integration = acm::integrate(out.reps.primary, out.reps.auxiliary, clamp_weights_);
  out.reps.integrated = integration.integrated;
  out.weights = std::move(integration.weights);
  if (head_.classes() > 0) out.logits = head_.logits(out.reps.integrated);
  return out;
}

template <typename T>
ParamList<T> Model<T>::params() const
{
  auto out = backbone_->params();
  for (auto& p : head_.params()) out.push_back(p);
  return out;
}

#define DRE_INSTANTIATE_MODEL(T)                                                        \
  template class ClassifierHead<T>;                                                     \
  template void expand_classifier(ClassifierHead<T>&, int, std::size_t, Rng&);          \
  template class Model<T>;

DRE_INSTANTIATE_MODEL(float)
DRE_INSTANTIATE_MODEL(double)

}  // namespace dre::lifelong
