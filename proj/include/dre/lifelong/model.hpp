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
#include <memory>
#include <vector>

#include "dre/acm/acm.hpp"
#include "dre/backbone/backbone.hpp"

namespace dre::lifelong {

/// Bias-free linear head over the cumulative identity space. Rows are appended
/// per task; existing rows are never rewritten by registration.
template <typename T>
class ClassifierHead {
public:
  explicit ClassifierHead(std::size_t dim) : dim_(dim) {}

  /// Appends `count` rows (truncated normal, std 0.02) for `task_id` and returns
  /// the task's first class index. Throws when the task is already registered.
  std::int64_t register_task(int task_id, std::size_t count, Rng& rng);

  /// Registers `task_id` with the rows `source` holds for it.
  std::int64_t register_copy(int task_id, const ClassifierHead& source);

  /// [B, D] -> [B, classes()]. Throws when no classes are registered.
  Var<T> logits(const Var<T>& features) const;

  std::size_t dim() const { return dim_; }
  std::size_t classes() const { return classes_; }
  bool has_task(int task_id) const { return offsets_.contains(task_id); }
  std::int64_t offset(int task_id) const;
  std::size_t task_classes(int task_id) const;
  const std::map<int, std::pair<std::int64_t, std::size_t>>& tasks() const { return offsets_; }

  /// Empty until the first registration.
  const Var<T>& weight() const { return weight_; }
  ParamList<T> params() const;

private:
  std::int64_t append(int task_id, const Tensor<T>& rows);

  std::size_t dim_;
  std::size_t classes_ = 0;
  Var<T> weight_;
  std::map<int, std::pair<std::int64_t, std::size_t>> offsets_;
};

/// Grows `head` by `new_class_count` rows for `task_id`; zero leaves it unchanged.
template <typename T>
void expand_classifier(ClassifierHead<T>& head, int task_id, std::size_t new_class_count, Rng& rng);

template <typename T>
struct ModelOutput {
  Representations<T> reps;  // `integrated` filled
  std::vector<Var<T>> weights;
  Var<T> logits;            // empty when the head has no classes
};

/// Backbone with multiple class tokens, adaptive integration and a growing head.
template <typename T>
class Model {
public:
  Model(const BackboneConfig& config, Rng& rng, bool clamp_weights = false);

  /// Independent copy: same values, no shared storage.
  Model clone() const;

  ModelOutput<T> forward(const Tensor<T>& images, ForwardTrace* trace = nullptr,
                         Rng* dropout_rng = nullptr) const;

  const Backbone<T>& backbone() const { return *backbone_; }
  ClassifierHead<T>& head() { return head_; }
  const ClassifierHead<T>& head() const { return head_; }
  const BackboneConfig& config() const { return backbone_->config(); }
  bool clamp_weights() const { return clamp_weights_; }

  /// Backbone parameters followed by `head.weight` (when registered).
  ParamList<T> params() const;

private:
  Model(std::shared_ptr<Backbone<T>> backbone, ClassifierHead<T> head, bool clamp_weights);

  std::shared_ptr<Backbone<T>> backbone_;
  ClassifierHead<T> head_;
  bool clamp_weights_;
};

}  // namespace dre::lifelong
