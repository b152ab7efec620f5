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
#include <filesystem>
#include <string>
#include <vector>

#include "dre/data/dataset.hpp"
#include "dre/lifelong/model.hpp"

namespace dre::lifelong {

/// Learner (optimized) and adjustment (EMA-trailing) models.
template <typename T>
struct ModelPair {
  Model<T> learner;
  Model<T> adjustment;
  double k = 0.996;

  /// The adjustment model starts as a copy of the freshly initialized learner.
  static ModelPair create(const BackboneConfig& config, std::uint64_t seed, bool clamp_weights, double k);

  /// Registers a task in both heads; the adjustment head copies the learner's new rows.
  std::int64_t register_task(int task_id, std::size_t classes, std::uint64_t seed);
};

/// adjustment <- k * adjustment + (1 - k) * learner for every parameter.
/// Throws ShapeError on any name or shape difference.
template <typename T>
void ema_update(ModelPair<T>& pair);

/// Throws ShapeError unless both models expose the same names and shapes.
template <typename T>
void check_congruent(const ModelPair<T>& pair);

struct BufferBudget {
  std::size_t ids_per_task = 20;
  std::size_t imgs_per_id = 2;

  std::size_t per_task() const { return ids_per_task * imgs_per_id; }
};

/// Exemplars of finished tasks, one independent budget per task.
class MemoryBuffer {
public:
  explicit MemoryBuffer(BufferBudget budget = {}) : budget_(budget) {}

  const BufferBudget& budget() const { return budget_; }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t task_count() const { return tasks_.size(); }
  std::size_t capacity() const { return tasks_.size() * budget_.per_task(); }

  /// All stored samples, task order then insertion order.
  const data::Dataset& samples() const { return merged_; }
  const std::vector<std::pair<int, std::vector<data::IdentitySample>>>& tasks() const { return tasks_; }

  void append(int task_id, std::vector<data::IdentitySample> samples);

private:
  BufferBudget budget_;
  std::vector<std::pair<int, std::vector<data::IdentitySample>>> tasks_;
  data::Dataset merged_;
};

/// Seeded uniform choice of `ids_per_task` identities and `imgs_per_id` images
/// each from the finished task. Smaller datasets are stored whole, with a warning.
void buffer_update(MemoryBuffer& buffer, const data::Dataset& finished, int task_id, std::uint64_t seed);

/// Both models as "learner.*" / "adjustment.*" tensors; head registrations go
/// into the metadata.
template <typename T>
void save_pair(const std::filesystem::path& path, const ModelPair<T>& pair, const std::string& config_text,
               const std::string& metadata);

/// Rebuilds a pair saved by save_pair. The backbone config must match the file.
template <typename T>
ModelPair<T> load_pair(const std::filesystem::path& path, const BackboneConfig& config, bool clamp_weights,
                       double k);

}  // namespace dre::lifelong
