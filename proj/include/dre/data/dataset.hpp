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
#include <utility>
#include <vector>

#include "dre/numerics/tensor.hpp"

namespace dre::data {

struct IdentitySample {
  Tensor<float> image;  // C x H x W, values in [0, 1]
  std::int64_t person_id = 0;
  int camera_id = 0;
  int task_id = 0;
};

struct Dataset {
  std::vector<IdentitySample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Sample indices grouped by person id, ids ascending.
  std::map<std::int64_t, std::vector<std::size_t>> index_by_identity() const;
  std::size_t identity_count() const { return index_by_identity().size(); }
};

/// Stacks the selected samples into a [B, C, H, W] batch.
template <typename T>
Tensor<T> stack_images(const Dataset& dataset, const std::vector<std::size_t>& indices);

/// Bijection between (task, local id) and a global class label.
class LabelMap {
public:
  /// Registers `count` local ids for a new task; returns the task's offset.
  std::int64_t add_task(int task_id, std::size_t count);

  std::int64_t encode(int task_id, std::int64_t local) const;
  std::pair<int, std::int64_t> decode(std::int64_t global) const;
  std::size_t total() const { return total_; }

private:
  struct Range {
    int task_id;
    std::int64_t offset;
    std::size_t count;
  };
  std::vector<Range> ranges_;
  std::size_t total_ = 0;
};

}  // namespace dre::data
