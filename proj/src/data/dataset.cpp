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

#include "dre/data/dataset.hpp"

#include <stdexcept>

namespace dre::data {

std::map<std::int64_t, std::vector<std::size_t>> Dataset::index_by_identity() const
{
  std::map<std::int64_t, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out[samples[i].person_id].push_back(i);
  return out;
}

template <typename T>
Tensor<T> stack_images(const Dataset& dataset, const std::vector<std::size_t>& indices)
{
  if (indices.empty()) throw std::invalid_argument("stack_images: empty selection");
  const auto& first = dataset.samples.at(indices.front()).image;
  Shape shape{indices.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor<T> out(shape);
  const std::size_t per = first.size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& img = dataset.samples.at(indices[i]).image;
    img.require_same_shape(first, "stack_images");
    std::transform(img.data(), img.data() + per, out.data() + i * per,
                   [](float v) { return static_cast<T>(v); });
  }
  return out;
}

std::int64_t LabelMap::add_task(int task_id, std::size_t count)
{
  for (const auto& r : ranges_) {
    if (r.task_id == task_id) {
      throw std::invalid_argument("label map: task " + std::to_string(task_id) + " already registered");
    }
  }
  const auto offset = static_cast<std::int64_t>(total_);
  ranges_.push_back({task_id, offset, count});
  total_ += count;
  return offset;
}

std::int64_t LabelMap::encode(int task_id, std::int64_t local) const
{
  for (const auto& r : ranges_) {
    if (r.task_id != task_id) continue;
    if (local < 0 || static_cast<std::size_t>(local) >= r.count) {
      throw std::out_of_range("label map: local id " + std::to_string(local) + " out of range for task " +
                              std::to_string(task_id));
    }
    return r.offset + local;
  }
  throw std::out_of_range("label map: unknown task " + std::to_string(task_id));
}

std::pair<int, std::int64_t> LabelMap::decode(std::int64_t global) const
{
  for (const auto& r : ranges_) {
    if (global >= r.offset && global < r.offset + static_cast<std::int64_t>(r.count)) {
      return {r.task_id, global - r.offset};
    }
  }
  throw std::out_of_range("label map: global label " + std::to_string(global) + " not registered");
}

template Tensor<float> stack_images(const Dataset&, const std::vector<std::size_t>&);
template Tensor<double> stack_images(const Dataset&, const std::vector<std::size_t>&);

}  // namespace dre::data
