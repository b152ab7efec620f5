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

#include "dre/data/dataset.hpp"
#include "dre/data/synthetic.hpp"

namespace dre::data {

/// One entry of the task stream: a training split and a query/gallery test split
/// with identities disjoint from training.
struct TaskData {
  std::string name;
  int task_id = 0;
  Dataset train;
  Dataset query;
  Dataset gallery;
};

/// First image of every (identity, camera) pair becomes a query; the rest form the gallery.
void split_query_gallery(const Dataset& test, Dataset& query, Dataset& gallery);

/// Maps person ids onto offset, offset+1, ... in ascending id order and stamps the
/// task id. Returns the number of identities.
std::size_t remap_identities(Dataset& dataset, std::int64_t offset, int task_id);

struct SyntheticStreamOptions {
  SyntheticSpec base;              // image geometry, cameras, nuisance ranges
  std::size_t train_identities = 24;
  std::size_t test_identities = 12;
  std::uint64_t seed = 0;
};

/// Seen task `task_id` drawn from the signature layout of `domain`. Training ids
/// start at `id_offset`.
TaskData make_synthetic_task(const SyntheticStreamOptions& options, std::size_t domain, int task_id,
                             std::int64_t id_offset);

/// Held-out evaluation set: a seen layout under camera transforms and noise never
/// used in training. Only query and gallery are filled.
TaskData make_unseen_task(const SyntheticStreamOptions& options, std::size_t domain, int unseen_index);

/// Market-style root with bounding_box_train/, query/ and bounding_box_test/.
TaskData load_market_task(const std::filesystem::path& root, int task_id, std::int64_t id_offset,
                          std::size_t channels, std::size_t height, std::size_t width);

}  // namespace dre::data
