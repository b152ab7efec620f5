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

#include "dre/data/tasks.hpp"

#include <map>
#include <set>
#include <utility>

#include "dre/data/folder.hpp"
#include "dre/numerics/rng.hpp"

namespace dre::data {

namespace {

constexpr std::int64_t kTestIdBase = 1'000'000;

std::uint64_t task_seed(std::uint64_t seed, std::uint64_t role, std::uint64_t index)
{
  return derive_seed(seed, streams::kSynthetic, role * 1000 + index);
}

}  // namespace

void split_query_gallery(const Dataset& test, Dataset& query, Dataset& gallery)
{
  std::set<std::pair<std::int64_t, int>> seen;
  for (const auto& s : test.samples) {
    if (seen.insert({s.person_id, s.camera_id}).second) {
      query.samples.push_back(s);
    } else {
      gallery.samples.push_back(s);
    }
  }
}

std::size_t remap_identities(Dataset& dataset, std::int64_t offset, int task_id)
{
  std::map<std::int64_t, std::int64_t> mapping;
  for (const auto& s : dataset.samples) mapping.emplace(s.person_id, 0);
  std::int64_t next = offset;
  for (auto& [from, to] : mapping) to = next++;
  for (auto& s : dataset.samples) {
    s.person_id = mapping.at(s.person_id);
    s.task_id = task_id;
  }
  return mapping.size();
}

TaskData make_synthetic_task(const SyntheticStreamOptions& options, std::size_t domain, int task_id,
                             std::int64_t id_offset)
{
  const auto t = static_cast<std::uint64_t>(task_id);
  SyntheticSpec spec = options.base;
  spec.domain = domain;
  spec.camera_seed = task_seed(options.seed, 3, t);

  TaskData task;
  task.name = "synth:" + std::to_string(domain);
  task.task_id = task_id;

  spec.identities = options.train_identities;
  spec.seed = task_seed(options.seed, 1, t);
  task.train = generate_synthetic(spec);
  remap_identities(task.train, id_offset, task_id);

  spec.identities = options.test_identities;
  spec.seed = task_seed(options.seed, 2, t);
  Dataset test = generate_synthetic(spec);
  remap_identities(test, kTestIdBase * (task_id + 1), task_id);
  split_query_gallery(test, task.query, task.gallery);
  return task;
}

TaskData make_unseen_task(const SyntheticStreamOptions& options, std::size_t domain, int unseen_index)
{
  const auto u = static_cast<std::uint64_t>(unseen_index);
  SyntheticSpec spec = options.base;
  spec.domain = domain;
  spec.identities = options.test_identities;
  spec.seed = task_seed(options.seed, 4, u);
  spec.camera_seed = task_seed(options.seed, 5, u);
  spec.brightness *= 1.5;
  spec.noise *= 1.5;

  TaskData task;
  task.name = "unseen:" + std::to_string(domain);
  task.task_id = -1 - unseen_index;
  Dataset test = generate_synthetic(spec);
  remap_identities(test, -kTestIdBase * (unseen_index + 1), task.task_id);
  split_query_gallery(test, task.query, task.gallery);
  return task;
}

TaskData load_market_task(const std::filesystem::path& root, int task_id, std::int64_t id_offset,
                          std::size_t channels, std::size_t height, std::size_t width)
{
  TaskData task;
  task.name = "folder:" + root.string();
  task.task_id = task_id;
  task.train = load_folder(root / "bounding_box_train", channels, height, width);
  remap_identities(task.train, id_offset, task_id);
  task.query = load_folder(root / "query", channels, height, width);
  task.gallery = load_folder(root / "bounding_box_test", channels, height, width);
  for (auto* part : {&task.query, &task.gallery}) {
    for (auto& s : part->samples) s.task_id = task_id;
  }
  return task;
}

}  // namespace dre::data
