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

#include "dre/data/sampler.hpp"

#include <stdexcept>
#include <string>

#include "dre/numerics/rng.hpp"

namespace dre::data {

PKBatch pk_sample(const Dataset& dataset, std::size_t ids_per_batch, std::size_t instances,
                  std::uint64_t seed, std::uint64_t step)
{
  if (ids_per_batch == 0 || instances == 0) {
    throw std::invalid_argument("pk_sample: P and K must be positive");
  }
  const auto groups = dataset.index_by_identity();
  if (groups.size() < ids_per_batch) {
    throw std::invalid_argument("pk_sample: need " + std::to_string(ids_per_batch) +
                                " identities, dataset has " + std::to_string(groups.size()));
  }
  std::vector<const std::vector<std::size_t>*> members;
  std::vector<std::int64_t> ids;
  for (const auto& [id, idx] : groups) {
    ids.push_back(id);
    members.push_back(&idx);
  }

  Rng rng(derive_seed(seed, streams::kSampler, step));
  PKBatch batch;
  for (auto pick : rng.choose(ids.size(), ids_per_batch)) {
    const auto& pool = *members[pick];
    std::vector<std::size_t> chosen;
    if (pool.size() >= instances) {
      for (auto j : rng.choose(pool.size(), instances)) chosen.push_back(pool[j]);
    } else {
      for (std::size_t k = 0; k < instances; ++k) chosen.push_back(pool[rng.below(pool.size())]);
    }
    for (auto i : chosen) {
      batch.indices.push_back(i);
      batch.labels.push_back(ids[pick]);
      batch.cameras.push_back(dataset.samples[i].camera_id);
    }
  }
  return batch;
}

PKBatch whole_dataset(const Dataset& dataset)
{
  PKBatch batch;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    batch.indices.push_back(i);
    batch.labels.push_back(dataset.samples[i].person_id);
    batch.cameras.push_back(dataset.samples[i].camera_id);
  }
  return batch;
}

}  // namespace dre::data
