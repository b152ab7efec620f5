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
#include <vector>

#include "dre/data/dataset.hpp"

namespace dre::data {

/// P identities x K instances, grouped by identity.
struct PKBatch {
  std::vector<std::size_t> indices;
  std::vector<std::int64_t> labels;
  std::vector<int> cameras;

  std::size_t size() const { return indices.size(); }
};

/// Deterministic in (seed, step). Identities are drawn without replacement;
/// instances without replacement when an identity has at least K images,
/// with replacement otherwise. Throws when fewer than P identities exist.
PKBatch pk_sample(const Dataset& dataset, std::size_t ids_per_batch, std::size_t instances,
                  std::uint64_t seed, std::uint64_t step);

/// Every sample in dataset order, as one batch.
PKBatch whole_dataset(const Dataset& dataset);

}  // namespace dre::data
