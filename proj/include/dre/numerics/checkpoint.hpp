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

#include "dre/numerics/tensor.hpp"

namespace dre {

// Checkpoint file layout, all integers little-endian:
//
//   bytes 0..7   magic "DRECKPT\0"
//   u32          format version (currently 1)
//   u32          scalar width in bytes (4 = IEEE binary32, 8 = IEEE binary64)
//   u32 + bytes  config echo (UTF-8 text)
//   u32 + bytes  metadata (UTF-8 "key=value" lines)
//   u32          tensor count
//   per tensor:
//     u32 + bytes  name
//     u32          rank
//     u64 x rank   dimensions
//     scalar x n   values, row-major, little-endian IEEE
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct Checkpoint {
  std::string config;
  std::string metadata;
  std::vector<NamedTensor<T>> tensors;

  const Tensor<T>& get(const std::string& name) const;
};

template <typename T>
void write_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt);

/// Reads a checkpoint of either width; values are converted to T.
template <typename T>
Checkpoint<T> read_checkpoint(const std::filesystem::path& path);

/// Scalar width recorded in the file header.
std::uint32_t checkpoint_scalar_bytes(const std::filesystem::path& path);

}  // namespace dre
