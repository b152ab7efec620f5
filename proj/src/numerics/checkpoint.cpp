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

#include "dre/numerics/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace dre {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'R', 'E', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put_le(std::ostream& os, U value)
{
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(U));
}

template <typename U>
U get_le(std::istream& is)
{
  std::array<char, sizeof(U)> bytes;
  if (!is.read(bytes.data(), sizeof(U))) throw CheckpointError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

void put_string(std::ostream& os, const std::string& s)
{
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is)
{
  const auto n = get_le<std::uint32_t>(is);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw CheckpointError("checkpoint truncated");
  return s;
}

std::ifstream open_checked(const std::filesystem::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic;
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  return is;
}

template <typename T, typename Stored>
void read_values(std::istream& is, Tensor<T>& t)
{
  for (auto& v : t.values()) v = static_cast<T>(get_le<Stored>(is));
}

}  // namespace

template <typename T>
const Tensor<T>& Checkpoint<T>::get(const std::string& name) const
{
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw CheckpointError("checkpoint has no tensor named '" + name + "'");
}

template <typename T>
void write_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ckpt)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, sizeof(T));
  put_string(os, ckpt.config);
  put_string(os, ckpt.metadata);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& nt : ckpt.tensors) {
    put_string(os, nt.name);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (auto d : nt.tensor.shape()) put_le<std::uint64_t>(os, d);
    for (T v : nt.tensor.values()) put_le<T>(os, v);
  }
  if (!os) throw CheckpointError("write failed for " + path.string());
}

template <typename T>
Checkpoint<T> read_checkpoint(const std::filesystem::path& path)
{
  auto is = open_checked(path);
  const auto width = get_le<std::uint32_t>(is);
  if (width != 4 && width != 8) throw CheckpointError("bad scalar width " + std::to_string(width));
  Checkpoint<T> ckpt;
  ckpt.config = get_string(is);
  ckpt.metadata = get_string(is);
  const auto count = get_le<std::uint32_t>(is);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor<T> nt;
    nt.name = get_string(is);
    const auto rank = get_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    nt.tensor = Tensor<T>(shape);
    if (width == 4) {
      read_values<T, float>(is, nt.tensor);
    } else {
      read_values<T, double>(is, nt.tensor);
    }
    ckpt.tensors.push_back(std::move(nt));
  }
  return ckpt;
}

std::uint32_t checkpoint_scalar_bytes(const std::filesystem::path& path)
{
  auto is = open_checked(path);
  return get_le<std::uint32_t>(is);
}

template struct Checkpoint<float>;
template struct Checkpoint<double>;
template void write_checkpoint(const std::filesystem::path&, const Checkpoint<float>&);
template void write_checkpoint(const std::filesystem::path&, const Checkpoint<double>&);
template Checkpoint<float> read_checkpoint(const std::filesystem::path&);
template Checkpoint<double> read_checkpoint(const std::filesystem::path&);

}  // namespace dre
