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

#include "dre/lifelong/pair.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "dre/numerics/checkpoint.hpp"
#include "dre/numerics/rng.hpp"

namespace dre::lifelong {

template <typename T>
ModelPair<T> ModelPair<T>::create(const BackboneConfig& config, std::uint64_t seed, bool clamp_weights, double k)
{
  Rng rng(derive_seed(seed, streams::kInit));
  Model<T> learner(config, rng, clamp_weights);
  Model<T> adjustment = learner.clone();
  return ModelPair{std::move(learner), std::move(adjustment), k};
}

template <typename T>
std::int64_t ModelPair<T>::register_task(int task_id, std::size_t classes, std::uint64_t seed)
{
  Rng rng(derive_seed(seed, streams::kHead, static_cast<std::uint64_t>(task_id)));
  const auto offset = learner.head().register_task(task_id, classes, rng);
  adjustment.head().register_copy(task_id, learner.head());
  return offset;
}

template <typename T>
void check_congruent(const ModelPair<T>& pair)
{
  const auto a = pair.adjustment.params();
  const auto l = pair.learner.params();
  if (a.size() != l.size()) {
    throw ShapeError("model pair: parameter count " + std::to_string(a.size()) + " vs " + std::to_string(l.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != l[i].name) throw ShapeError("model pair: parameter " + a[i].name + " vs " + l[i].name);
    a[i].var.value().require_same_shape(l[i].var.value(), a[i].name.c_str());
  }
}

template <typename T>
void ema_update(ModelPair<T>& pair)
{
  check_congruent(pair);
  const auto a = pair.adjustment.params();
  const auto l = pair.learner.params();
  const T k = static_cast<T>(pair.k);
  const T rest = static_cast<T>(1.0 - pair.k);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto dst = a[i].var;
    auto& av = dst.mutable_value();
    const auto& lv = l[i].var.value();
    for (std::size_t j = 0; j < av.size(); ++j) av[j] = k * av[j] + rest * lv[j];
  }
}

std::size_t MemoryBuffer::size() const
{
  return merged_.size();
}

void MemoryBuffer::append(int task_id, std::vector<data::IdentitySample> samples)
{
  for (const auto& [id, stored] : tasks_) {
    if (id == task_id) throw std::invalid_argument("memory buffer: task " + std::to_string(task_id) + " already stored");
  }
  if (samples.size() > budget_.per_task()) {
    throw std::invalid_argument("memory buffer: " + std::to_string(samples.size()) + " samples exceed the per-task budget " +
                                std::to_string(budget_.per_task()));
  }
  for (const auto& s : samples) merged_.samples.push_back(s);
  tasks_.emplace_back(task_id, std::move(samples));
}

void buffer_update(MemoryBuffer& buffer, const data::Dataset& finished, int task_id, std::uint64_t seed)
{
  const auto& budget = buffer.budget();
  const auto groups = finished.index_by_identity();
  std::vector<const std::vector<std::size_t>*> pools;
  for (const auto& [id, idx] : groups) pools.push_back(&idx);

  Rng rng(derive_seed(seed, streams::kBufferSelect, static_cast<std::uint64_t>(task_id)));
  if (pools.size() < budget.ids_per_task) {
    spdlog::warn("buffer_update: task {} has {} identities, budget is {}; storing all", task_id, pools.size(),
                 budget.ids_per_task);
  }
  auto chosen_ids = rng.choose(pools.size(), std::min(pools.size(), budget.ids_per_task));
  std::sort(chosen_ids.begin(), chosen_ids.end());

  std::vector<data::IdentitySample> stored;
  bool short_identity = false;
  for (auto id : chosen_ids) {
    const auto& pool = *pools[id];
    short_identity |= pool.size() < budget.imgs_per_id;
    auto picks = rng.choose(pool.size(), std::min(pool.size(), budget.imgs_per_id));
    std::sort(picks.begin(), picks.end());
    for (auto j : picks) stored.push_back(finished.samples[pool[j]]);
  }
  if (short_identity) {
    spdlog::warn("buffer_update: task {} has identities with fewer than {} images; storing all of them", task_id,
                 budget.imgs_per_id);
  }
  buffer.append(task_id, std::move(stored));
}

template <typename T>
void save_pair(const std::filesystem::path& path, const ModelPair<T>& pair, const std::string& config_text,
               const std::string& metadata)
{
  check_congruent(pair);
  Checkpoint<T> ckpt;
  ckpt.config = config_text;
  std::ostringstream meta;
  meta << metadata;
  for (const auto& [task_id, range] : pair.learner.head().tasks()) {
    meta << "head.task " << task_id << ' ' << range.first << ' ' << range.second << '\n';
  }
  ckpt.metadata = meta.str();
  for (const auto& p : pair.learner.params()) ckpt.tensors.push_back({"learner." + p.name, p.var.value()});
  for (const auto& p : pair.adjustment.params()) ckpt.tensors.push_back({"adjustment." + p.name, p.var.value()});
  write_checkpoint(path, ckpt);
}

template <typename T>
ModelPair<T> load_pair(const std::filesystem::path& path, const BackboneConfig& config, bool clamp_weights, double k)
{
  const auto ckpt = read_checkpoint<T>(path);
  auto pair = ModelPair<T>::create(config, 0, clamp_weights, k);

  std::istringstream meta(ckpt.metadata);
  std::string line;
  std::vector<std::tuple<int, std::int64_t, std::size_t>> registrations;
  while (std::getline(meta, line)) {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key != "head.task") continue;
    int task_id = 0;
    std::int64_t offset = 0;
    std::size_t count = 0;
    if (!(fields >> task_id >> offset >> count)) throw CheckpointError("malformed head registration: " + line);
    registrations.emplace_back(task_id, offset, count);
  }
  std::sort(registrations.begin(), registrations.end(),
            [](const auto& a, const auto& b) { return std::get<1>(a) < std::get<1>(b); });
  for (const auto& [task_id, offset, count] : registrations) {
    if (pair.register_task(task_id, count, 0) != offset) {
      throw CheckpointError("head registration offsets are not contiguous");
    }
  }

  for (auto* model : {&pair.learner, &pair.adjustment}) {
    const std::string prefix = model == &pair.learner ? "learner." : "adjustment.";
    for (const auto& p : model->params()) {
      const auto& stored = ckpt.get(prefix + p.name);
      p.var.value().require_same_shape(stored, p.name.c_str());
      auto v = p.var;
      v.mutable_value() = stored;
    }
  }
  return pair;
}

#define DRE_INSTANTIATE_PAIR(T)                                                                        \
  template struct ModelPair<T>;                                                                        \
  template void ema_update(ModelPair<T>&);                                                             \
  template void check_congruent(const ModelPair<T>&);                                                  \
  template void save_pair(const std::filesystem::path&, const ModelPair<T>&, const std::string&,       \
                          const std::string&);                                                         \
  template ModelPair<T> load_pair(const std::filesystem::path&, const BackboneConfig&, bool, double);

DRE_INSTANTIATE_PAIR(float)
DRE_INSTANTIATE_PAIR(double)

}  // namespace dre::lifelong
