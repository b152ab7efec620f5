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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dre/data/sampler.hpp"
#include "dre/data/tasks.hpp"
#include "dre/evalkit/evalkit.hpp"
#include "dre/lifelong/pair.hpp"
#include "dre/objectives/losses.hpp"

namespace dre::lifelong {

struct LossConfig {
  double tau = 2.0;
  double margin = 0.0;
  objectives::TripletMode triplet_mode = objectives::TripletMode::kConcat;
  bool ort = true;
  bool lld = true;
  bool rla = true;
  bool lls = true;
  double w_id = 1.0;
  double w_triplet = 1.0;
  double w_ort = 1.0;
  double w_lld = 1.0;
  double w_triplet_old = 1.0;
  double w_consistent = 1.0;
  double w_lls = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t ids_per_batch = 8;  // P
  std::size_t instances = 4;      // K
  double lr = 0.0032;
  double momentum = 0.9;
  LrSchedule schedule = LrSchedule::kCosine;
  double ema_k = 0.996;
  bool clamp_weights = false;
  bool buffer_enabled = true;
  BufferBudget buffer;
  LossConfig loss;
  std::uint64_t seed = 0;
};

/// Unweighted values of the seven terms plus the weighted total.
struct StepLosses {
  double id = 0.0;
  double triplet_new = 0.0;
  double ort = 0.0;
  double lld = 0.0;
  double triplet_old = 0.0;
  double consistent = 0.0;
  double lls = 0.0;
  double total = 0.0;
  double lr = 0.0;
  std::vector<double> omega;  // batch mean of omega_s on new instances
  double aux_abs_cos = 0.0;
};

using MetricSink = std::function<void(const nlohmann::json&)>;

template <typename T>
class Trainer {
public:
  Trainer(const BackboneConfig& backbone, const TrainConfig& config);

  /// Registers the task's classes in both heads and resets the optimizer for
  /// epochs * steps_per_epoch steps. Throws on an empty training set or when the
  /// task's labels do not start at the next free class index.
  void begin_task(const data::TaskData& task);

  /// One optimizer step on the current task followed by the EMA update.
  StepLosses step(const data::Dataset& train);

  /// Stores exemplars of the finished task (when the buffer is enabled).
  void end_task(const data::TaskData& task);

  /// begin_task, epochs of steps with one record per epoch, end_task.
  void train_task(const data::TaskData& task, const MetricSink& sink);

  std::size_t steps_per_epoch(const data::Dataset& train) const;

  ModelPair<T>& pair() { return pair_; }
  const ModelPair<T>& pair() const { return pair_; }
  const MemoryBuffer& buffer() const { return buffer_; }
  const TrainConfig& config() const { return config_; }
  const SgdMomentum<T>& optimizer() const { return *optimizer_; }

private:
  data::PKBatch draw_buffer_batch(std::uint64_t step) const;

  TrainConfig config_;
  ModelPair<T> pair_;
  MemoryBuffer buffer_;
  std::optional<SgdMomentum<T>> optimizer_;
  int task_id_ = -1;
  std::uint64_t task_step_ = 0;
};

struct StreamOptions {
  evalkit::EvalOptions eval;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::string config_text;               // echoed into checkpoints
};

struct StreamResult {
  std::vector<evalkit::IncrementalReport> after_task;
  evalkit::IncrementalReport final_report;
  double heldout_aux_cosine = 0.0;  // learner, last task's test images
};

/// Trains the tasks in order; after each task evaluates every task seen so far
/// (and the unseen sets) and writes checkpoint task{t}_epoch{e}.
template <typename T>
StreamResult run_stream(Trainer<T>& trainer, const std::vector<data::TaskData>& tasks,
                        const std::vector<data::TaskData>& unseen, const StreamOptions& options,
                        const MetricSink& sink);

}  // namespace dre::lifelong
