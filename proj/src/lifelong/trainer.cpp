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

#include "dre/lifelong/trainer.hpp"

#include <algorithm>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "dre/acm/acm.hpp"
#include "dre/numerics/rng.hpp"

namespace dre::lifelong {

namespace {

template <typename T>
Var<T> weighted(const Var<T>& term, double w)
{
  return w == 1.0 ? term : ops::scale(term, static_cast<T>(w));
}

template <typename T>
double item(const Var<T>& v)
{
  return static_cast<double>(v.value().item());
}

std::uint64_t step_key(int task_id, std::uint64_t step, std::uint64_t pass)
{
  return (static_cast<std::uint64_t>(task_id) << 40) ^ (step << 2) ^ pass;
}

}  // namespace

template <typename T>
Trainer<T>::Trainer(const BackboneConfig& backbone, const TrainConfig& config)
    : config_(config),
      pair_(ModelPair<T>::create(backbone, config.seed, config.clamp_weights, config.ema_k)),
      buffer_(config.buffer)
{
  if (config_.ids_per_batch < 2) throw std::invalid_argument("train.ids_per_batch: must be at least 2");
  if (config_.instances < 2) throw std::invalid_argument("train.instances: must be at least 2");
  if (config_.epochs == 0) throw std::invalid_argument("train.epochs: must be positive");
}

template <typename T>
std::size_t Trainer<T>::steps_per_epoch(const data::Dataset& train) const
{
  const std::size_t batch = config_.ids_per_batch * config_.instances;
  return std::max<std::size_t>(1, (train.size() + batch - 1) / batch);
}

template <typename T>
void Trainer<T>::begin_task(const data::TaskData& task)
{
  if (task.train.empty()) throw std::invalid_argument("task " + task.name + ": empty training set");
  const auto groups = task.train.index_by_identity();
  const auto expected = static_cast<std::int64_t>(pair_.learner.head().classes());
  if (groups.begin()->first != expected || groups.rbegin()->first != expected + static_cast<std::int64_t>(groups.size()) - 1) {
    throw std::invalid_argument("task " + task.name + ": labels must be contiguous from class " + std::to_string(expected));
  }
  pair_.register_task(task.task_id, groups.size(), config_.seed);
  check_congruent(pair_);

  OptimizerState state;
  state.base_lr = config_.lr;
  state.momentum = config_.momentum;
  state.schedule = config_.schedule;
  state.total_steps = static_cast<std::int64_t>(config_.epochs * steps_per_epoch(task.train));
  optimizer_.emplace(state);
  task_id_ = task.task_id;
  task_step_ = 0;
}

template <typename T>
data::PKBatch Trainer<T>::draw_buffer_batch(std::uint64_t step) const
{
  const auto& stored = buffer_.samples();
  const std::size_t k = std::max<std::size_t>(2, buffer_.budget().imgs_per_id);
  const std::size_t ids = std::min(stored.identity_count(), config_.ids_per_batch * config_.instances / k);
  const auto seed = derive_seed(config_.seed, streams::kBufferSampler, static_cast<std::uint64_t>(task_id_));
  return data::pk_sample(stored, ids, k, seed, step);
}

template <typename T>
StepLosses Trainer<T>::step(const data::Dataset& train)
{
  if (!optimizer_) throw std::logic_error("trainer: step before begin_task");
  const auto& lc = config_.loss;
  const T tau = static_cast<T>(lc.tau);
  const T margin = static_cast<T>(lc.margin);
  const std::uint64_t s = task_step_;
  StepLosses out;

  const auto sample_seed = derive_seed(config_.seed, streams::kSampler, static_cast<std::uint64_t>(task_id_));
  const auto batch = data::pk_sample(train, config_.ids_per_batch, config_.instances, sample_seed, s);
  const auto images = data::stack_images<T>(train, batch.indices);

  const bool use_dropout = pair_.learner.config().dropout > 0.0;
  auto dropout_rng = [&](std::uint64_t pass) {
    return Rng(derive_seed(config_.seed, streams::kDropout, step_key(task_id_, s, pass)));
  };

  Rng drop_new = dropout_rng(0);
  const auto learner_new = pair_.learner.forward(images, nullptr, use_dropout ? &drop_new : nullptr);
  const auto id = objectives::id_loss(learner_new.logits, batch.labels);
  const auto trip_new = objectives::representation_triplet(learner_new.reps, batch.labels, margin, lc.triplet_mode);
  const auto ort = lc.ort ? acm::orthogonal_loss(learner_new.reps.auxiliary) : objectives::zero_loss<T>();

  auto lld = objectives::zero_loss<T>();
  if (lc.lld) {
    ModelOutput<T> adjustment_new;
    {
      NoGradGuard no_grad;
      adjustment_new = pair_.adjustment.forward(images);
    }
    lld = objectives::lld_loss(adjustment_new.logits, learner_new.logits, tau);
  }

  auto trip_old = objectives::zero_loss<T>();
  auto consistent = objectives::zero_loss<T>();
  auto lls = objectives::zero_loss<T>();
  const bool replay = config_.buffer_enabled && (lc.rla || lc.lls) && buffer_.samples().identity_count() >= 2;
  if (replay) {
    const auto old_batch = draw_buffer_batch(s);
    const auto old_images = data::stack_images<T>(buffer_.samples(), old_batch.indices);
    Rng drop_old = dropout_rng(1);
    const auto learner_old = pair_.learner.forward(old_images, nullptr, use_dropout ? &drop_old : nullptr);
    ModelOutput<T> adjustment_old;
    {
      NoGradGuard no_grad;
      adjustment_old = pair_.adjustment.forward(old_images);
    }
    if (lc.rla) {
      trip_old = objectives::representation_triplet(learner_old.reps, old_batch.labels, margin, lc.triplet_mode);
      consistent = objectives::consistent_loss(objectives::stack_representations(adjustment_old.reps),
                                               objectives::stack_representations(learner_old.reps));
    }
    if (lc.lls) lls = objectives::lls_loss(adjustment_old.logits, learner_old.logits);
  }

  const auto base = objectives::base_loss(weighted(id, lc.w_id), weighted(trip_new, lc.w_triplet),
                                          weighted(ort, lc.w_ort));
  const auto rla = objectives::rla_loss(weighted(trip_old, lc.w_triplet_old), weighted(consistent, lc.w_consistent));
  const auto total = objectives::total_loss(base, weighted(lld, lc.w_lld), rla, weighted(lls, lc.w_lls));

  auto params = pair_.learner.params();
  const auto grads = gradient_of(total, param_vars(params));
  out.lr = optimizer_->state().current_lr();
  optimizer_->step(params, grads);
  ema_update(pair_);
  ++task_step_;

  out.id = item(id);
  out.triplet_new = item(trip_new);
  out.ort = item(ort);
  out.lld = item(lld);
  out.triplet_old = item(trip_old);
  out.consistent = item(consistent);
  out.lls = item(lls);
  out.total = item(total);
  for (const auto& w : learner_new.weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.value().size(); ++i) acc += static_cast<double>(w.value()[i]);
    out.omega.push_back(acc / static_cast<double>(w.value().size()));
  }
  out.aux_abs_cos = acm::mean_pairwise_abs_cosine(learner_new.reps.auxiliary);
  return out;
}

template <typename T>
void Trainer<T>::end_task(const data::TaskData& task)
{
  if (config_.buffer_enabled) buffer_update(buffer_, task.train, task.task_id, config_.seed);
}

template <typename T>
void Trainer<T>::train_task(const data::TaskData& task, const MetricSink& sink)
{
  begin_task(task);
  const std::size_t per_epoch = steps_per_epoch(task.train);
  for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
    StepLosses mean;
    for (std::size_t i = 0; i < per_epoch; ++i) {
      const auto l = step(task.train);
      mean.id += l.id;
      mean.triplet_new += l.triplet_new;
      mean.ort += l.ort;
      mean.lld += l.lld;
      mean.triplet_old += l.triplet_old;
      mean.consistent += l.consistent;
      mean.lls += l.lls;
      mean.total += l.total;
      mean.aux_abs_cos += l.aux_abs_cos;
      mean.omega.resize(l.omega.size(), 0.0);
      for (std::size_t s = 0; s < l.omega.size(); ++s) mean.omega[s] += l.omega[s];
      mean.lr = l.lr;
    }
    const auto n = static_cast<double>(per_epoch);
    for (auto& w : mean.omega) w /= n;
    if (sink) {
      sink({{"type", "epoch"},
            {"task", task.task_id},
            {"dataset", task.name},
            {"epoch", epoch},
            {"steps", per_epoch},
            {"lr", mean.lr},
            {"loss",
             {{"id", mean.id / n},
              {"triplet_new", mean.triplet_new / n},
              {"ort", mean.ort / n},
              {"lld", mean.lld / n},
              {"triplet_old", mean.triplet_old / n},
              {"consistent", mean.consistent / n},
              {"lls", mean.lls / n},
              {"total", mean.total / n}}},
            {"omega", mean.omega},
            {"aux_abs_cos", mean.aux_abs_cos / n},
            {"buffer_size", buffer_.size()}});
    }
  }
  end_task(task);
}

template <typename T>
StreamResult run_stream(Trainer<T>& trainer, const std::vector<data::TaskData>& tasks,
                        const std::vector<data::TaskData>& unseen, const StreamOptions& options,
                        const MetricSink& sink)
{
  if (tasks.empty()) throw std::invalid_argument("run_stream: no tasks");
  StreamResult result;
  std::vector<data::TaskData> seen;
  for (const auto& task : tasks) {
    spdlog::info("training task {} ({}): {} images", task.task_id, task.name, task.train.size());
    trainer.train_task(task, sink);
    seen.push_back(task);
    auto report = evalkit::incremental_report(trainer.pair(), seen, unseen, options.eval);
    if (sink) {
      for (auto rec : evalkit::report_records(report)) {
        rec["after_task"] = task.task_id;
        sink(rec);
      }
    }
    if (!options.checkpoint_dir.empty()) {
      const auto name = "task" + std::to_string(task.task_id) + "_epoch" + std::to_string(trainer.config().epochs);
      save_pair(options.checkpoint_dir / (name + ".ckpt"), trainer.pair(), options.config_text,
                "after_task " + std::to_string(task.task_id) + "\n");
    }
    result.after_task.push_back(std::move(report));
  }
  result.final_report = result.after_task.back();
  const auto& last = tasks.back();
  data::Dataset heldout = last.query;
  heldout.samples.insert(heldout.samples.end(), last.gallery.samples.begin(), last.gallery.samples.end());
  result.heldout_aux_cosine = evalkit::heldout_aux_cosine(trainer.pair().learner, heldout);
  if (sink) {
    sink({{"type", "summary"},
          {"seen_map", result.final_report.seen_map},
          {"seen_rank1", result.final_report.seen_rank1},
          {"unseen_map", result.final_report.unseen_map},
          {"unseen_rank1", result.final_report.unseen_rank1},
          {"heldout_aux_abs_cos", result.heldout_aux_cosine}});
  }
  return result;
}

#define DRE_INSTANTIATE_TRAINER(T)                                                                      \
  template class Trainer<T>;                                                                            \
  template StreamResult run_stream(Trainer<T>&, const std::vector<data::TaskData>&,                     \
                                   const std::vector<data::TaskData>&, const StreamOptions&,            \
                                   const MetricSink&);

DRE_INSTANTIATE_TRAINER(float)
DRE_INSTANTIATE_TRAINER(double)

}  // namespace dre::lifelong
