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

#include "dre/cli/gradcheck_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "dre/acm/acm.hpp"
#include "dre/objectives/losses.hpp"

namespace dre::cli {

namespace {

constexpr std::size_t kBatch = 8;
constexpr std::size_t kDim = 8;
constexpr std::size_t kClasses = 5;
const objectives::Labels kLabels{0, 0, 1, 1, 2, 2, 3, 3};

Tensor<double> random_tensor(Rng& rng, Shape shape, double scale = 1.0)
{
  Tensor<double> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

/// Representations of one batch from leaves [P, A^1..A^S] starting at `first`.
Representations<double> reps_from(const std::vector<Var<double>>& leaves, std::size_t first, std::size_t s)
{
  Representations<double> r;
  r.primary = leaves[first];
  for (std::size_t i = 0; i < s; ++i) r.auxiliary.push_back(leaves[first + 1 + i]);
  r.integrated = acm::integrate(r.primary, r.auxiliary).integrated;
  r.batch = kBatch;
  return r;
}

Representations<double> constant_reps(Rng& rng, std::size_t s)
{
  std::vector<Var<double>> leaves;
  for (std::size_t i = 0; i <= s; ++i) leaves.push_back(Var<double>::constant(random_tensor(rng, {kBatch, kDim})));
  NoGradGuard no_grad;
  return reps_from(leaves, 0, s);
}

}  // namespace

GradcheckEntry check_loss(const std::string& loss, std::size_t aux_tokens, std::uint64_t seed,
                          const LossBuilder& build, const std::vector<Tensor<double>>& inputs, double tolerance)
{
  const auto r = check_gradients(build, inputs);
  return {loss, aux_tokens, seed, r.max_relative_error, r.max_relative_error < tolerance};
}

std::vector<GradcheckEntry> run_gradcheck_suite(const GradcheckSuiteOptions& options)
{
  using V = Var<double>;
  std::vector<GradcheckEntry> out;
  const double margin = 0.0;
  const double tau = 2.0;

  for (const auto s : options.aux_tokens) {
    for (const auto seed : options.seeds) {
      Rng rng(derive_seed(seed, streams::kInit, s));
      auto add = [&](const std::string& name, const LossBuilder& build, const std::vector<Tensor<double>>& inputs) {
        out.push_back(check_loss(name, s, seed, build, inputs, options.tolerance));
      };
      std::vector<Tensor<double>> rep_inputs;
      for (std::size_t i = 0; i <= s; ++i) rep_inputs.push_back(random_tensor(rng, {kBatch, kDim}));
      const auto weight = random_tensor(rng, {kClasses, kDim}, 0.5);
      const auto logits = random_tensor(rng, {kBatch, kClasses});
      const V adj_logits = V::constant(random_tensor(rng, {kBatch, kClasses}));
      const V adj_old_logits = V::constant(random_tensor(rng, {kBatch, kClasses}));
      const auto adj_old = constant_reps(rng, s);
      const V adj_old_stack = [&] {
        NoGradGuard no_grad;
        return objectives::stack_representations(adj_old);
      }();

      std::vector<Tensor<double>> aux_only(rep_inputs.begin() + 1, rep_inputs.end());
      add("orthogonal", [](const std::vector<V>& l) { return acm::orthogonal_loss(l); }, aux_only);

      add("id", [](const std::vector<V>& l) { return objectives::id_loss(l[0], kLabels); }, {logits});

      add("triplet", [&](const std::vector<V>& l) {
        return objectives::representation_triplet(reps_from(l, 0, s), kLabels, margin);
      }, rep_inputs);

      add("lld", [&](const std::vector<V>& l) { return objectives::lld_loss(adj_logits, l[0], tau); }, {logits});

      add("consistent", [&](const std::vector<V>& l) {
        return objectives::consistent_loss(adj_old_stack, objectives::stack_representations(reps_from(l, 0, s)));
      }, rep_inputs);

      add("lls", [&](const std::vector<V>& l) { return objectives::lls_loss(adj_old_logits, l[0]); }, {logits});

      auto base_inputs = rep_inputs;
      base_inputs.push_back(weight);
      auto base = [&](const std::vector<V>& l) {
        const auto reps = reps_from(l, 0, s);
        const auto z = ops::matmul_nt(reps.integrated, l[s + 1]);
        return objectives::base_loss(objectives::id_loss(z, kLabels),
                                     objectives::representation_triplet(reps, kLabels, margin),
                                     acm::orthogonal_loss(reps.auxiliary));
      };
      add("base", base, base_inputs);

      auto rla = [&](const std::vector<V>& l) {
        const auto reps = reps_from(l, 0, s);
        return objectives::rla_loss(objectives::representation_triplet(reps, kLabels, margin),
                                    objectives::consistent_loss(adj_old_stack, objectives::stack_representations(reps)));
      };
      add("rla", rla, rep_inputs);

      // New batch [P, A..], old batch [P, A..], head weight.
      std::vector<Tensor<double>> total_inputs = rep_inputs;
      for (std::size_t i = 0; i <= s; ++i) total_inputs.push_back(random_tensor(rng, {kBatch, kDim}));
      total_inputs.push_back(weight);
      add("total", [&](const std::vector<V>& l) {
        const auto fresh = reps_from(l, 0, s);
        const auto old = reps_from(l, s + 1, s);
        const auto& w = l[2 * s + 2];
        const auto z_new = ops::matmul_nt(fresh.integrated, w);
        const auto z_old = ops::matmul_nt(old.integrated, w);
        const auto b = objectives::base_loss(objectives::id_loss(z_new, kLabels),
                                             objectives::representation_triplet(fresh, kLabels, margin),
                                             acm::orthogonal_loss(fresh.auxiliary));
        const auto r = objectives::rla_loss(
          objectives::representation_triplet(old, kLabels, margin),
          objectives::consistent_loss(adj_old_stack, objectives::stack_representations(old)));
        return objectives::total_loss(b, objectives::lld_loss(adj_logits, z_new, tau), r,
                                      objectives::lls_loss(adj_old_logits, z_old));
      }, total_inputs);
    }
  }
  return out;
}

std::string format_gradcheck(const std::vector<GradcheckEntry>& entries)
{
  std::vector<std::pair<std::string, std::size_t>> order;
  std::map<std::pair<std::string, std::size_t>, GradcheckEntry> worst;
  for (const auto& e : entries) {
    const auto key = std::make_pair(e.loss, e.aux_tokens);
    auto it = worst.find(key);
    if (it == worst.end()) {
      order.push_back(key);
      worst.emplace(key, e);
    } else if (e.max_relative_error > it->second.max_relative_error) {
      it->second = e;
    }
  }
  std::ostringstream os;
  char line[160];
  for (const auto& key : order) {
    const auto& e = worst.at(key);
    std::snprintf(line, sizeof(line), "%s %-11s S=%zu max_rel_err=%.3e\n", e.passed ? "PASS" : "FAIL", e.loss.c_str(),
                  e.aux_tokens, e.max_relative_error);
    os << line;
  }
  return os.str();
}

bool all_passed(const std::vector<GradcheckEntry>& entries)
{
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

}  // namespace dre::cli
