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

#include "dre/objectives/losses.hpp"

#include <limits>
#include <set>
#include <string>

namespace dre::objectives {

namespace {

template <typename T>
void require_same_width(const Var<T>& a, const Var<T>& b, const char* what)
{
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": class-width mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

}  // namespace

template <typename T>
TripletIndices mine_triplets(const Tensor<T>& features, const Labels& labels)
{
  const std::size_t n = features.rows();
  if (labels.size() != n) {
    throw ShapeError("mine_triplets: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  const auto f = features.mat().template cast<double>().eval();
  Eigen::MatrixXd dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      dist(i, j) = (f.row(i) - f.row(j)).norm();
    }
  }
  TripletIndices out;
  for (std::size_t a = 0; a < n; ++a) {
    std::size_t pos = n;
    std::size_t neg = n;
    double pos_d = -1.0;
    double neg_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (dist(a, j) > pos_d) {
          pos_d = dist(a, j);
          pos = j;
        }
      } else if (dist(a, j) < neg_d) {
        neg_d = dist(a, j);
        neg = j;
      }
    }
    if (pos == n) {
      throw SamplerContractError("mine_triplets: identity " + std::to_string(labels[a]) +
                                 " has a single instance in the batch");
    }
    if (neg == n) {
      throw SamplerContractError("mine_triplets: batch holds a single identity");
    }
    out.anchor.push_back(a);
    out.positive.push_back(pos);
    out.negative.push_back(neg);
  }
  return out;
}

template <typename T>
TripletBatch<T> gather_triplets(const Var<T>& features, const TripletIndices& idx)
{
  return {ops::gather_rows(features, idx.anchor), ops::gather_rows(features, idx.positive),
          ops::gather_rows(features, idx.negative)};
}

template <typename T>
Var<T> triplet_loss(const TripletBatch<T>& batch, T margin)
{
  auto dap = ops::distance_rows(batch.anchor, batch.positive);
  auto dan = ops::distance_rows(batch.anchor, batch.negative);
  return ops::mean(ops::relu(ops::add_scalar(ops::sub(dap, dan), margin)));
}

template <typename T>
Var<T> concat_features(const Representations<T>& reps)
{
  std::vector<Var<T>> parts{reps.integrated.defined() ? reps.integrated : reps.primary};
  parts.insert(parts.end(), reps.auxiliary.begin(), reps.auxiliary.end());
  return parts.size() == 1 ? parts.front() : ops::concat_cols(parts);
}

template <typename T>
Var<T> stack_representations(const Representations<T>& reps)
{
  std::vector<Var<T>> parts{reps.integrated.defined() ? reps.integrated : reps.primary};
  parts.insert(parts.end(), reps.auxiliary.begin(), reps.auxiliary.end());
  return parts.size() == 1 ? parts.front() : ops::concat_rows(parts);
}

template <typename T>
Var<T> representation_triplet(const Representations<T>& reps, const Labels& labels, T margin,
                              TripletMode mode)
{
  if (mode == TripletMode::kConcat) {
    auto features = concat_features(reps);
    return triplet_loss(gather_triplets(features, mine_triplets(features.value(), labels)), margin);
  }
  std::vector<Var<T>> parts{reps.integrated.defined() ? reps.integrated : reps.primary};
  parts.insert(parts.end(), reps.auxiliary.begin(), reps.auxiliary.end());
  Var<T> acc;
  for (const auto& f : parts) {
    auto l = triplet_loss(gather_triplets(f, mine_triplets(f.value(), labels)), margin);
    acc = acc.defined() ? ops::add(acc, l) : l;
  }
  return ops::scale(acc, T(1) / static_cast<T>(parts.size()));
}

template <typename T>
Var<T> id_loss(const Var<T>& logits, const Labels& labels)
{
  const std::size_t rows = logits.rows();
  const std::size_t width = logits.cols();
  if (labels.size() != rows) {
    throw ShapeError("id_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  Tensor<T> onehot(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= width) {
      throw std::out_of_range("id_loss: label " + std::to_string(labels[r]) +
                              " outside registered classes [0, " + std::to_string(width) + ")");
    }
    onehot.at(r, static_cast<std::size_t>(labels[r])) = T(1);
  }
  auto picked = ops::sum(ops::mul(ops::log_softmax(logits), Var<T>::constant(std::move(onehot))));
  return ops::scale(picked, T(-1) / static_cast<T>(rows));
}

template <typename T>
Var<T> lld_loss(const Var<T>& adjustment_logits, const Var<T>& learner_logits, T tau)
{
  require_same_width(adjustment_logits, learner_logits, "lld_loss");
  if (!(tau > T(0))) throw std::invalid_argument("lld_loss: temperature must be positive");
  const T inv_tau = T(1) / tau;
  Tensor<T> log_p;
  {
    NoGradGuard guard;
    log_p = ops::log_softmax(ops::scale(ops::detach(adjustment_logits), inv_tau)).value();
  }
  Tensor<T> p(log_p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(log_p[i]);
  auto log_q = ops::log_softmax(ops::scale(learner_logits, inv_tau));
  auto diff = ops::sub(Var<T>::constant(std::move(log_p)), log_q);
  auto kl = ops::sum(ops::mul(Var<T>::constant(std::move(p)), diff));
  return ops::scale(kl, T(1) / static_cast<T>(learner_logits.rows()));
}

template <typename T>
Var<T> consistent_loss(const Var<T>& adjustment_stack, const Var<T>& learner_stack)
{
  if (adjustment_stack.shape() != learner_stack.shape()) {
    throw ShapeError("consistent_loss: stack shapes differ " + shape_string(adjustment_stack.shape()) +
                     " vs " + shape_string(learner_stack.shape()));
  }
  Tensor<T> target;
  {
    NoGradGuard guard;
    auto na = ops::normalize_rows(ops::detach(adjustment_stack));
    target = ops::matmul_nt(na, na).value();
  }
  auto nl = ops::normalize_rows(learner_stack);
  auto sim = ops::matmul_nt(nl, nl);
  return ops::mean(ops::abs(ops::sub(Var<T>::constant(std::move(target)), sim)));
}

template <typename T>
Var<T> lls_loss(const Var<T>& adjustment_logits, const Var<T>& learner_logits)
{
  require_same_width(adjustment_logits, learner_logits, "lls_loss");
  Tensor<T> p;
  {
    NoGradGuard guard;
    p = ops::log_softmax(ops::detach(adjustment_logits)).value();
  }
  for (auto& v : p.values()) v = std::exp(v);
  auto ce = ops::sum(ops::mul(Var<T>::constant(std::move(p)), ops::log_softmax(learner_logits)));
  return ops::scale(ce, T(-1) / static_cast<T>(learner_logits.rows()));
}

template <typename T>
Var<T> base_loss(const Var<T>& id, const Var<T>& triplet_new, const Var<T>& orthogonal)
{
  return ops::add(ops::add(id, triplet_new), orthogonal);
}

template <typename T>
Var<T> rla_loss(const Var<T>& triplet_old, const Var<T>& consistent)
{
  return ops::add(triplet_old, consistent);
}

template <typename T>
Var<T> total_loss(const Var<T>& base, const Var<T>& lld, const Var<T>& rla, const Var<T>& lls)
{
  return ops::add(ops::add(ops::add(base, lld), rla), lls);
}

#define DRE_INSTANTIATE_LOSSES(T)                                                                \
  template TripletIndices mine_triplets(const Tensor<T>&, const Labels&);                        \
  template TripletBatch<T> gather_triplets(const Var<T>&, const TripletIndices&);                \
  template Var<T> triplet_loss(const TripletBatch<T>&, T);                                       \
  template Var<T> representation_triplet(const Representations<T>&, const Labels&, T, TripletMode); \
  template Var<T> concat_features(const Representations<T>&);                                    \
  template Var<T> stack_representations(const Representations<T>&);                              \
  template Var<T> id_loss(const Var<T>&, const Labels&);                                         \
  template Var<T> lld_loss(const Var<T>&, const Var<T>&, T);                                     \
  template Var<T> consistent_loss(const Var<T>&, const Var<T>&);                                 \
  template Var<T> lls_loss(const Var<T>&, const Var<T>&);                                        \
  template Var<T> base_loss(const Var<T>&, const Var<T>&, const Var<T>&);                        \
  template Var<T> rla_loss(const Var<T>&, const Var<T>&);                                        \
  template Var<T> total_loss(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&);

DRE_INSTANTIATE_LOSSES(float)
DRE_INSTANTIATE_LOSSES(double)

}  // namespace dre::objectives
