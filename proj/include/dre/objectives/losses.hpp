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

#include "dre/backbone/backbone.hpp"
#include "dre/numerics/ops.hpp"

namespace dre::objectives {

using Labels = std::vector<std::int64_t>;

class SamplerContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Row indices of a mined triplet per anchor.
struct TripletIndices {
  std::vector<std::size_t> anchor;
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

template <typename T>
struct TripletBatch {
  Var<T> anchor;
  Var<T> positive;
  Var<T> negative;
};

/// Batch-hard mining under euclidean distance: for every anchor the farthest
/// same-label row and the nearest other-label row. Ties go to the lower index.
template <typename T>
TripletIndices mine_triplets(const Tensor<T>& features, const Labels& labels);

template <typename T>
TripletBatch<T> gather_triplets(const Var<T>& features, const TripletIndices& idx);

/// mean_i max(d(a,p) - d(a,n) + margin, 0)
template <typename T>
Var<T> triplet_loss(const TripletBatch<T>& batch, T margin);

enum class TripletMode {
  kConcat,   ///< one triplet over [P-hat; A^1; ...; A^S] concatenated along features
  kAverage,  ///< separate triplet per representation, averaged
};

/// Triplet on a representation set (uses `integrated` as the primary).
template <typename T>
Var<T> representation_triplet(const Representations<T>& reps, const Labels& labels, T margin,
                              TripletMode mode = TripletMode::kConcat);

/// [P-hat; A^1; ...; A^S] concatenated along features, B x (S+1)D.
template <typename T>
Var<T> concat_features(const Representations<T>& reps);

/// [P-hat; A^1; ...; A^S] stacked along rows, (S+1)B x D.
template <typename T>
Var<T> stack_representations(const Representations<T>& reps);

/// Mean cross-entropy of integer labels. Throws on out-of-range labels.
template <typename T>
Var<T> id_loss(const Var<T>& logits, const Labels& labels);

/// Mean KL(softmax(adj / tau) || softmax(learner / tau)); the adjustment side is constant.
template <typename T>
Var<T> lld_loss(const Var<T>& adjustment_logits, const Var<T>& learner_logits, T tau);

/// Mean absolute difference between the row-cosine matrices of two stacks;
/// the adjustment stack is constant.
template <typename T>
Var<T> consistent_loss(const Var<T>& adjustment_stack, const Var<T>& learner_stack);

/// Mean soft-target cross-entropy -sum softmax(adj) * log softmax(learner); adjustment constant.
template <typename T>
Var<T> lls_loss(const Var<T>& adjustment_logits, const Var<T>& learner_logits);

template <typename T>
Var<T> base_loss(const Var<T>& id, const Var<T>& triplet_new, const Var<T>& orthogonal);

template <typename T>
Var<T> rla_loss(const Var<T>& triplet_old, const Var<T>& consistent);

template <typename T>
Var<T> total_loss(const Var<T>& base, const Var<T>& lld, const Var<T>& rla, const Var<T>& lls);

template <typename T>
Var<T> zero_loss()
{
  return Var<T>::constant(Tensor<T>::scalar(T(0)));
}

}  // namespace dre::objectives
