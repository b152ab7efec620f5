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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dre/data/tasks.hpp"
#include "dre/lifelong/pair.hpp"

namespace dre::evalkit {

/// Feature matrix [N, D] (row-major) with the identity and camera of every row.
struct LabeledFeatures {
  Tensor<double> features;
  std::vector<std::int64_t> person_ids;
  std::vector<int> camera_ids;

  std::size_t size() const { return person_ids.size(); }
};

struct RetrievalResult {
  std::vector<double> average_precision;  // one per evaluated query
  std::vector<double> cmc;                // cmc[r] = fraction of evaluated queries with a hit within rank r+1
  double mean_ap = 0.0;
  double rank1 = 0.0;
  std::size_t evaluated_queries = 0;
  std::size_t skipped_queries = 0;
};

enum class FeatureKind {
  kIntegrated,  ///< P-hat
  kConcat,      ///< [P-hat; A^1; ...; A^S]
};

enum class EvalModel { kLearner, kAdjustment };

struct EvalOptions {
  FeatureKind feature = FeatureKind::kIntegrated;
  EvalModel model = EvalModel::kLearner;
  std::size_t batch = 64;
};

std::string to_string(FeatureKind kind);
std::string to_string(EvalModel model);
FeatureKind parse_feature_kind(const std::string& text);
EvalModel parse_eval_model(const std::string& text);

/// L2-normalized retrieval features of every sample, computed in eval mode.
template <typename T>
LabeledFeatures embed_gallery(const lifelong::Model<T>& model, const data::Dataset& dataset,
                              FeatureKind feature = FeatureKind::kIntegrated, std::size_t batch = 64);

/// Euclidean ranking with ties broken by ascending gallery index. Gallery rows
/// sharing both identity and camera with the query are removed from its ranking;
/// queries left without a relevant item are skipped. Throws std::runtime_error
/// when every query is skipped.
RetrievalResult evaluate(const LabeledFeatures& query, const LabeledFeatures& gallery);

/// Average precision of a ranked relevance list: mean over hits of (hits so far / rank).
double average_precision(const std::vector<bool>& ranked_relevance);

struct DatasetScore {
  std::string name;
  bool seen = true;
  double mean_ap = 0.0;
  double rank1 = 0.0;
};

struct IncrementalReport {
  std::vector<DatasetScore> seen;
  std::vector<DatasetScore> unseen;
  double seen_map = 0.0;
  double seen_rank1 = 0.0;
  double unseen_map = 0.0;
  double unseen_rank1 = 0.0;

  bool has_unseen() const { return !unseen.empty(); }
};

/// Arithmetic means of the per-dataset values.
void finalize_averages(IncrementalReport& report);

template <typename T>
IncrementalReport incremental_report(const lifelong::ModelPair<T>& pair, const std::vector<data::TaskData>& seen,
                                     const std::vector<data::TaskData>& unseen, const EvalOptions& options = {});

/// Mean pairwise |cos(A^i, A^j)| of the learner's auxiliaries over `dataset`, eval mode.
template <typename T>
double heldout_aux_cosine(const lifelong::Model<T>& model, const data::Dataset& dataset, std::size_t batch = 64);

/// One record per dataset plus one per available average.
std::vector<nlohmann::json> report_records(const IncrementalReport& report);

/// Fixed-width table: dataset, split, mAP, R-1 (percent, one decimal).
std::string format_table(const IncrementalReport& report);

}  // namespace dre::evalkit
