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

#include "dre/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dre/acm/acm.hpp"
#include "dre/objectives/losses.hpp"

namespace dre::evalkit {

std::string to_string(FeatureKind kind)
{
  return kind == FeatureKind::kConcat ? "concat" : "integrated";
}

std::string to_string(EvalModel model)
{
  return model == EvalModel::kAdjustment ? "adjustment" : "learner";
}

FeatureKind parse_feature_kind(const std::string& text)
{
  if (text == "integrated") return FeatureKind::kIntegrated;
  if (text == "concat") return FeatureKind::kConcat;
  throw std::invalid_argument("unknown feature kind '" + text + "' (expected integrated|concat)");
}

EvalModel parse_eval_model(const std::string& text)
{
  if (text == "learner") return EvalModel::kLearner;
  if (text == "adjustment") return EvalModel::kAdjustment;
  throw std::invalid_argument("unknown eval model '" + text + "' (expected learner|adjustment)");
}

template <typename T>
LabeledFeatures embed_gallery(const lifelong::Model<T>& model, const data::Dataset& dataset, FeatureKind feature,
                              std::size_t batch)
{
  NoGradGuard no_grad;
  LabeledFeatures out;
  std::vector<double> rows;
  std::size_t width = 0;
  for (std::size_t start = 0; start < dataset.size(); start += batch) {
    const std::size_t stop = std::min(dataset.size(), start + batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto result = model.forward(data::stack_images<T>(dataset, idx));
    const auto f = feature == FeatureKind::kConcat ? objectives::concat_features(result.reps)
                                                   : result.reps.integrated;
    width = f.cols();
    const auto& v = f.value();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      double norm = 0.0;
      for (std::size_t c = 0; c < width; ++c) norm += static_cast<double>(v[r * width + c]) * v[r * width + c];
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < width; ++c) {
        rows.push_back(norm > 0.0 ? static_cast<double>(v[r * width + c]) / norm : 0.0);
      }
    }
  }
  for (const auto& s : dataset.samples) {
    out.person_ids.push_back(s.person_id);
    out.camera_ids.push_back(s.camera_id);
  }
  if (!dataset.empty()) out.features = Tensor<double>({dataset.size(), width}, std::move(rows));
  return out;
}

double average_precision(const std::vector<bool>& ranked_relevance)
{
  double hits = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < ranked_relevance.size(); ++i) {
    if (!ranked_relevance[i]) continue;
    hits += 1.0;
    acc += hits / static_cast<double>(i + 1);
  }
  return hits > 0.0 ? acc / hits : 0.0;
}

RetrievalResult evaluate(const LabeledFeatures& query, const LabeledFeatures& gallery)
{
  const std::size_t ng = gallery.size();
  if (query.size() == 0 || ng == 0) throw std::runtime_error("evaluate: empty query or gallery");
  const std::size_t d = query.features.cols();
  if (gallery.features.cols() != d) throw ShapeError("evaluate: query and gallery feature widths differ");

  RetrievalResult result;
  result.cmc.assign(ng, 0.0);
  std::vector<double> dist(ng);
  std::vector<std::size_t> order(ng);
  for (std::size_t q = 0; q < query.size(); ++q) {
    const double* qf = query.features.data() + q * d;
    for (std::size_t g = 0; g < ng; ++g) {
      const double* gf = gallery.features.data() + g * d;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += (qf[c] - gf[c]) * (qf[c] - gf[c]);
      dist[g] = acc;
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    std::vector<bool> relevance;
    relevance.reserve(ng);
    for (auto g : order) {
      const bool same_id = gallery.person_ids[g] == query.person_ids[q];
      if (same_id && gallery.camera_ids[g] == query.camera_ids[q]) continue;
      relevance.push_back(same_id);
    }
    const auto first = std::find(relevance.begin(), relevance.end(), true);
    if (first == relevance.end()) {
      ++result.skipped_queries;
      continue;
    }
    const auto rank = static_cast<std::size_t>(first - relevance.begin());
    for (std::size_t r = rank; r < ng; ++r) result.cmc[r] += 1.0;
    result.average_precision.push_back(average_precision(relevance));
  }
  result.evaluated_queries = result.average_precision.size();
  if (result.evaluated_queries == 0) throw std::runtime_error("evaluate: no query has a valid relevant gallery item");
  const auto n = static_cast<double>(result.evaluated_queries);
  for (auto& v : result.cmc) v /= n;
  result.mean_ap = std::accumulate(result.average_precision.begin(), result.average_precision.end(), 0.0) / n;
  result.rank1 = result.cmc[0];
  return result;
}

void finalize_averages(IncrementalReport& report)
{
  auto mean = [](const std::vector<DatasetScore>& rows, double DatasetScore::*field) {
    if (rows.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& r : rows) acc += r.*field;
    return acc / static_cast<double>(rows.size());
  };
  report.seen_map = mean(report.seen, &DatasetScore::mean_ap);
  report.seen_rank1 = mean(report.seen, &DatasetScore::rank1);
  report.unseen_map = mean(report.unseen, &DatasetScore::mean_ap);
  report.unseen_rank1 = mean(report.unseen, &DatasetScore::rank1);
}

template <typename T>
IncrementalReport incremental_report(const lifelong::ModelPair<T>& pair, const std::vector<data::TaskData>& seen,
                                     const std::vector<data::TaskData>& unseen, const EvalOptions& options)
{
  const auto& model = options.model == EvalModel::kAdjustment ? pair.adjustment : pair.learner;
  auto score = [&](const data::TaskData& task, bool is_seen) {
    const auto q = embed_gallery(model, task.query, options.feature, options.batch);
    const auto g = embed_gallery(model, task.gallery, options.feature, options.batch);
    const auto r = evaluate(q, g);
    return DatasetScore{task.name, is_seen, r.mean_ap, r.rank1};
  };
  IncrementalReport report;
  for (const auto& t : seen) report.seen.push_back(score(t, true));
  for (const auto& t : unseen) report.unseen.push_back(score(t, false));
  finalize_averages(report);
  return report;
}

template <typename T>
double heldout_aux_cosine(const lifelong::Model<T>& model, const data::Dataset& dataset, std::size_t batch)
{
  NoGradGuard no_grad;
  double weighted = 0.0;
  for (std::size_t start = 0; start < dataset.size(); start += batch) {
    const std::size_t stop = std::min(dataset.size(), start + batch);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto result = model.forward(data::stack_images<T>(dataset, idx));
    weighted += acm::mean_pairwise_abs_cosine(result.reps.auxiliary) * static_cast<double>(idx.size());
  }
  return dataset.empty() ? 0.0 : weighted / static_cast<double>(dataset.size());
}

std::vector<nlohmann::json> report_records(const IncrementalReport& report)
{
  std::vector<nlohmann::json> out;
  for (const auto* rows : {&report.seen, &report.unseen}) {
    for (const auto& r : *rows) {
      out.push_back({{"type", "result"}, {"dataset", r.name}, {"split", r.seen ? "seen" : "unseen"},
                     {"mAP", r.mean_ap}, {"rank1", r.rank1}});
    }
  }
  if (!report.seen.empty()) {
    out.push_back({{"type", "result"}, {"dataset", "seen-avg"}, {"split", "seen"},
                   {"mAP", report.seen_map}, {"rank1", report.seen_rank1}});
  }
  if (report.has_unseen()) {
    out.push_back({{"type", "result"}, {"dataset", "unseen-avg"}, {"split", "unseen"},
                   {"mAP", report.unseen_map}, {"rank1", report.unseen_rank1}});
  }
  return out;
}

std::string format_table(const IncrementalReport& report)
{
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-28s %-7s %7s %7s\n", "dataset", "split", "mAP", "R-1");
  os << line;
  auto row = [&](const std::string& name, const char* split, double map, double r1) {
    std::snprintf(line, sizeof(line), "%-28s %-7s %7.1f %7.1f\n", name.c_str(), split, 100.0 * map, 100.0 * r1);
    os << line;
  };
  for (const auto& r : report.seen) row(r.name, "seen", r.mean_ap, r.rank1);
  for (const auto& r : report.unseen) row(r.name, "unseen", r.mean_ap, r.rank1);
  if (!report.seen.empty()) row("seen-avg", "seen", report.seen_map, report.seen_rank1);
  if (report.has_unseen()) row("unseen-avg", "unseen", report.unseen_map, report.unseen_rank1);
  return os.str();
}

#define DRE_INSTANTIATE_EVALKIT(T)                                                                          \
  template LabeledFeatures embed_gallery(const lifelong::Model<T>&, const data::Dataset&, FeatureKind,        \
                                         std::size_t);                                                       \
  template IncrementalReport incremental_report(const lifelong::ModelPair<T>&,                                \
                                                const std::vector<data::TaskData>&,                          \
                                                const std::vector<data::TaskData>&, const EvalOptions&);     \
  template double heldout_aux_cosine(const lifelong::Model<T>&, const data::Dataset&, std::size_t);

DRE_INSTANTIATE_EVALKIT(float)
DRE_INSTANTIATE_EVALKIT(double)

}  // namespace dre::evalkit
