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

#include "dre/cli/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dre/data/folder.hpp"
#include "dre/numerics/checkpoint.hpp"

namespace dre::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream os(path, std::ios::trunc);
  if (!os || !(os << text)) throw CommandError("io", "cannot write " + path.string());
}

class JsonlWriter {
public:
  explicit JsonlWriter(const fs::path& path) : path_(path)
  {
    if (!path.empty()) {
      os_.open(path, std::ios::trunc);
      if (!os_) throw CommandError("io", "cannot write " + path.string());
    }
  }

  void operator()(const nlohmann::json& record)
  {
    records.push_back(record);
    if (os_.is_open()) {
      os_ << record.dump() << '\n';
      os_.flush();
    }
  }

  std::vector<nlohmann::json> records;

private:
  fs::path path_;
  std::ofstream os_;
};

template <typename T>
lifelong::StreamResult train_with(const RunConfig& config, const std::vector<data::TaskData>& tasks,
                                  const std::vector<data::TaskData>& unseen, const fs::path& output_dir,
                                  const lifelong::MetricSink& sink)
{
  lifelong::Trainer<T> trainer(config.model, config.train_config());
  lifelong::StreamOptions options;
  options.eval = config.eval;
  options.config_text = serialize_config(config);
  if (!output_dir.empty()) options.checkpoint_dir = output_dir / "checkpoints";
  return lifelong::run_stream(trainer, tasks, unseen, options, sink);
}

template <typename T>
evalkit::IncrementalReport eval_with(const fs::path& checkpoint, const RunConfig& config,
                                     const std::vector<data::TaskData>& seen,
                                     const std::vector<data::TaskData>& unseen)
{
  const auto pair = lifelong::load_pair<T>(checkpoint, config.model, config.train.clamp_weights, config.train.ema_k);
  return evalkit::incremental_report(pair, seen, unseen, config.eval);
}

std::set<int> registered_tasks(const fs::path& checkpoint)
{
  const auto ckpt = read_checkpoint<float>(checkpoint);
  std::set<int> out;
  std::istringstream meta(ckpt.metadata);
  std::string line;
  while (std::getline(meta, line)) {
    std::istringstream fields(line);
    std::string key;
    int task_id = 0;
    if (fields >> key >> task_id && key == "head.task") out.insert(task_id);
  }
  return out;
}

}  // namespace

std::string error_line(const std::exception& e)
{
  std::string code = "internal";
  if (const auto* c = dynamic_cast<const CommandError*>(&e)) code = c->code();
  else if (dynamic_cast<const ConfigError*>(&e)) code = "config";
  else if (dynamic_cast<const CheckpointError*>(&e)) code = "checkpoint";
  else if (dynamic_cast<const NumericError*>(&e)) code = "numeric";
  else if (dynamic_cast<const ShapeError*>(&e)) code = "shape";
  else if (dynamic_cast<const fs::filesystem_error*>(&e)) code = "io";
  else if (dynamic_cast<const std::invalid_argument*>(&e)) code = "invalid";
  else if (dynamic_cast<const std::runtime_error*>(&e)) code = "runtime";
  std::string message = e.what();
  for (auto& ch : message) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return "error: " + code + ": " + message;
}

fs::path resolve_output_dir(const RunConfig& config)
{
  if (const char* env = std::getenv("DRE_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

RunOutcome run_training(const RunConfig& config, const fs::path& output_dir)
{
  config.validate();
  if (!output_dir.empty()) {
    fs::create_directories(output_dir);
    write_text(output_dir / "config.txt", serialize_config(config));
  }
  const auto tasks = build_tasks(config);
  const auto unseen = build_unseen(config);
  JsonlWriter writer(output_dir.empty() ? fs::path() : output_dir / "metrics.jsonl");
  const lifelong::MetricSink sink = [&](const nlohmann::json& r) { writer(r); };

  RunOutcome outcome;
  outcome.result = config.precision == Precision::kF64 ? train_with<double>(config, tasks, unseen, output_dir, sink)
                                                       : train_with<float>(config, tasks, unseen, output_dir, sink);
  outcome.records = std::move(writer.records);
  if (!output_dir.empty()) write_text(output_dir / "results.txt", evalkit::format_table(outcome.result.final_report));
  return outcome;
}

std::size_t gen_data(const RunConfig& config, const GenDataOptions& options)
{
  config.validate();
  if (options.out.empty()) throw CommandError("usage", "gen-data needs an output directory");
  auto stream = config.synth;
  stream.base.channels = config.model.channels;
  stream.base.height = config.model.image_height;
  stream.base.width = config.model.image_width;
  stream.seed = config.seed;

  try {
    if (!options.market) {
      auto spec = stream.base;
      spec.identities = options.identities;
      spec.domain = options.domain;
      spec.seed = config.seed;
      spec.camera_seed = config.seed;
      const auto dataset = data::generate_synthetic(spec);
      data::write_folder(options.out, dataset);
      return dataset.size();
    }
    stream.train_identities = options.identities;
    const auto task = data::make_synthetic_task(stream, options.domain, 1, 0);
    data::write_folder(options.out / "bounding_box_train", task.train);
    data::write_folder(options.out / "query", task.query);
    data::write_folder(options.out / "bounding_box_test", task.gallery);
    return task.train.size() + task.query.size() + task.gallery.size();
  } catch (const fs::filesystem_error& e) {
    throw CommandError("io", e.what());
  } catch (const std::runtime_error& e) {
    throw CommandError("io", e.what());
  }
}

evalkit::IncrementalReport eval_checkpoint(const fs::path& checkpoint, const std::optional<RunConfig>& override_config,
                                           const std::optional<std::vector<std::string>>& datasets)
{
  if (datasets && datasets->empty()) throw CommandError("data", "empty dataset list");
  if (!fs::exists(checkpoint)) throw CommandError("checkpoint", "missing checkpoint " + checkpoint.string());
  const auto ckpt_config = [&] {
    if (override_config) return *override_config;
    return parse_config(read_checkpoint<float>(checkpoint).config);
  }();
  ckpt_config.validate();

  const auto all = build_tasks(ckpt_config);
  std::vector<data::TaskData> seen;
  if (!datasets) {
    const auto registered = registered_tasks(checkpoint);
    for (const auto& t : all) {
      if (registered.contains(t.task_id)) seen.push_back(t);
    }
  } else {
    for (const auto& name : *datasets) {
      bool found = false;
      for (const auto& t : all) {
        if (t.name == name) {
          seen.push_back(t);
          found = true;
        }
      }
      if (!found) throw CommandError("data", "dataset '" + name + "' is not part of data.tasks");
    }
  }
  if (seen.empty()) throw CommandError("data", "no datasets to evaluate");
  const auto unseen = build_unseen(ckpt_config);
  return checkpoint_scalar_bytes(checkpoint) == sizeof(double) ? eval_with<double>(checkpoint, ckpt_config, seen, unseen)
                                                               : eval_with<float>(checkpoint, ckpt_config, seen, unseen);
}

std::vector<std::pair<std::string, RunConfig>> ablation_configs(const RunConfig& base)
{
  struct Row {
    const char* name;
    bool lld, rla, lls;
  };
  static constexpr Row rows[] = {
    {"base", false, false, false},     {"+LLD", true, false, false},     {"+LLD+RLA", true, true, false},
    {"+LLD+LLS", true, false, true},   {"+RLA", false, true, false},     {"+RLA+LLS", false, true, true},
    {"full", true, true, true},
  };
  std::vector<std::pair<std::string, RunConfig>> out;
  for (const auto& r : rows) {
    auto c = base;
    c.train.loss.lld = r.lld;
    c.train.loss.rla = r.rla;
    c.train.loss.lls = r.lls;
    c.train.buffer_enabled = r.rla || r.lls;
    out.emplace_back(r.name, c);
  }
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, const fs::path& output_dir)
{
  config.validate();
  std::vector<AblationRow> rows;
  fs::path jsonl;
  if (!output_dir.empty()) {
    fs::create_directories(output_dir);
    jsonl = output_dir / "ablation.jsonl";
  }
  JsonlWriter writer(jsonl);
  for (const auto& [name, row_config] : ablation_configs(config)) {
    spdlog::info("ablation row {}", name);
    const auto outcome = run_training(row_config, fs::path());
    rows.push_back({name, row_config, outcome.result.final_report});
    writer({{"type", "ablation_row"},
            {"row", name},
            {"config", serialize_config(row_config)},
            {"seen_map", outcome.result.final_report.seen_map},
            {"seen_rank1", outcome.result.final_report.seen_rank1},
            {"unseen_map", outcome.result.final_report.unseen_map},
            {"unseen_rank1", outcome.result.final_report.unseen_rank1}});
  }
  if (!output_dir.empty()) write_text(output_dir / "ablation.txt", format_ablation(rows));
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows)
{
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %4s %4s %4s %10s %10s %12s %12s\n", "row", "LLD", "RLA", "LLS", "seen mAP",
                "seen R-1", "unseen mAP", "unseen R-1");
  os << line;
  for (const auto& r : rows) {
    const auto& l = r.config.train.loss;
    std::snprintf(line, sizeof(line), "%-10s %4s %4s %4s %10.1f %10.1f %12.1f %12.1f\n", r.name.c_str(),
                  l.lld ? "x" : "", l.rla ? "x" : "", l.lls ? "x" : "", 100.0 * r.report.seen_map,
                  100.0 * r.report.seen_rank1, 100.0 * r.report.unseen_map, 100.0 * r.report.unseen_rank1);
    os << line;
  }
  return os.str();
}

}  // namespace dre::cli
