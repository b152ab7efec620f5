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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dre/cli/config.hpp"
#include "dre/evalkit/evalkit.hpp"
#include "dre/lifelong/trainer.hpp"

namespace dre::cli {

/// Failure with a short machine-readable code ("config", "io", "data", ...).
class CommandError : public std::runtime_error {
public:
  CommandError(std::string code, const std::string& message) : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

/// Maps any exception onto the single-line `error: <code>: <message>` form.
std::string error_line(const std::exception& e);

/// DRE_OUTPUT_DIR when set, otherwise config.output_dir.
std::filesystem::path resolve_output_dir(const RunConfig& config);

struct RunOutcome {
  lifelong::StreamResult result;
  std::vector<nlohmann::json> records;  // the metrics stream, in order
};

/// Trains the configured task stream. With a non-empty `output_dir` writes
/// config.txt, metrics.jsonl, results.txt and checkpoints/task{t}_epoch{e}.ckpt.
RunOutcome run_training(const RunConfig& config, const std::filesystem::path& output_dir);

struct GenDataOptions {
  std::filesystem::path out;
  std::size_t domain = 0;
  std::size_t identities = 4;
  bool market = false;  // full task layout (train/query/test) instead of one flat folder
};

/// Writes a synthetic dataset in the Market filename convention; returns the file count.
std::size_t gen_data(const RunConfig& config, const GenDataOptions& options);

/// Evaluates a checkpoint on `datasets` (entries of data.tasks) plus the
/// configured unseen sets. Without a list the tasks registered in the checkpoint
/// are used; an explicit empty list is an error.
evalkit::IncrementalReport eval_checkpoint(const std::filesystem::path& checkpoint,
                                           const std::optional<RunConfig>& override_config,
                                           const std::optional<std::vector<std::string>>& datasets);

struct AblationRow {
  std::string name;
  RunConfig config;
  evalkit::IncrementalReport report;
};

/// The seven-row toggle lattice {base, +LLD, +LLD+RLA, +LLD+LLS, +RLA, +RLA+LLS, full}.
std::vector<std::pair<std::string, RunConfig>> ablation_configs(const RunConfig& base);

/// Trains every row; with a non-empty `output_dir` writes ablation.jsonl (each
/// row's config verbatim plus its results) and ablation.txt.
std::vector<AblationRow> run_ablation(const RunConfig& config, const std::filesystem::path& output_dir);

std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace dre::cli
