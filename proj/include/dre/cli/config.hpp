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
#include <stdexcept>
#include <string>
#include <vector>

#include "dre/backbone/backbone.hpp"
#include "dre/data/tasks.hpp"
#include "dre/evalkit/evalkit.hpp"
#include "dre/lifelong/trainer.hpp"

namespace dre::cli {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Precision { kF32, kF64 };

/// Everything a run needs. Text form: one `key = value` per line, `#` comments.
struct RunConfig {
  std::uint64_t seed = 7;
  Precision precision = Precision::kF32;
  std::string output_dir = "runs/dre";
  BackboneConfig model;
  lifelong::TrainConfig train;  // train.seed is ignored; `seed` above is used
  std::vector<std::string> tasks{"synth:0", "synth:1", "synth:2"};
  std::vector<std::string> unseen{"synth:0"};
  data::SyntheticStreamOptions synth = default_synth();
  evalkit::EvalOptions eval;

  static data::SyntheticStreamOptions default_synth();

  /// Throws ConfigError with the offending key in the message.
  void validate() const;

  /// TrainConfig with the run seed applied.
  lifelong::TrainConfig train_config() const;
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

/// Every accepted key with its documentation, in serialization order.
const std::vector<ConfigKey>& config_keys();

/// Applies one `key=value` (or `key = value`) assignment.
void apply_setting(RunConfig& config, const std::string& assignment);
void set_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& config, const std::string& key);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

bool operator==(const RunConfig& a, const RunConfig& b);

/// Builds the seen task stream; task ids are 1-based, labels contiguous across tasks.
std::vector<data::TaskData> build_tasks(const RunConfig& config);
std::vector<data::TaskData> build_unseen(const RunConfig& config);

}  // namespace dre::cli
