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

#include "dre/cli/config.hpp"

#include "dre/data/folder.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace dre::cli {

namespace {

std::string trim(const std::string& s)
{
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected, const std::string& text)
{
  throw ConfigError(key + ": expected " + expected + ", got '" + text + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& text)
{
  if (text.empty() || text[0] == '-' || text[0] == '+') bad_value(key, "a non-negative integer", text);
  errno = 0;
  char* end = nullptr;
  const auto v = std::strtoull(text.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') bad_value(key, "a non-negative integer", text);
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& text)
{
  return static_cast<std::size_t>(parse_u64(key, text));
}

int parse_int(const std::string& key, const std::string& text)
{
  errno = 0;
  char* end = nullptr;
  const auto v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || errno != 0 || *end != '\0') bad_value(key, "an integer", text);
  return static_cast<int>(v);
}

double parse_double(const std::string& key, const std::string& text)
{
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || errno != 0 || *end != '\0' || !std::isfinite(v)) bad_value(key, "a finite number", text);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text)
{
  if (text == "true" || text == "on" || text == "1") return true;
  if (text == "false" || text == "off" || text == "0") return false;
  bad_value(key, "true|false", text);
}

std::string format_double(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_bool(bool v)
{
  return v ? "true" : "false";
}

std::vector<std::string> parse_list(const std::string& text)
{
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_list(const std::vector<std::string>& items)
{
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define DRE_SIZE_FIELD(KEY, MEMBER, DOC)                                                              \
  Field{KEY, DOC, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                         \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_size(KEY, v); }}
#define DRE_DOUBLE_FIELD(KEY, MEMBER, DOC)                                                            \
  Field{KEY, DOC, [](const RunConfig& c) { return format_double(c.MEMBER); },                          \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); }}
#define DRE_BOOL_FIELD(KEY, MEMBER, DOC)                                                              \
  Field{KEY, DOC, [](const RunConfig& c) { return format_bool(c.MEMBER); },                            \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); }}

const std::vector<Field>& fields()
{
  static const std::vector<Field> table = {
    Field{"seed", "run seed; feeds initialization, sampling and synthetic data",
          [](const RunConfig& c) { return std::to_string(c.seed); },
          [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
    Field{"precision", "f32 (training) or f64 (verification, bitwise reproducible)",
          [](const RunConfig& c) { return std::string(c.precision == Precision::kF64 ? "f64" : "f32"); },
          [](RunConfig& c, const std::string& v) {
            if (v == "f32") c.precision = Precision::kF32;
            else if (v == "f64") c.precision = Precision::kF64;
            else bad_value("precision", "f32|f64", v);
          }},
    Field{"output_dir", "directory for config echo, metrics.jsonl, checkpoints and tables",
          [](const RunConfig& c) { return c.output_dir; },
          [](RunConfig& c, const std::string& v) {
            if (v.empty()) bad_value("output_dir", "a path", v);
            c.output_dir = v;
          }},
    DRE_SIZE_FIELD("model.image_height", model.image_height, "input height in pixels"),
    DRE_SIZE_FIELD("model.image_width", model.image_width, "input width in pixels"),
    DRE_SIZE_FIELD("model.channels", model.channels, "input channels"),
    DRE_SIZE_FIELD("model.patch", model.patch, "square patch size in pixels"),
    DRE_SIZE_FIELD("model.dim", model.dim, "embedding dimension D"),
    DRE_SIZE_FIELD("model.depth", model.depth, "encoder layers"),
    DRE_SIZE_FIELD("model.heads", model.heads, "attention heads"),
    DRE_SIZE_FIELD("model.aux_tokens", model.aux_tokens, "auxiliary class tokens S"),
    DRE_DOUBLE_FIELD("model.mlp_ratio", model.mlp_ratio, "MLP hidden width as a multiple of D"),
    DRE_DOUBLE_FIELD("model.dropout", model.dropout, "dropout rate inside the encoder"),
    Field{"model.max_embedding", "emphasis (Z0*(1+M)), mask (Z0*M) or off",
          [](const RunConfig& c) { return to_string(c.model.max_embedding); },
          [](RunConfig& c, const std::string& v) {
            try {
              c.model.max_embedding = parse_max_embedding_mode(v);
            } catch (const std::invalid_argument&) {
              bad_value("model.max_embedding", "emphasis|mask|off", v);
            }
          }},
    DRE_BOOL_FIELD("acm.clamp_weights", train.clamp_weights, "clamp integration weights to [0, 1]"),
    DRE_DOUBLE_FIELD("loss.tau", train.loss.tau, "distillation temperature"),
    DRE_DOUBLE_FIELD("loss.margin", train.loss.margin, "triplet margin"),
    Field{"loss.triplet_mode", "concat ([P-hat; A^1..A^S] as one feature) or average (one triplet per representation)",
          [](const RunConfig& c) {
            return std::string(c.train.loss.triplet_mode == objectives::TripletMode::kAverage ? "average" : "concat");
          },
          [](RunConfig& c, const std::string& v) {
            if (v == "concat") c.train.loss.triplet_mode = objectives::TripletMode::kConcat;
            else if (v == "average") c.train.loss.triplet_mode = objectives::TripletMode::kAverage;
            else bad_value("loss.triplet_mode", "concat|average", v);
          }},
    DRE_BOOL_FIELD("loss.ort", train.loss.ort, "orthogonal loss on auxiliaries of new instances"),
    DRE_BOOL_FIELD("loss.lld", train.loss.lld, "logit-level distillation on new instances"),
    DRE_BOOL_FIELD("loss.rla", train.loss.rla, "representation-level alignment on buffer instances"),
    DRE_BOOL_FIELD("loss.lls", train.loss.lls, "logit-level supervision on buffer instances"),
    DRE_DOUBLE_FIELD("loss.w_id", train.loss.w_id, "identification loss weight"),
    DRE_DOUBLE_FIELD("loss.w_triplet", train.loss.w_triplet, "new-instance triplet weight"),
    DRE_DOUBLE_FIELD("loss.w_ort", train.loss.w_ort, "orthogonal loss weight"),
    DRE_DOUBLE_FIELD("loss.w_lld", train.loss.w_lld, "logit-level distillation weight"),
    DRE_DOUBLE_FIELD("loss.w_triplet_old", train.loss.w_triplet_old, "old-instance triplet weight"),
    DRE_DOUBLE_FIELD("loss.w_consistent", train.loss.w_consistent, "consistent loss weight"),
    DRE_DOUBLE_FIELD("loss.w_lls", train.loss.w_lls, "logit-level supervision weight"),
    DRE_DOUBLE_FIELD("ema.k", train.ema_k, "adjustment model EMA coefficient; 1 freezes it"),
    DRE_DOUBLE_FIELD("optim.lr", train.lr, "base learning rate"),
    DRE_DOUBLE_FIELD("optim.momentum", train.momentum, "SGD momentum"),
    Field{"optim.schedule", "cosine (per task) or constant",
          [](const RunConfig& c) { return std::string(c.train.schedule == LrSchedule::kConstant ? "constant" : "cosine"); },
          [](RunConfig& c, const std::string& v) {
            if (v == "cosine") c.train.schedule = LrSchedule::kCosine;
            else if (v == "constant") c.train.schedule = LrSchedule::kConstant;
            else bad_value("optim.schedule", "cosine|constant", v);
          }},
    DRE_SIZE_FIELD("train.epochs", train.epochs, "epochs per task"),
    DRE_SIZE_FIELD("train.ids_per_batch", train.ids_per_batch, "identities per batch (P)"),
    DRE_SIZE_FIELD("train.instances", train.instances, "images per identity in a batch (K)"),
    DRE_BOOL_FIELD("buffer.enabled", train.buffer_enabled, "store and replay exemplars of finished tasks"),
    DRE_SIZE_FIELD("buffer.ids_per_task", train.buffer.ids_per_task, "identities stored per finished task"),
    DRE_SIZE_FIELD("buffer.imgs_per_id", train.buffer.imgs_per_id, "images stored per identity"),
    Field{"data.tasks", "comma-separated task stream: synth:<domain> or folder:<market root>",
          [](const RunConfig& c) { return format_list(c.tasks); },
          [](RunConfig& c, const std::string& v) { c.tasks = parse_list(v); }},
    Field{"data.unseen", "comma-separated held-out sets evaluated but never trained (may be empty)",
          [](const RunConfig& c) { return format_list(c.unseen); },
          [](RunConfig& c, const std::string& v) { c.unseen = parse_list(v); }},
    DRE_SIZE_FIELD("synth.train_ids", synth.train_identities, "training identities per synthetic task"),
    DRE_SIZE_FIELD("synth.test_ids", synth.test_identities, "test identities per synthetic task"),
    DRE_SIZE_FIELD("synth.cameras", synth.base.cameras, "cameras per identity"),
    DRE_SIZE_FIELD("synth.images_per_camera", synth.base.images_per_camera, "images per identity and camera"),
    DRE_DOUBLE_FIELD("synth.brightness", synth.base.brightness, "camera brightness offset range"),
    Field{"synth.translation", "camera translation range in pixels",
          [](const RunConfig& c) { return std::to_string(c.synth.base.translation); },
          [](RunConfig& c, const std::string& v) { c.synth.base.translation = parse_int("synth.translation", v); }},
    DRE_DOUBLE_FIELD("synth.noise", synth.base.noise, "per-pixel gaussian noise std"),
    DRE_BOOL_FIELD("synth.clutter", synth.base.clutter, "fill non-signature cells with random blocks"),
    Field{"eval.feature", "integrated (P-hat) or concat ([P-hat; A^1..A^S])",
          [](const RunConfig& c) { return evalkit::to_string(c.eval.feature); },
          [](RunConfig& c, const std::string& v) {
            try {
              c.eval.feature = evalkit::parse_feature_kind(v);
            } catch (const std::invalid_argument&) {
              bad_value("eval.feature", "integrated|concat", v);
            }
          }},
    Field{"eval.model", "learner or adjustment",
          [](const RunConfig& c) { return evalkit::to_string(c.eval.model); },
          [](RunConfig& c, const std::string& v) {
            try {
              c.eval.model = evalkit::parse_eval_model(v);
            } catch (const std::invalid_argument&) {
              bad_value("eval.model", "learner|adjustment", v);
            }
          }},
  };
  return table;
}

#undef DRE_SIZE_FIELD
#undef DRE_DOUBLE_FIELD
#undef DRE_BOOL_FIELD

const Field& find_field(const std::string& key)
{
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown key '" + key + "'");
}

struct SourceSpec {
  std::string kind;
  std::string arg;
};

SourceSpec split_source(const std::string& key, const std::string& entry)
{
  const auto colon = entry.find(':');
  if (colon == std::string::npos) bad_value(key, "synth:<domain> or folder:<path>", entry);
  SourceSpec s{entry.substr(0, colon), entry.substr(colon + 1)};
  if (s.kind == "synth") {
    parse_size(key, s.arg);
  } else if (s.kind != "folder" || s.arg.empty()) {
    bad_value(key, "synth:<domain> or folder:<path>", entry);
  }
  return s;
}

data::SyntheticStreamOptions synth_options(const RunConfig& config)
{
  auto options = config.synth;
  options.base.channels = config.model.channels;
  options.base.height = config.model.image_height;
  options.base.width = config.model.image_width;
  options.seed = config.seed;
  return options;
}

}  // namespace

data::SyntheticStreamOptions RunConfig::default_synth()
{
  data::SyntheticStreamOptions s;
  s.train_identities = 24;
  s.test_identities = 12;
  s.base.cameras = 2;
  s.base.images_per_camera = 4;
  return s;
}

void RunConfig::validate() const
{
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError(key + ": " + why);
  };
  require(train.epochs > 0, "train.epochs", "must be positive");
  require(train.ids_per_batch >= 2, "train.ids_per_batch", "must be at least 2");
  require(train.instances >= 2, "train.instances", "must be at least 2 for triplet mining");
  require(train.lr > 0.0, "optim.lr", "must be positive");
  require(train.momentum >= 0.0 && train.momentum < 1.0, "optim.momentum", "must lie in [0, 1)");
  require(train.ema_k >= 0.0 && train.ema_k <= 1.0, "ema.k", "must lie in [0, 1]");
  require(train.loss.tau > 0.0, "loss.tau", "must be positive");
  require(train.loss.margin >= 0.0, "loss.margin", "must be non-negative");
  for (const auto& [key, w] : {std::pair{"loss.w_id", train.loss.w_id}, {"loss.w_triplet", train.loss.w_triplet},
                               {"loss.w_ort", train.loss.w_ort}, {"loss.w_lld", train.loss.w_lld},
                               {"loss.w_triplet_old", train.loss.w_triplet_old},
                               {"loss.w_consistent", train.loss.w_consistent}, {"loss.w_lls", train.loss.w_lls}}) {
    require(w >= 0.0, key, "must be non-negative");
  }
  require(train.buffer.ids_per_task >= 1, "buffer.ids_per_task", "must be positive");
  require(train.buffer.imgs_per_id >= 1, "buffer.imgs_per_id", "must be positive");
  require(!tasks.empty(), "data.tasks", "must list at least one task");
  for (const auto& t : tasks) split_source("data.tasks", t);
  for (const auto& t : unseen) split_source("data.unseen", t);
  require(synth.train_identities >= train.ids_per_batch, "synth.train_ids", "must be at least train.ids_per_batch");
  require(synth.test_identities >= 2, "synth.test_ids", "must be at least 2");
  require(synth.base.cameras >= 2, "synth.cameras", "must be at least 2 for cross-camera retrieval");
  try {
    auto spec = synth_options(*this).base;
    spec.identities = synth.train_identities;
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
}

lifelong::TrainConfig RunConfig::train_config() const
{
  auto t = train;
  t.seed = seed;
  return t;
}

const std::vector<ConfigKey>& config_keys()
{
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back({f.key, f.doc});
    return out;
  }();
  return keys;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value)
{
  find_field(key).set(config, value);
}

std::string get_value(const RunConfig& config, const std::string& key)
{
  return find_field(key).get(config);
}

void apply_setting(RunConfig& config, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set_value(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(const std::string& text)
{
  RunConfig config;
  std::istringstream is(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(key + ": duplicate key on line " + std::to_string(number));
    try {
      set_value(config, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config)
{
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

bool operator==(const RunConfig& a, const RunConfig& b)
{
  return serialize_config(a) == serialize_config(b);
}

std::vector<data::TaskData> build_tasks(const RunConfig& config)
{
  const auto options = synth_options(config);
  std::vector<data::TaskData> out;
  std::int64_t offset = 0;
  for (std::size_t i = 0; i < config.tasks.size(); ++i) {
    const auto src = split_source("data.tasks", config.tasks[i]);
    const int task_id = static_cast<int>(i) + 1;
    if (src.kind == "synth") {
      out.push_back(data::make_synthetic_task(options, parse_size("data.tasks", src.arg), task_id, offset));
    } else {
      out.push_back(data::load_market_task(src.arg, task_id, offset, config.model.channels,
                                           config.model.image_height, config.model.image_width));
    }
    offset += static_cast<std::int64_t>(out.back().train.identity_count());
  }
  return out;
}

std::vector<data::TaskData> build_unseen(const RunConfig& config)
{
  const auto options = synth_options(config);
  std::vector<data::TaskData> out;
  for (std::size_t i = 0; i < config.unseen.size(); ++i) {
    const auto src = split_source("data.unseen", config.unseen[i]);
    if (src.kind == "synth") {
      out.push_back(data::make_unseen_task(options, parse_size("data.unseen", src.arg), static_cast<int>(i)));
    } else {
      const std::filesystem::path root(src.arg);
      data::TaskData task;
      task.name = "folder:" + src.arg;
      task.task_id = -1 - static_cast<int>(i);
      const auto& m = config.model;
      task.query = data::load_folder(root / "query", m.channels, m.image_height, m.image_width);
      task.gallery = data::load_folder(root / "bounding_box_test", m.channels, m.image_height, m.image_width);
      out.push_back(std::move(task));
    }
  }
  return out;
}

}  // namespace dre::cli
