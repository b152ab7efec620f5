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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dre/acm/acm.hpp"
#include "dre/cli/commands.hpp"
#include "dre/cli/config.hpp"
#include "dre/cli/gradcheck_suite.hpp"
#include "dre/data/folder.hpp"

using namespace dre;
using namespace dre::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const auto dir = fs::temp_directory_path() / "dre_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_config()
{
  RunConfig c;
  for (const char* s : {"model.image_height=16", "model.image_width=16", "model.dim=16", "model.depth=1",
                        "model.heads=2", "model.mlp_ratio=2", "train.epochs=1", "train.ids_per_batch=3",
                        "train.instances=2", "buffer.ids_per_task=3", "synth.train_ids=6", "synth.test_ids=3",
                        "synth.images_per_camera=2", "data.tasks=synth:0,synth:1"}) {
    apply_setting(c, s);
  }
  return c;
}

std::string slurp(const fs::path& p)
{
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

template <typename F>
std::string error_of(F&& f)
{
  try {
    f();
  } catch (const std::exception& e) {
    return error_line(e);
  }
  return "";
}

}  // namespace

TEST_CASE("default config values")
{
  const RunConfig c;
  CHECK(c.seed == 7);
  CHECK(c.model.image_height == 32);
  CHECK(c.model.patch == 8);
  CHECK(c.model.dim == 64);
  CHECK(c.model.depth == 4);
  CHECK(c.model.heads == 4);
  CHECK(c.model.aux_tokens == 2);
  CHECK(c.train.ema_k == 0.996);
  CHECK(c.train.loss.margin == 0.0);
  CHECK(c.train.loss.tau == 2.0);
  CHECK(c.train.lr == 0.0032);
  CHECK(c.train.epochs == 10);
  CHECK(c.train.ids_per_batch * c.train.instances == 32);
  CHECK(c.train.buffer.ids_per_task == 20);
  CHECK(c.train.buffer.imgs_per_id == 2);
  CHECK(c.tasks.size() == 3);
}

TEST_CASE("config text round trips for every key")
{
  auto c = tiny_config();
  apply_setting(c, "loss.tau = 1.25");
  apply_setting(c, "loss.triplet_mode=average");
  apply_setting(c, "optim.schedule=constant");
  apply_setting(c, "precision=f64");
  apply_setting(c, "eval.feature=concat");
  apply_setting(c, "ema.k=0.99912345678901234");
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  CHECK(back == c);
  CHECK(serialize_config(back) == text);
  for (const auto& k : config_keys()) {
    CHECK(!k.doc.empty());
    CHECK(text.find(k.key + " = ") != std::string::npos);
    CHECK(get_value(back, k.key) == get_value(c, k.key));
  }
}

TEST_CASE("config parsing ignores comments and blank lines")
{
  const auto c = parse_config("# run\n\nseed = 11   # trailing\nmodel.dim=32\n");
  CHECK(c.seed == 11);
  CHECK(c.model.dim == 32);
}

TEST_CASE("config errors are field level")
{
  auto message = [](const std::string& text) {
    try {
      parse_config(text).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("model.dim = many\n").find("model.dim") != std::string::npos);
  CHECK(message("model.dim = many\n").find("many") != std::string::npos);
  CHECK(message("no.such.key = 1\n").find("no.such.key") != std::string::npos);
  CHECK(message("seed = 1\nseed = 2\n").find("seed") != std::string::npos);
  CHECK(message("just words\n").find("line 1") != std::string::npos);
  CHECK(message("loss.lld = maybe\n").find("loss.lld") != std::string::npos);
  CHECK(message("model.heads = 5\n").find("model.heads") != std::string::npos);
  CHECK(message("ema.k = 1.5\n").find("ema.k") != std::string::npos);
  CHECK(message("data.tasks = nowhere:3\n").find("data.tasks") != std::string::npos);
  CHECK(message("model.dim = -4\n").find("model.dim") != std::string::npos);
}

TEST_CASE("seen tasks get 1-based ids and contiguous labels")
{
  const auto c = tiny_config();
  const auto tasks = build_tasks(c);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[0].task_id == 1);
  CHECK(tasks[1].task_id == 2);
  CHECK(tasks[0].train.index_by_identity().begin()->first == 0);
  CHECK(tasks[1].train.index_by_identity().begin()->first == 6);
  CHECK(build_unseen(c).size() == 1);
}

TEST_CASE("folder task entries load from disk")
{
  const auto root = scratch("folder_task");
  auto c = tiny_config();
  GenDataOptions g;
  g.out = root;
  g.market = true;
  g.identities = 4;
  gen_data(c, g);
  set_value(c, "data.tasks", "synth:0,folder:" + root.string());
  const auto tasks = build_tasks(c);
  REQUIRE(tasks.size() == 2);
  CHECK(tasks[1].train.identity_count() == 4);
  CHECK(tasks[1].train.index_by_identity().begin()->first == 6);
}

TEST_CASE("gen-data writes the expected files deterministically")
{
  auto c = tiny_config();
  apply_setting(c, "synth.cameras=2");
  apply_setting(c, "synth.images_per_camera=3");
  const auto a = scratch("gen_a");
  const auto b = scratch("gen_b");
  GenDataOptions g;
  g.identities = 4;
  g.out = a;
  CHECK(gen_data(c, g) == 24);
  g.out = b;
  gen_data(c, g);
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) {
    names.insert(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(names.size() == 24);
  const auto loaded = data::load_folder(a, 3, 16, 16);
  CHECK(loaded.size() == 24);
}

TEST_CASE("training, checkpoint evaluation and error reporting")
{
  const auto out = scratch("train");
  const auto c = tiny_config();
  const auto outcome = run_training(c, out);
  CHECK(fs::exists(out / "config.txt"));
  CHECK(fs::exists(out / "metrics.jsonl"));
  CHECK(fs::exists(out / "results.txt"));
  CHECK(fs::exists(out / "checkpoints" / "task1_epoch1.ckpt"));
  CHECK(fs::exists(out / "checkpoints" / "task2_epoch1.ckpt"));
  CHECK(parse_config(slurp(out / "config.txt")) == c);

  // The task-1 checkpoint evaluated on task 1 reproduces the training-time value.
  const auto t1 = eval_checkpoint(out / "checkpoints" / "task1_epoch1.ckpt", std::nullopt, std::nullopt);
  REQUIRE(t1.seen.size() == 1);
  CHECK(t1.seen[0].mean_ap == outcome.result.after_task[0].seen[0].mean_ap);
  CHECK(t1.seen[0].rank1 == outcome.result.after_task[0].seen[0].rank1);
  CHECK(t1.has_unseen());

  const auto full = eval_checkpoint(out / "checkpoints" / "task2_epoch1.ckpt", std::nullopt, std::nullopt);
  CHECK(full.seen_map == outcome.result.final_report.seen_map);
  const auto one = eval_checkpoint(out / "checkpoints" / "task2_epoch1.ckpt", std::nullopt,
                                   std::vector<std::string>{"synth:1"});
  CHECK(one.seen.size() == 1);

  CHECK(error_of([&] {
          eval_checkpoint(out / "checkpoints" / "task2_epoch1.ckpt", std::nullopt, std::vector<std::string>{});
        }).rfind("error: data:", 0) == 0);
  CHECK(error_of([&] { eval_checkpoint(out / "absent.ckpt", std::nullopt, std::nullopt); })
          .rfind("error: checkpoint:", 0) == 0);
  CHECK(error_of([&] {
          eval_checkpoint(out / "checkpoints" / "task2_epoch1.ckpt", std::nullopt,
                          std::vector<std::string>{"synth:9"});
        }).rfind("error: data:", 0) == 0);
  CHECK(error_of([&] { parse_config("model.dim = x\n"); }).rfind("error: config: line 1: model.dim", 0) == 0);
}

TEST_CASE("runs are deterministic for a fixed seed")
{
  const auto c = tiny_config();
  const auto a = run_training(c, fs::path());
  const auto b = run_training(c, fs::path());
  CHECK(a.result.final_report.seen_map == b.result.final_report.seen_map);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i] == b.records[i]);
}

TEST_CASE("a frozen adjustment model never moves")
{
  auto c = tiny_config();
  apply_setting(c, "ema.k=1");
  lifelong::Trainer<double> trainer(c.model, c.train_config());
  const auto tasks = build_tasks(c);
  trainer.begin_task(tasks[0]);
  std::vector<Tensor<double>> before;
  for (const auto& p : trainer.pair().adjustment.params()) before.push_back(p.var.value());
  trainer.step(tasks[0].train);
  trainer.step(tasks[0].train);
  const auto after = trainer.pair().adjustment.params();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i].var.value() == before[i]);
}

TEST_CASE("ablation lattice covers the seven rows")
{
  const auto rows = ablation_configs(RunConfig{});
  REQUIRE(rows.size() == 7);
  std::set<std::tuple<bool, bool, bool>> toggles;
  for (const auto& [name, c] : rows) {
    toggles.insert({c.train.loss.lld, c.train.loss.rla, c.train.loss.lls});
    CHECK(c.train.buffer_enabled == (c.train.loss.rla || c.train.loss.lls));
  }
  CHECK(toggles.size() == 7);
  CHECK(rows.front().first == "base");
  CHECK(!rows.front().second.train.buffer_enabled);
  CHECK(rows.back().first == "full");
}

TEST_CASE("gradient check suite passes on every loss")
{
  const auto entries = run_gradcheck_suite();
  CHECK(all_passed(entries));
  std::set<std::string> losses;
  for (const auto& e : entries) {
    losses.insert(e.loss);
    CHECK(e.max_relative_error < 1e-4);
  }
  CHECK(losses.size() == 9);
  CHECK(format_gradcheck(entries).find("FAIL") == std::string::npos);
}

TEST_CASE("a corrupted gradient is reported by name")
{
  using V = Var<double>;
  // Forward is the orthogonal loss; backward is deliberately scaled by 1.5.
  const LossBuilder corrupted = [](const std::vector<V>& l) {
    const auto good = acm::orthogonal_loss(l);
    return record<double>("corrupted", good.value(), {good},
                          [](const Node<double>&, const Tensor<double>& g, std::span<Tensor<double>*> in) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += 1.5 * g[i];
                          });
  };
  Rng rng(1);
  std::vector<Tensor<double>> inputs;
  for (int i = 0; i < 2; ++i) {
    Tensor<double> t({8, 8});
    for (auto& v : t.values()) v = rng.normal();
    inputs.push_back(t);
  }
  const auto entry = check_loss("orthogonal", 2, 1, corrupted, inputs, 1e-4);
  CHECK(!entry.passed);
  const auto report = format_gradcheck({entry});
  CHECK(report.find("FAIL") != std::string::npos);
  CHECK(report.find("orthogonal") != std::string::npos);
}
