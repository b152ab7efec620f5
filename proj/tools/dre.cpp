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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dre/cli/commands.hpp"
#include "dre/cli/config.hpp"
#include "dre/cli/gradcheck_suite.hpp"

namespace {

using namespace dre::cli;

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides)
{
  RunConfig config = path.empty() ? RunConfig{} : load_config(path);
  for (const auto& s : overrides) apply_setting(config, s);
  return config;
}

std::vector<std::string> split_csv(const std::string& text)
{
  std::vector<std::string> out;
  std::string item;
  for (char ch : text) {
    if (ch == ',') {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (ch != ' ') {
      item += ch;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Diverse representations embedding for lifelong person re-identification"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config_options = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config file (key = value lines)");
    cmd->add_option("--set", overrides, "override a config key, key=value (repeatable)");
  };

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset in the Market filename layout");
  GenDataOptions gen_options;
  std::string gen_out;
  add_config_options(gen);
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  gen->add_option("--domain", gen_options.domain, "signature layout")->capture_default_str();
  gen->add_option("--identities", gen_options.identities, "identity count")->capture_default_str();
  gen->add_flag("--market", gen_options.market, "write bounding_box_train/, query/ and bounding_box_test/");

  auto* train = app.add_subcommand("train", "train the configured task stream");
  add_config_options(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint;
  std::optional<std::string> datasets;
  add_config_options(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--datasets", datasets, "comma-separated entries of data.tasks (default: tasks in the checkpoint)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss at 64-bit");

  auto* ablate = app.add_subcommand("ablate", "train the seven-row component ablation");
  add_config_options(ablate);

  auto* keys = app.add_subcommand("config-keys", "list every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("dre"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*gen) {
      gen_options.out = gen_out;
      const auto n = gen_data(resolve_config(config_path, overrides), gen_options);
      std::cout << "wrote " << n << " images to " << gen_out << '\n';
    } else if (*train) {
      const auto config = resolve_config(config_path, overrides);
      const auto out = resolve_output_dir(config);
      const auto outcome = run_training(config, out);
      std::cout << dre::evalkit::format_table(outcome.result.final_report);
      std::cout << "outputs in " << out.string() << '\n';
    } else if (*eval) {
      std::optional<RunConfig> config;
      if (!config_path.empty() || !overrides.empty()) config = resolve_config(config_path, overrides);
      std::optional<std::vector<std::string>> list;
      if (datasets) list = split_csv(*datasets);
      const auto report = eval_checkpoint(checkpoint, config, list);
      std::cout << dre::evalkit::format_table(report);
      for (const auto& r : dre::evalkit::report_records(report)) std::cerr << r.dump() << '\n';
    } else if (*gradcheck) {
      const auto entries = run_gradcheck_suite();
      std::cout << format_gradcheck(entries);
      if (!all_passed(entries)) {
        std::cerr << "error: gradcheck: analytic and numeric gradients disagree\n";
        return 1;
      }
    } else if (*ablate) {
      const auto config = resolve_config(config_path, overrides);
      const auto rows = run_ablation(config, resolve_output_dir(config));
      std::cout << format_ablation(rows);
    } else if (*keys) {
      const RunConfig defaults;
      for (const auto& k : config_keys()) {
        std::cout << k.key << " = " << get_value(defaults, k.key) << "  # " << k.doc << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << error_line(e) << '\n';
    return 1;
  }
  return 0;
}
