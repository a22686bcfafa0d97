// Copyright 2026 The hngfn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// hngfn run synthetic|mobo|ablation|oracle-fixtures --config <path>
//     [--seed N] [--out DIR] [--override key=value]... [--resume]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime abort (the last
// completed round stays checkpointed; rerun with --resume).

#include <chrono>
#include <cstdint>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hngfn/config.hpp"
#include "hngfn/experiments.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeAbort = 3;

void log_line(const std::string& msg) {
  const std::time_t now = std::time(nullptr);
  char stamp[16];
  std::strftime(stamp, sizeof(stamp), "%H:%M:%S", std::localtime(&now));
  std::cerr << "[" << stamp << "] " << msg << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypernetwork-conditioned GFlowNets for multi-objective optimization"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run an experiment");
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  bool resume = false;
  run->add_option("command", command, "synthetic | mobo | ablation | oracle-fixtures")
      ->required()
      ->check(CLI::IsMember({"synthetic", "mobo", "ablation", "oracle-fixtures"}));
  run->add_option("--config", config_path, "JSON config file (or a previous manifest.json)");
  run->add_option("--seed", seed, "Run this single seed instead of the configured list");
  run->add_option("--out", out, "Output directory");
  run->add_option("--override", overrides, "Set a config value, e.g. train.steps=200");
  run->add_flag("--resume", resume, "Continue MOBO seeds from their checkpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  using namespace hngfn;
  RunConfig cfg;
  const std::vector<std::string> args(argv, argv + argc);
  try {
    const Command cmd = parse_command(command);
    // Flags take precedence over the file and the overrides.
    if (seed) overrides.push_back("seeds=[" + std::to_string(*seed) + "]");
    if (!out.empty()) overrides.push_back("out=" + Json(out).dump());
    cfg = load_run_config(cmd, config_path, overrides);
    write_manifest(cfg, cfg.out, args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    switch (cfg.command) {
      case Command::kSynthetic: run_synthetic(cfg, log_line); break;
      case Command::kMobo: run_mobo_command(cfg, resume, log_line); break;
      case Command::kAblation: run_ablation_command(cfg, resume, log_line); break;
      case Command::kOracleFixtures: run_oracle_fixtures(cfg, log_line); break;
    }
  } catch (const RoundAborted& e) {
    std::cerr << "aborted: " << e.what() << "\nper-seed checkpoints are under " << cfg.out
              << "; rerun with --resume\n";
    return kRuntimeAbort;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return kRuntimeAbort;
  }
  log_line("done; outputs in " + cfg.out);
  return 0;
}
