// Copyright 2026 The fmcts Authors
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

// Command-line front end. Talks to the planner exclusively through the C API.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmcts/fmcts.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int report_failure(fmcts_status status) {
  std::cerr << "fmcts: error (" << fmcts_status_name(status) << "): " << fmcts_last_error() << "\n";
  switch (status) {
    case FMCTS_ERR_CONFIG:
    case FMCTS_ERR_UNKNOWN_ENVIRONMENT:
    case FMCTS_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

void print_row(const char* row, void*) { std::cout << row << "\n" << std::flush; }

// Owns a string returned by the library.
struct LibString {
  char* ptr = nullptr;
  ~LibString() { fmcts_string_free(ptr); }
};

struct TrainFlags {
  bool vanilla = false;
  bool no_abstraction = false;
  bool no_recon = false;
  bool frozen = false;
  bool unfrozen = false;
  std::int64_t steps = 0;

  fmcts_train_options options() const {
    fmcts_train_options o{};
    o.vanilla = vanilla ? 1 : 0;
    o.no_abstraction = no_abstraction ? 1 : 0;
    o.no_recon = no_recon ? 1 : 0;
    o.frozen_h = unfrozen ? 0 : (frozen ? 1 : -1);
    o.total_steps = steps;
    return o;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  auto* vanilla = cmd->add_flag("--vanilla", f.vanilla, "Force all-ones masks (baseline search)");
  auto* noabs = cmd->add_flag("--no-abstraction", f.no_abstraction,
                              "Train masked dynamics but search with all-ones masks");
  vanilla->excludes(noabs);
  cmd->add_flag("--no-recon", f.no_recon, "Set the reconstruction coefficient to 0");
  auto* frozen = cmd->add_flag("--frozen-h", f.frozen,
                               "Structure network trained by reconstruction only (default)");
  auto* unfrozen = cmd->add_flag("--unfrozen-h", f.unfrozen,
                                 "Let task losses reach the structure network");
  frozen->excludes(unfrozen);
  cmd->add_option("--steps", f.steps, "Override total gradient steps")->check(CLI::PositiveNumber);
}

int run_eval(const std::string& checkpoint, const std::string& env, int episodes,
             const std::vector<std::uint64_t>& seed_args, bool vanilla, int simulations,
             const std::string& out_path, bool print_shd_only) {
  fmcts_agent* agent = nullptr;
  if (auto s = fmcts_agent_load(checkpoint.c_str(), &agent); s != FMCTS_OK) return report_failure(s);
  std::unique_ptr<fmcts_agent, decltype(&fmcts_agent_free)> guard(agent, fmcts_agent_free);
  if (vanilla) fmcts_agent_set_vanilla(agent, 1);
  if (simulations > 0) {
    if (auto s = fmcts_agent_set_simulations(agent, simulations); s != FMCTS_OK) {
      return report_failure(s);
    }
  }
  std::vector<std::uint64_t> seeds = seed_args;
  if (seeds.size() <= 1) {
    const std::uint64_t base = seeds.empty() ? 0 : seeds.front();
    seeds.clear();
    for (int i = 0; i < episodes; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
  }
  fmcts_report* report = nullptr;
  if (auto s = fmcts_evaluate(agent, env.c_str(), nullptr, seeds.data(), seeds.size(), &report);
      s != FMCTS_OK) {
    return report_failure(s);
  }
  std::unique_ptr<fmcts_report, decltype(&fmcts_report_free)> rguard(report, fmcts_report_free);
  if (print_shd_only) {
    std::printf("shd_mean %.6f over %zu episodes\n", fmcts_report_shd_mean(report),
                fmcts_report_episodes(report));
  } else {
    LibString json;
    if (auto s = fmcts_report_json(report, &json.ptr); s != FMCTS_OK) return report_failure(s);
    std::cout << json.ptr << "\n";
  }
  LibString csv;
  if (auto s = fmcts_report_csv(report, &csv.ptr); s != FMCTS_OK) return report_failure(s);
  std::filesystem::path out = out_path;
  if (out.empty()) {
    out = std::filesystem::path(checkpoint).parent_path() /
          ((print_shd_only ? "shd_eval_" : "eval_") + env + ".csv");
  }
  std::ofstream file(out);
  if (!file) {
    std::cerr << "fmcts: error (io): cannot write " << out.string() << "\n";
    return kExitFailure;
  }
  file << csv.ptr;
  std::cerr << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree search with state-conditioned action abstraction over factored actions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fmcts_version()));

  // train
  std::string config, out;
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train an agent from a run config");
  train->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output run directory")->required();
  add_train_flags(train, train_flags);

  // eval
  std::string checkpoint, env;
  int episodes = 32;
  int simulations = 0;
  std::vector<std::uint64_t> seeds;
  bool eval_vanilla = false;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--env", env, "Environment id")->required();
  eval->add_option("--episodes", episodes, "Number of episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seeds", seeds, "Seed list, or a single base seed");
  eval->add_flag("--vanilla", eval_vanilla, "Search with all-ones masks");
  eval->add_option("--simulations", simulations, "Override the simulation budget");
  eval->add_option("--out", eval_out, "CSV output file (default: next to the checkpoint)");

  // shd-eval
  std::string shd_checkpoint, shd_env = "cmab";
  int shd_episodes = 32;
  auto* shd = app.add_subcommand("shd-eval", "Structural Hamming distance of the learned masks");
  shd->add_option("--checkpoint", shd_checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  shd->add_option("--env", shd_env, "Environment id (needs ground-truth masks)");
  shd->add_option("--episodes", shd_episodes, "Number of episodes")->check(CLI::PositiveNumber);

  // sweep
  std::string sweep_config, sweep_out = "runs/sweep", param;
  std::vector<std::string> values;
  TrainFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Train one run per parameter value");
  sweep->add_option("--config", sweep_config, "Base run config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "Config key to vary")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "Parent directory of the run directories");
  add_train_flags(sweep, sweep_flags);

  // export-metrics
  std::string run_dir, format = "csv";
  auto* exp = app.add_subcommand("export-metrics", "Print a run's metrics as CSV or JSON");
  exp->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*train) {
    const auto options = train_flags.options();
    const auto s = fmcts_train(config.c_str(), out.c_str(), &options, print_row, nullptr);
    if (s != FMCTS_OK) return report_failure(s);
    std::cerr << "wrote " << (std::filesystem::path(out) / "final.ckpt").string() << "\n";
    return 0;
  }
  if (*eval) {
    return run_eval(checkpoint, env, episodes, seeds, eval_vanilla, simulations, eval_out, false);
  }
  if (*shd) {
    return run_eval(shd_checkpoint, shd_env, shd_episodes, {}, false, 0, "", true);
  }
  if (*sweep) {
    std::string joined;
    for (const auto& v : values) joined += (joined.empty() ? "" : ",") + v;
    const auto options = sweep_flags.options();
    const auto s = fmcts_sweep(sweep_config.c_str(), sweep_out.c_str(), param.c_str(),
                               joined.c_str(), &options, print_row, nullptr);
    return s == FMCTS_OK ? 0 : report_failure(s);
  }
  if (*exp) {
    LibString text;
    const auto s = fmcts_export_metrics(run_dir.c_str(), format.c_str(), &text.ptr);
    if (s != FMCTS_OK) return report_failure(s);
    std::cout << text.ptr;
    return 0;
  }
  return kExitUsage;
}
