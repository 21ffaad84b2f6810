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

#include "fmcts/fmcts.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "fmcts/checkpoint.hpp"
#include "fmcts/environments.hpp"
#include "fmcts/errors.hpp"
#include "fmcts/eval.hpp"
#include "fmcts/models.hpp"
#include "fmcts/training.hpp"

struct fmcts_agent {
  fmcts::ModelParams params;
  nlohmann::json run_config;
  fmcts::SearchConfig search;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
};

struct fmcts_env {
  std::unique_ptr<fmcts::Environment> env;
};

struct fmcts_report {
  fmcts::EvalReport report;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

namespace {

thread_local std::string g_last_error;

fmcts_status status_of(fmcts::ErrorCode code) {
  using fmcts::ErrorCode;
  switch (code) {
    case ErrorCode::kInvalidArgument: return FMCTS_ERR_INVALID_ARGUMENT;
    case ErrorCode::kInvalidDistribution: return FMCTS_ERR_INVALID_DISTRIBUTION;
    case ErrorCode::kBranchingCap: return FMCTS_ERR_BRANCHING_CAP;
    case ErrorCode::kNumericFault: return FMCTS_ERR_NUMERIC_FAULT;
    case ErrorCode::kDuplicateChild: return FMCTS_ERR_DUPLICATE_CHILD;
    case ErrorCode::kEpisodeTerminated: return FMCTS_ERR_EPISODE_TERMINATED;
    case ErrorCode::kInsufficientLookahead: return FMCTS_ERR_INSUFFICIENT_LOOKAHEAD;
    case ErrorCode::kUnknownEnvironment: return FMCTS_ERR_UNKNOWN_ENVIRONMENT;
    case ErrorCode::kConfig: return FMCTS_ERR_CONFIG;
    case ErrorCode::kIo: return FMCTS_ERR_IO;
  }
  return FMCTS_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
fmcts_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return FMCTS_OK;
  } catch (const fmcts::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return FMCTS_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (p == nullptr) fmcts::fail(fmcts::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_knobs(const char* knobs_json) {
  if (knobs_json == nullptr || *knobs_json == '\0') return nlohmann::json::object();
  auto j = nlohmann::json::parse(knobs_json, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fmcts::fail(fmcts::ErrorCode::kConfig, "environment knobs must be a JSON object");
  }
  return j;
}

void apply_options(fmcts::RunConfig& c, const fmcts_train_options* o) {
  if (o == nullptr) return;
  if (o->vanilla) c.mode.vanilla = true;
  if (o->no_abstraction) c.mode.abstraction = false;
  if (o->no_recon) c.train.recon_coef = 0.0;
  if (o->frozen_h == 0) c.mode.frozen_h = false;
  if (o->frozen_h == 1) c.mode.frozen_h = true;
  if (o->total_steps > 0) c.total_steps = o->total_steps;
  if (c.mode.vanilla && !c.mode.abstraction) {
    fmcts::fail(fmcts::ErrorCode::kConfig, "vanilla and no-abstraction modes are exclusive");
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fmcts::fail(fmcts::ErrorCode::kIo, "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fmcts::fail(fmcts::ErrorCode::kConfig, "malformed JSON in " + path.string());
  return j;
}

void train_one(fmcts::RunConfig config, const std::filesystem::path& out,
               const fmcts_train_options* options, fmcts_row_callback on_row, void* user) {
  apply_options(config, options);
  try {
    config.validate();
  } catch (const fmcts::Error& e) {
    fmcts::fail(fmcts::ErrorCode::kConfig, e.what());
  }
  fmcts::run_training(config, out, [&](const fmcts::MetricsRow& row) {
    if (on_row != nullptr) on_row(fmcts::format_metrics_row(row).c_str(), user);
  });
}

}  // namespace

extern "C" {

const char* fmcts_last_error(void) { return g_last_error.c_str(); }

const char* fmcts_status_name(fmcts_status status) {
  switch (status) {
    case FMCTS_OK: return "ok";
    case FMCTS_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case FMCTS_ERR_INVALID_DISTRIBUTION: return "invalid-distribution";
    case FMCTS_ERR_BRANCHING_CAP: return "branching-cap";
    case FMCTS_ERR_NUMERIC_FAULT: return "numeric-fault";
    case FMCTS_ERR_DUPLICATE_CHILD: return "duplicate-child";
    case FMCTS_ERR_EPISODE_TERMINATED: return "episode-terminated";
    case FMCTS_ERR_INSUFFICIENT_LOOKAHEAD: return "insufficient-lookahead";
    case FMCTS_ERR_UNKNOWN_ENVIRONMENT: return "unknown-environment";
    case FMCTS_ERR_CONFIG: return "config";
    case FMCTS_ERR_IO: return "io";
    case FMCTS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* fmcts_version(void) { return "0.1.0"; }

void fmcts_string_free(char* s) { std::free(s); }

fmcts_status fmcts_train(const char* config_path, const char* out_dir,
                         const fmcts_train_options* options, fmcts_row_callback on_row,
                         void* user) {
  return guarded([&] {
    need(config_path, "config_path");
    need(out_dir, "out_dir");
    train_one(fmcts::load_run_config(config_path), out_dir, options, on_row, user);
  });
}

fmcts_status fmcts_sweep(const char* config_path, const char* out_dir, const char* param,
                         const char* values, const fmcts_train_options* options,
                         fmcts_row_callback on_row, void* user) {
  return guarded([&] {
    need(config_path, "config_path");
    need(out_dir, "out_dir");
    need(param, "param");
    need(values, "values");
    const auto base = read_json_file(config_path);
    std::vector<std::string> list;
    std::stringstream in(values);
    for (std::string v; std::getline(in, v, ',');) {
      if (v.empty()) fmcts::fail(fmcts::ErrorCode::kConfig, "empty value in sweep list");
      list.push_back(v);
    }
    if (list.empty()) fmcts::fail(fmcts::ErrorCode::kConfig, "sweep needs at least one value");
    // Validate every point before running any of them.
    std::vector<fmcts::RunConfig> configs;
    for (const auto& v : list) {
      auto j = base;
      fmcts::set_run_config_value(j, param, v);
      configs.push_back(fmcts::run_config_from_json(j));
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      train_one(configs[i], std::filesystem::path(out_dir) / (std::string(param) + "=" + list[i]),
                options, on_row, user);
    }
  });
}

fmcts_status fmcts_export_metrics(const char* run_dir, const char* format, char** out) {
  return guarded([&] {
    need(run_dir, "run_dir");
    need(format, "format");
    need(out, "out");
    const std::filesystem::path dir(run_dir);
    std::ifstream in(dir / "metrics.csv");
    if (!in) fmcts::fail(fmcts::ErrorCode::kIo, "no metrics.csv in " + dir.string());
    std::string header;
    std::getline(in, header);
    if (header != fmcts::kMetricsHeader) {
      fmcts::fail(fmcts::ErrorCode::kIo, "unexpected metrics header in " + dir.string());
    }
    std::vector<fmcts::MetricsRow> rows;
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) rows.push_back(fmcts::parse_metrics_row(line));
    }
    const std::string fmt(format);
    if (fmt == "csv") {
      std::string s = std::string(fmcts::kMetricsHeader) + "\n";
      for (const auto& r : rows) s += fmcts::format_metrics_row(r) + "\n";
      *out = copy_string(s);
    } else if (fmt == "json") {
      nlohmann::json j;
      if (std::filesystem::exists(dir / "config.json")) j["config"] = read_json_file(dir / "config.json");
      j["rows"] = nlohmann::json::array();
      auto num = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
      for (const auto& r : rows) {
        j["rows"].push_back({{"step", r.step},
                             {"seed", r.seed},
                             {"env", r.env},
                             {"episodic_return_mean", num(r.return_mean)},
                             {"episodic_return_ci", num(r.return_ci)},
                             {"shd_mean", num(r.shd_mean)},
                             {"reduction_pct", num(r.reduction_pct)},
                             {"loss_total", num(r.loss.total)},
                             {"loss_policy", num(r.loss.policy)},
                             {"loss_value", num(r.loss.value)},
                             {"loss_reward", num(r.loss.reward)},
                             {"loss_recon", num(r.loss.recon)},
                             {"loss_sparsity", num(r.loss.sparsity)}});
      }
      *out = copy_string(j.dump(2) + "\n");
    } else {
      fmcts::fail(fmcts::ErrorCode::kConfig, "unknown export format '" + fmt + "' (csv|json)");
    }
  });
}

fmcts_status fmcts_agent_load(const char* checkpoint_path, fmcts_agent** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = nullptr;
    const auto ckpt = fmcts::read_checkpoint(checkpoint_path);
    auto agent = std::make_unique<fmcts_agent>();
    agent->params = fmcts::model_from_checkpoint(ckpt);
    if (ckpt.metadata.contains("run_config")) {
      agent->run_config = ckpt.metadata.at("run_config");
      const auto config = fmcts::run_config_from_json(agent->run_config);
      agent->search = config.acting_search();
      agent->seed = config.seed;
    }
    agent->steps = ckpt.metadata.value("steps", std::int64_t{0});
    *out = agent.release();
  });
}

void fmcts_agent_free(fmcts_agent* agent) { delete agent; }

fmcts_status fmcts_agent_set_vanilla(fmcts_agent* agent, int vanilla) {
  return guarded([&] {
    need(agent, "agent");
    if (vanilla) agent->search.vanilla = true;
  });
}

fmcts_status fmcts_agent_set_simulations(fmcts_agent* agent, int simulations) {
  return guarded([&] {
    need(agent, "agent");
    if (simulations < 1) fmcts::fail(fmcts::ErrorCode::kInvalidArgument, "simulations must be >= 1");
    agent->search.num_simulations = simulations;
  });
}

fmcts_status fmcts_agent_num_variables(const fmcts_agent* agent, size_t* out) {
  return guarded([&] {
    need(agent, "agent");
    need(out, "out");
    *out = agent->params.action_space().num_variables();
  });
}

fmcts_status fmcts_agent_plan(fmcts_agent* agent, const float* observation,
                              size_t observation_width, uint64_t seed, int32_t* action,
                              size_t num_variables, int32_t* mask) {
  return guarded([&] {
    need(agent, "agent");
    need(observation, "observation");
    need(action, "action");
    const auto& space = agent->params.action_space();
    if (num_variables != space.num_variables()) {
      fmcts::fail(fmcts::ErrorCode::kInvalidArgument, "action buffer has the wrong length");
    }
    std::mt19937_64 rng(seed);
    const auto result = fmcts::run_search({observation, observation_width}, agent->params,
                                          agent->search, rng, {fmcts::SearchMode::kEvaluation});
    const auto a = fmcts::act(result, fmcts::SearchMode::kEvaluation, 1.0, rng);
    for (std::size_t i = 0; i < num_variables; ++i) {
      action[i] = a.values[i];
      if (mask != nullptr) mask[i] = result.root_mask.bits[i] ? 1 : 0;
    }
  });
}

fmcts_status fmcts_agent_config_json(const fmcts_agent* agent, char** out) {
  return guarded([&] {
    need(agent, "agent");
    need(out, "out");
    *out = copy_string(agent->run_config.dump(2));
  });
}

fmcts_status fmcts_env_create(const char* env_id, const char* knobs_json, fmcts_env** out) {
  return guarded([&] {
    need(env_id, "env_id");
    need(out, "out");
    *out = nullptr;
    auto env = std::make_unique<fmcts_env>();
    env->env = fmcts::make_environment(env_id, parse_knobs(knobs_json));
    env->env->reset(0);
    *out = env.release();
  });
}

void fmcts_env_free(fmcts_env* env) { delete env; }

fmcts_status fmcts_env_reset(fmcts_env* env, uint64_t seed) {
  return guarded([&] {
    need(env, "env");
    env->env->reset(seed);
  });
}

fmcts_status fmcts_env_observation_width(const fmcts_env* env, size_t* out) {
  return guarded([&] {
    need(env, "env");
    need(out, "out");
    *out = env->env->observation_width();
  });
}

fmcts_status fmcts_env_num_variables(const fmcts_env* env, size_t* out) {
  return guarded([&] {
    need(env, "env");
    need(out, "out");
    *out = env->env->action_space().num_variables();
  });
}

fmcts_status fmcts_env_cardinalities(const fmcts_env* env, int32_t* out, size_t n) {
  return guarded([&] {
    need(env, "env");
    need(out, "out");
    const auto& cards = env->env->action_space().cardinalities();
    if (n != cards.size()) fmcts::fail(fmcts::ErrorCode::kInvalidArgument, "wrong buffer length");
    for (std::size_t i = 0; i < n; ++i) out[i] = cards[i];
  });
}

fmcts_status fmcts_env_observe(const fmcts_env* env, float* out, size_t width) {
  return guarded([&] {
    need(env, "env");
    need(out, "out");
    const auto obs = env->env->observe();
    if (width != obs.size()) fmcts::fail(fmcts::ErrorCode::kInvalidArgument, "wrong buffer width");
    std::copy(obs.begin(), obs.end(), out);
  });
}

fmcts_status fmcts_env_step(fmcts_env* env, const int32_t* action, size_t n, double* reward,
                            int* done) {
  return guarded([&] {
    need(env, "env");
    need(action, "action");
    fmcts::FactoredAction a;
    a.values.assign(action, action + n);
    const auto r = env->env->step(a);
    if (reward != nullptr) *reward = r.reward;
    if (done != nullptr) *done = r.done ? 1 : 0;
  });
}

fmcts_status fmcts_evaluate(const fmcts_agent* agent, const char* env_id, const char* knobs_json,
                            const uint64_t* seeds, size_t num_seeds, fmcts_report** out) {
  return guarded([&] {
    need(agent, "agent");
    need(env_id, "env_id");
    need(seeds, "seeds");
    need(out, "out");
    *out = nullptr;
    if (num_seeds == 0) fmcts::fail(fmcts::ErrorCode::kInvalidArgument, "no evaluation seeds");
    nlohmann::json knobs = parse_knobs(knobs_json);
    if ((knobs_json == nullptr || *knobs_json == '\0') && agent->run_config.contains("env_knobs") &&
        agent->run_config.value("env", std::string()) == env_id) {
      knobs = agent->run_config.at("env_knobs");
    }
    auto report = std::make_unique<fmcts_report>();
    report->report = fmcts::evaluate(agent->params, env_id, knobs, agent->search,
                                     std::span<const std::uint64_t>(seeds, num_seeds));
    report->step = agent->steps;
    report->seed = agent->seed;
    *out = report.release();
  });
}

void fmcts_report_free(fmcts_report* report) { delete report; }

double fmcts_report_return_mean(const fmcts_report* r) {
  return r ? r->report.return_ci.mean : std::nan("");
}
double fmcts_report_return_ci(const fmcts_report* r) {
  return r ? r->report.return_ci.half_width() : std::nan("");
}
double fmcts_report_shd_mean(const fmcts_report* r) { return r ? r->report.shd_mean : std::nan(""); }
double fmcts_report_reduction(const fmcts_report* r) {
  return r ? r->report.reduction : std::nan("");
}
double fmcts_report_normalized_score(const fmcts_report* r) {
  return r ? r->report.normalized_score : std::nan("");
}
size_t fmcts_report_episodes(const fmcts_report* r) { return r ? r->report.returns.size() : 0; }

fmcts_status fmcts_report_json(const fmcts_report* report, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    const auto& r = report->report;
    auto num = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
    nlohmann::json j{{"env", r.env},
                     {"step", report->step},
                     {"seeds", r.seeds},
                     {"returns", r.returns},
                     {"return_mean", r.return_ci.mean},
                     {"return_ci_lower", r.return_ci.lower},
                     {"return_ci_upper", r.return_ci.upper},
                     {"shd_mean", num(r.shd_mean)},
                     {"states", r.states},
                     {"reduction", r.reduction},
                     {"normalized_score", r.normalized_score}};
    *out = copy_string(j.dump(2));
  });
}

fmcts_status fmcts_report_csv(const fmcts_report* report, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "out");
    fmcts::MetricsRow row;
    row.step = report->step;
    row.seed = report->seed;
    row.env = report->report.env;
    row.return_mean = report->report.return_ci.mean;
    row.return_ci = report->report.return_ci.half_width();
    row.shd_mean = report->report.shd_mean;
    row.reduction_pct = 100.0 * report->report.reduction;
    const double nan = std::nan("");
    row.loss = {nan, nan, nan, nan, nan, nan, nan};
    *out = copy_string(std::string(fmcts::kMetricsHeader) + "\n" + fmcts::format_metrics_row(row) +
                       "\n");
  });
}

}  // extern "C"
