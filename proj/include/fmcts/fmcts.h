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

#ifndef FMCTS_FMCTS_H_
#define FMCTS_FMCTS_H_

/*
 * C interface of the fmcts planner.
 *
 * All functions return an fmcts_status; on failure a human-readable message
 * is available from fmcts_last_error() on the calling thread until the next
 * call into the library. Objects are opaque handles released with their
 * matching *_free function. Strings returned through char** out-parameters
 * are owned by the caller and released with fmcts_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FMCTS_API __declspec(dllexport)
#else
#define FMCTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fmcts_status {
  FMCTS_OK = 0,
  FMCTS_ERR_INVALID_ARGUMENT = 1,
  FMCTS_ERR_INVALID_DISTRIBUTION = 2,
  FMCTS_ERR_BRANCHING_CAP = 3,
  FMCTS_ERR_NUMERIC_FAULT = 4,
  FMCTS_ERR_DUPLICATE_CHILD = 5,
  FMCTS_ERR_EPISODE_TERMINATED = 6,
  FMCTS_ERR_INSUFFICIENT_LOOKAHEAD = 7,
  FMCTS_ERR_UNKNOWN_ENVIRONMENT = 8,
  FMCTS_ERR_CONFIG = 9,
  FMCTS_ERR_IO = 10,
  FMCTS_ERR_INTERNAL = 11
} fmcts_status;

FMCTS_API const char* fmcts_last_error(void);
FMCTS_API const char* fmcts_status_name(fmcts_status status);
FMCTS_API const char* fmcts_version(void);
FMCTS_API void fmcts_string_free(char* s);

/* ---- training --------------------------------------------------------- */

/* Mode overrides applied on top of the run config. Zero-initialise for "use
 * the config as is". frozen_h: -1 keep, 0 unfrozen, 1 frozen. */
typedef struct fmcts_train_options {
  int vanilla;        /* all-ones masks in training and search */
  int no_abstraction; /* masked training, all-ones search */
  int no_recon;       /* reconstruction coefficient 0 */
  int frozen_h;
  int64_t total_steps; /* > 0 overrides the config */
} fmcts_train_options;

/* Receives each metrics CSV row (without newline) as it is produced. */
typedef void (*fmcts_row_callback)(const char* row, void* user);

FMCTS_API fmcts_status fmcts_train(const char* config_path, const char* out_dir,
                                   const fmcts_train_options* options,
                                   fmcts_row_callback on_row, void* user);

/* Runs one training per value into out_dir/<param>=<value>. `values` is a
 * comma-separated list. */
FMCTS_API fmcts_status fmcts_sweep(const char* config_path, const char* out_dir,
                                   const char* param, const char* values,
                                   const fmcts_train_options* options,
                                   fmcts_row_callback on_row, void* user);

/* Writes the metrics of a run directory as "csv" or "json" into *out. */
FMCTS_API fmcts_status fmcts_export_metrics(const char* run_dir, const char* format, char** out);

/* ---- agents ----------------------------------------------------------- */

typedef struct fmcts_agent fmcts_agent;

FMCTS_API fmcts_status fmcts_agent_load(const char* checkpoint_path, fmcts_agent** out);
FMCTS_API void fmcts_agent_free(fmcts_agent* agent);
/* Forces all-ones masks in the agent's searches. */
FMCTS_API fmcts_status fmcts_agent_set_vanilla(fmcts_agent* agent, int vanilla);
FMCTS_API fmcts_status fmcts_agent_set_simulations(fmcts_agent* agent, int simulations);
FMCTS_API fmcts_status fmcts_agent_num_variables(const fmcts_agent* agent, size_t* out);
/* Runs one evaluation-mode search from `observation` and writes the chosen
 * action (num_variables entries) into `action`. `mask` (optional, may be
 * NULL) receives the root mask bits as 0/1. */
FMCTS_API fmcts_status fmcts_agent_plan(fmcts_agent* agent, const float* observation,
                                        size_t observation_width, uint64_t seed,
                                        int32_t* action, size_t num_variables,
                                        int32_t* mask);
/* Run configuration stored in the checkpoint, as JSON. */
FMCTS_API fmcts_status fmcts_agent_config_json(const fmcts_agent* agent, char** out);

/* ---- environments ----------------------------------------------------- */

typedef struct fmcts_env fmcts_env;

/* knobs_json may be NULL. */
FMCTS_API fmcts_status fmcts_env_create(const char* env_id, const char* knobs_json,
                                        fmcts_env** out);
FMCTS_API void fmcts_env_free(fmcts_env* env);
FMCTS_API fmcts_status fmcts_env_reset(fmcts_env* env, uint64_t seed);
FMCTS_API fmcts_status fmcts_env_observation_width(const fmcts_env* env, size_t* out);
FMCTS_API fmcts_status fmcts_env_num_variables(const fmcts_env* env, size_t* out);
FMCTS_API fmcts_status fmcts_env_cardinalities(const fmcts_env* env, int32_t* out, size_t n);
FMCTS_API fmcts_status fmcts_env_observe(const fmcts_env* env, float* out, size_t width);
FMCTS_API fmcts_status fmcts_env_step(fmcts_env* env, const int32_t* action, size_t n,
                                      double* reward, int* done);

/* ---- evaluation ------------------------------------------------------- */

typedef struct fmcts_report fmcts_report;

/* One evaluation episode per seed; knobs_json may be NULL. */
FMCTS_API fmcts_status fmcts_evaluate(const fmcts_agent* agent, const char* env_id,
                                      const char* knobs_json, const uint64_t* seeds,
                                      size_t num_seeds, fmcts_report** out);
FMCTS_API void fmcts_report_free(fmcts_report* report);
FMCTS_API double fmcts_report_return_mean(const fmcts_report* report);
FMCTS_API double fmcts_report_return_ci(const fmcts_report* report); /* half-width */
FMCTS_API double fmcts_report_shd_mean(const fmcts_report* report);  /* NaN if undefined */
FMCTS_API double fmcts_report_reduction(const fmcts_report* report); /* fraction */
FMCTS_API double fmcts_report_normalized_score(const fmcts_report* report);
FMCTS_API size_t fmcts_report_episodes(const fmcts_report* report);
FMCTS_API fmcts_status fmcts_report_json(const fmcts_report* report, char** out);
/* Metrics CSV row (header included) for the report. */
FMCTS_API fmcts_status fmcts_report_csv(const fmcts_report* report, char** out);

#ifdef __cplusplus
}
#endif

#endif /* FMCTS_FMCTS_H_ */
