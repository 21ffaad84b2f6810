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

#pragma once

// Self-play training: replay buffer, bootstrapped targets, the K-step loss
// with the structure-network gradient routing, and the run loop.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fmcts/environments.hpp"
#include "fmcts/mcts.hpp"
#include "fmcts/models.hpp"
#include "fmcts/nn.hpp"
#include "json.hpp"

namespace fmcts {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  int unroll_steps = 5;
  int td_steps = 5;
  int batch_size = 64;
  double policy_coef = 1.0;
  double value_coef = 0.25;
  double reward_coef = 1.0;
  // Multiplies the whole reconstruction objective, sparsity term included.
  double recon_coef = 1.0;
  // Per-dimension weight on the squared reconstruction error. A weight w
  // makes a narrow observation count like one tiled w times wider.
  double recon_weight = 1.0;
  // Gradient steps trained with all-ones masks (h untouched) before the
  // straight-through mask path is switched on.
  std::int64_t structure_warmup = 0;
  double sparsity_lambda = 0.01;
  double gumbel_beta = 1.0;
  int target_interval = 200;
  std::size_t replay_capacity = 100000;
  std::size_t min_replay = 5000;
  int updates_per_episode = 25;
  double temperature = 1.0;
  nn::AdamWConfig optimizer;

  void validate() const;
};

// How masks enter the unrolled dynamics during training.
enum class MaskPath {
  kHard,     // straight-through Gumbel-Sigmoid: hard bits forward, relaxed gradient
  kRelaxed,  // relaxed values forward and backward (differentiable surrogate)
  kAllOnes,  // no abstraction (baseline model class)
};

// Experiment mode flags.
struct ModeConfig {
  bool vanilla = false;      // all-ones masks in training and search
  bool abstraction = true;   // false: masked training, all-ones search
  bool frozen_h = true;      // false: task losses also reach h through the mask path
  std::string name() const;  // "abstraction", "vanilla" or "no-abstraction"
};

struct RunConfig {
  std::string env = "cmab";
  nlohmann::json env_knobs = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::int64_t total_steps = 20000;
  std::int64_t eval_interval = 2000;
  int eval_episodes = 32;
  std::uint64_t eval_seed = 1000000;
  std::size_t latent_width = 64;
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 2;
  SearchConfig search;
  TrainConfig train;
  ModeConfig mode;

  void validate() const;
  SearchConfig acting_search() const;  // search config with mode applied
};

// Flat JSON object; unknown keys raise a config error.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);
// Sets one key of the flat schema from a string value (used by sweeps).
void set_run_config_value(nlohmann::json& j, const std::string& key, const std::string& value);

// ---------------------------------------------------------------------------
// Trajectories and replay

struct Episode {
  std::vector<std::vector<float>> observations;  // length + 1 (final included)
  std::vector<FactoredAction> actions;
  std::vector<double> rewards;
  std::vector<std::vector<double>> policies;  // unfolded search policies
  std::vector<double> root_values;
  std::vector<std::optional<AbstractionMask>> true_masks;
  // Bootstrap values of the target network, cached per target version.
  std::vector<double> target_values;
  std::int64_t target_version = -1;

  std::size_t length() const { return actions.size(); }
  double episode_return() const;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::size_t min_fill);

  void add(Episode episode);
  std::size_t transitions() const { return transitions_; }
  std::size_t episodes() const { return episodes_.size(); }
  bool ready() const { return transitions_ >= min_fill_; }
  std::size_t min_fill() const { return min_fill_; }

  // Uniform over stored transitions; errors before the minimum fill.
  std::pair<std::size_t, std::size_t> sample(std::mt19937_64& rng) const;
  Episode& episode(std::size_t i) { return episodes_.at(i); }
  const Episode& episode(std::size_t i) const { return episodes_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t min_fill_;
  std::size_t transitions_ = 0;
  std::deque<Episode> episodes_;
};

struct StepTargets {
  double value = 0.0;
  double reward = 0.0;
  std::vector<double> policy;  // empty past the end of the episode
};

// Targets for positions t..t+K of `episode`. `bootstrap(i)` is the target
// network value of observation i; it is only queried for i < length.
// value_t = sum_{j<TD} g^j r_{t+j} + g^TD v(s_{t+TD}), truncated at the end.
std::vector<StepTargets> compute_targets(const Episode& episode, std::size_t t, int unroll_steps,
                                         int td_steps, double discount,
                                         const std::function<double(std::size_t)>& bootstrap);

// ---------------------------------------------------------------------------
// Loss

struct LossReport {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double reward = 0.0;
  double recon = 0.0;
  double sparsity = 0.0;
  double grad_norm = 0.0;

  LossReport& operator+=(const LossReport& o);
  LossReport scaled(double s) const;
};

// One batch in matrix form; rows are batch elements.
struct Batch {
  std::size_t size = 0;
  int unroll_steps = 0;
  nn::Matrix<float> observation;                // B x O
  std::vector<nn::Matrix<float>> actions;       // K x (B x E), unmasked one-hot
  std::vector<nn::Matrix<float>> target_obs;    // K x (B x O)
  std::vector<nn::Matrix<float>> policy;        // (K+1) x (B x |A|)
  std::vector<std::vector<float>> has_policy;   // (K+1) x B
  std::vector<std::vector<float>> value;        // (K+1) x B, transformed
  std::vector<std::vector<float>> reward;       // K x B, transformed
  std::vector<nn::Matrix<double>> gumbel_u;     // K x (B x n), open (0,1)
};

struct LossWeights {
  double policy = 1.0;
  double value = 0.25;
  double reward = 1.0;
  double recon = 1.0;
  double recon_weight = 1.0;
  double sparsity_lambda = 0.0;
  double gumbel_beta = 1.0;
  MaskPath mask_path = MaskPath::kHard;
  bool frozen_h = true;

  static LossWeights from(const TrainConfig& c, const ModeConfig& m);
};

// Forward and backward pass of the K-step loss; gradients are accumulated
// into `model` (call zero_grad() first). The structure network receives
// gradient only from the reconstruction objective unless `frozen_h` is off.
template <typename T>
LossReport forward_backward(Model<T>& model, const Batch& batch, const LossWeights& w);

extern template LossReport forward_backward<float>(Model<float>&, const Batch&,
                                                   const LossWeights&);
extern template LossReport forward_backward<double>(Model<double>&, const Batch&,
                                                    const LossWeights&);

// Loss value only (no gradient side effects beyond a scratch copy).
template <typename T>
double loss_value(const Model<T>& model, const Batch& batch, const LossWeights& w);

// ---------------------------------------------------------------------------
// Trainer

class Trainer {
 public:
  explicit Trainer(RunConfig config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const RunConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const ModelParams& target_params() const { return target_; }
  ReplayBuffer& replay() { return replay_; }
  std::int64_t steps() const { return steps_; }
  Environment& env() { return *env_; }

  // Rolls one episode; uniform random actions with uniform policy targets
  // when `random_policy` is set, search-driven acting otherwise.
  Episode collect_episode(bool random_policy);
  // Fills the buffer with random-policy episodes up to its minimum fill.
  void warmup();
  Batch sample_batch();
  LossReport train_step();
  void sync_target();

 private:
  double bootstrap_value(Episode& episode, std::size_t index);

  RunConfig config_;
  std::unique_ptr<Environment> env_;
  ModelParams params_;
  ModelParams target_;
  std::unique_ptr<nn::AdamW<float>> optimizer_;
  ReplayBuffer replay_;
  std::mt19937_64 rng_;
  std::int64_t steps_ = 0;
  std::int64_t target_version_ = 0;
  std::uint64_t episodes_collected_ = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,seed,env,episodic_return_mean,episodic_return_ci,shd_mean,reduction_pct,loss_total,"
    "loss_policy,loss_value,loss_reward,loss_recon,loss_sparsity";

struct MetricsRow {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::string env;
  double return_mean = 0.0;
  double return_ci = 0.0;  // half-width of the 95% bootstrap interval
  double shd_mean = 0.0;   // NaN when the environment has no ground truth
  double reduction_pct = 0.0;
  LossReport loss;
};

std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);

struct TrainingOutcome {
  std::vector<MetricsRow> metrics;
  std::filesystem::path checkpoint;
};

// Full run: warmup, alternating collection and updates, periodic evaluation.
// Writes config.json, metrics.csv and final.ckpt into `out_dir`.
TrainingOutcome run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const MetricsRow&)>& on_row = {});

}  // namespace fmcts
