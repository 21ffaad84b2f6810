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

#include "fmcts/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fmcts/errors.hpp"
#include "fmcts/eval.hpp"

namespace fmcts {

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  require(unroll_steps >= 1, "unroll_steps must be at least 1");
  require(td_steps >= 1, "td_steps must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(policy_coef >= 0 && value_coef >= 0 && reward_coef >= 0 && recon_coef >= 0,
          "loss coefficients must be non-negative");
  require(sparsity_lambda >= 0.0, "sparsity_lambda must be non-negative");
  require(recon_weight > 0.0, "recon_weight must be positive");
  require(structure_warmup >= 0, "structure_warmup must be non-negative");
  require(gumbel_beta > 0.0, "gumbel_beta must be positive");
  require(target_interval >= 1, "target_interval must be at least 1");
  require(replay_capacity >= 1, "replay_capacity must be positive");
  require(min_replay >= 1 && min_replay <= replay_capacity,
          "min_replay must lie in [1, replay_capacity]");
  require(updates_per_episode >= 1, "updates_per_episode must be at least 1");
  require(temperature > 0.0, "temperature must be positive");
  require(optimizer.learning_rate > 0.0, "learning_rate must be positive");
  require(optimizer.max_grad_norm > 0.0, "max_grad_norm must be positive");
}

std::string ModeConfig::name() const {
  if (vanilla) return "vanilla";
  if (!abstraction) return "no-abstraction";
  return "abstraction";
}

void RunConfig::validate() const {
  if (!is_known_environment(env)) fail(ErrorCode::kConfig, "unknown environment id '" + env + "'");
  require(total_steps >= 0, "total_steps must be non-negative");
  require(eval_interval >= 1, "eval_interval must be at least 1");
  require(eval_episodes >= 1, "eval_episodes must be at least 1");
  search.validate();
  train.validate();
}

SearchConfig RunConfig::acting_search() const {
  SearchConfig s = search;
  s.vanilla = search.vanilla || mode.vanilla || !mode.abstraction;
  return s;
}

namespace {

using Json = nlohmann::json;

// Every key of the flat run-config schema.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "env", "env_knobs", "seed", "total_steps", "eval_interval", "eval_episodes", "eval_seed",
      "latent_width", "hidden_width", "hidden_layers",
      // search
      "num_simulations", "c1", "c2", "discount", "dirichlet_ratio", "dirichlet_alpha",
      "mask_threshold", "branching_cap", "unvisited_parent_q",
      // training
      "unroll_steps", "td_steps", "batch_size", "policy_coef", "value_coef", "reward_coef",
      "recon_coef", "recon_weight", "structure_warmup", "sparsity_lambda", "gumbel_beta", "target_interval", "replay_capacity",
      "min_replay", "updates_per_episode", "temperature", "learning_rate", "beta1", "beta2",
      "adam_epsilon", "weight_decay", "max_grad_norm",
      // mode
      "mode", "vanilla", "abstraction", "frozen_h"};
  return keys;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "run config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known_keys().count(key)) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    c.env = j.value("env", c.env);
    c.env_knobs = j.value("env_knobs", c.env_knobs);
    c.seed = j.value("seed", c.seed);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    c.latent_width = j.value("latent_width", c.latent_width);
    c.hidden_width = j.value("hidden_width", c.hidden_width);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    if (!j.contains("num_simulations")) {
      c.search.num_simulations = c.env == "cmab" ? 15 : 50;
    }
    from_json(j, c.search);
    c.search.vanilla = false;
    auto& t = c.train;
    t.unroll_steps = j.value("unroll_steps", t.unroll_steps);
    t.td_steps = j.value("td_steps", t.td_steps);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.policy_coef = j.value("policy_coef", t.policy_coef);
    t.value_coef = j.value("value_coef", t.value_coef);
    t.reward_coef = j.value("reward_coef", t.reward_coef);
    t.recon_coef = j.value("recon_coef", t.recon_coef);
    t.recon_weight = j.value("recon_weight", t.recon_weight);
    t.structure_warmup = j.value("structure_warmup", t.structure_warmup);
    if (!j.contains("sparsity_lambda")) t.sparsity_lambda = c.env == "cmab" ? 0.01 : 0.0;
    t.sparsity_lambda = j.value("sparsity_lambda", t.sparsity_lambda);
    t.gumbel_beta = j.value("gumbel_beta", t.gumbel_beta);
    t.target_interval = j.value("target_interval", t.target_interval);
    t.replay_capacity = j.value("replay_capacity", t.replay_capacity);
    t.min_replay = j.value("min_replay", t.min_replay);
    t.updates_per_episode = j.value("updates_per_episode", t.updates_per_episode);
    t.temperature = j.value("temperature", t.temperature);
    t.optimizer.learning_rate = j.value("learning_rate", t.optimizer.learning_rate);
    t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
    t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
    t.optimizer.epsilon = j.value("adam_epsilon", t.optimizer.epsilon);
    t.optimizer.weight_decay = j.value("weight_decay", t.optimizer.weight_decay);
    t.optimizer.max_grad_norm = j.value("max_grad_norm", t.optimizer.max_grad_norm);
    c.mode.vanilla = j.value("vanilla", c.mode.vanilla);
    c.mode.abstraction = j.value("abstraction", c.mode.abstraction);
    c.mode.frozen_h = j.value("frozen_h", c.mode.frozen_h);
    if (j.contains("mode")) {
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "vanilla") {
        c.mode.vanilla = true;
      } else if (mode == "no-abstraction") {
        c.mode.abstraction = false;
      } else if (mode != "abstraction") {
        fail(ErrorCode::kConfig, "unknown mode '" + mode + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad config value: ") + e.what());
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json j;
  to_json(j, c.search);
  j.erase("vanilla");
  const auto& t = c.train;
  j.update({{"env", c.env},
            {"env_knobs", c.env_knobs},
            {"seed", c.seed},
            {"total_steps", c.total_steps},
            {"eval_interval", c.eval_interval},
            {"eval_episodes", c.eval_episodes},
            {"eval_seed", c.eval_seed},
            {"latent_width", c.latent_width},
            {"hidden_width", c.hidden_width},
            {"hidden_layers", c.hidden_layers},
            {"unroll_steps", t.unroll_steps},
            {"td_steps", t.td_steps},
            {"batch_size", t.batch_size},
            {"policy_coef", t.policy_coef},
            {"value_coef", t.value_coef},
            {"reward_coef", t.reward_coef},
            {"recon_coef", t.recon_coef},
            {"recon_weight", t.recon_weight},
            {"structure_warmup", t.structure_warmup},
            {"sparsity_lambda", t.sparsity_lambda},
            {"gumbel_beta", t.gumbel_beta},
            {"target_interval", t.target_interval},
            {"replay_capacity", t.replay_capacity},
            {"min_replay", t.min_replay},
            {"updates_per_episode", t.updates_per_episode},
            {"temperature", t.temperature},
            {"learning_rate", t.optimizer.learning_rate},
            {"beta1", t.optimizer.beta1},
            {"beta2", t.optimizer.beta2},
            {"adam_epsilon", t.optimizer.epsilon},
            {"weight_decay", t.optimizer.weight_decay},
            {"max_grad_norm", t.optimizer.max_grad_norm},
            {"mode", c.mode.name()},
            {"frozen_h", c.mode.frozen_h}});
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, "malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void set_run_config_value(Json& j, const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  // Accept JSON literals (numbers, booleans, quoted strings); bare words are strings.
  Json parsed = Json::parse(value, nullptr, false);
  j[key] = parsed.is_discarded() ? Json(value) : parsed;
}

// ---------------------------------------------------------------------------
// Replay

double Episode::episode_return() const {
  double r = 0.0;
  for (double x : rewards) r += x;
  return r;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t min_fill)
    : capacity_(capacity), min_fill_(min_fill) {
  require(capacity >= 1, "replay capacity must be positive");
  require(min_fill <= capacity, "minimum fill exceeds capacity");
}

void ReplayBuffer::add(Episode episode) {
  require(episode.length() > 0, "cannot store an empty episode");
  require(episode.observations.size() == episode.length() + 1,
          "episode needs one more observation than actions");
  transitions_ += episode.length();
  episodes_.push_back(std::move(episode));
  while (transitions_ > capacity_ && episodes_.size() > 1) {
    transitions_ -= episodes_.front().length();
    episodes_.pop_front();
  }
}

std::pair<std::size_t, std::size_t> ReplayBuffer::sample(std::mt19937_64& rng) const {
  if (!ready()) {
    fail(ErrorCode::kInvalidArgument, "replay sampled before the minimum fill (" +
                                          std::to_string(transitions_) + " < " +
                                          std::to_string(min_fill_) + ")");
  }
  std::size_t index = std::uniform_int_distribution<std::size_t>(0, transitions_ - 1)(rng);
  for (std::size_t e = 0; e < episodes_.size(); ++e) {
    if (index < episodes_[e].length()) return {e, index};
    index -= episodes_[e].length();
  }
  fail(ErrorCode::kInvalidArgument, "replay index out of range");
}

std::vector<StepTargets> compute_targets(const Episode& episode, std::size_t t, int unroll_steps,
                                         int td_steps, double discount,
                                         const std::function<double(std::size_t)>& bootstrap) {
  const std::size_t length = episode.length();
  if (t >= length) {
    fail(ErrorCode::kInsufficientLookahead,
         "target position " + std::to_string(t) + " outside an episode of length " +
             std::to_string(length));
  }
  std::vector<StepTargets> out(static_cast<std::size_t>(unroll_steps) + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t i = t + k;
    auto& target = out[k];
    if (k > 0 && i - 1 < length) target.reward = episode.rewards[i - 1];
    if (i >= length) continue;  // absorbing: zero value, no policy
    double value = 0.0;
    double scale = 1.0;
    for (int j = 0; j < td_steps && i + static_cast<std::size_t>(j) < length; ++j) {
      value += scale * episode.rewards[i + static_cast<std::size_t>(j)];
      scale *= discount;
    }
    const std::size_t boot = i + static_cast<std::size_t>(td_steps);
    if (boot < length) value += std::pow(discount, td_steps) * bootstrap(boot);
    target.value = value;
    target.policy = episode.policies[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

LossReport& LossReport::operator+=(const LossReport& o) {
  total += o.total;
  policy += o.policy;
  value += o.value;
  reward += o.reward;
  recon += o.recon;
  sparsity += o.sparsity;
  grad_norm += o.grad_norm;
  return *this;
}

LossReport LossReport::scaled(double s) const {
  LossReport r = *this;
  r.total *= s;
  r.policy *= s;
  r.value *= s;
  r.reward *= s;
  r.recon *= s;
  r.sparsity *= s;
  r.grad_norm *= s;
  return r;
}

LossWeights LossWeights::from(const TrainConfig& c, const ModeConfig& m) {
  LossWeights w;
  w.policy = c.policy_coef;
  w.value = c.value_coef;
  w.reward = c.reward_coef;
  w.recon = c.recon_coef;
  w.recon_weight = c.recon_weight;
  w.sparsity_lambda = m.vanilla ? 0.0 : c.sparsity_lambda;
  w.gumbel_beta = c.gumbel_beta;
  w.mask_path = m.vanilla ? MaskPath::kAllOnes : MaskPath::kHard;
  w.frozen_h = m.frozen_h;
  return w;
}

namespace {

template <typename T>
using Mat = nn::Matrix<T>;

// Gradient of a mask-weighted one-hot encoding with respect to the mask:
// dM(b, i) = sum over block i of dEnc(b, j) * onehot(b, j).
template <typename T>
Mat<T> mask_gradient(const FactoredActionSpace& space, const Mat<T>& d_enc, const Mat<T>& onehot) {
  const auto n = space.num_variables();
  Mat<T> dm = Mat<T>::Zero(d_enc.rows(), static_cast<Eigen::Index>(n));
  for (Eigen::Index b = 0; b < d_enc.rows(); ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto off = static_cast<Eigen::Index>(space.block_offset(i));
      T s = T(0);
      for (int v = 0; v < space.cardinality(i); ++v) s += d_enc(b, off + v) * onehot(b, off + v);
      dm(b, static_cast<Eigen::Index>(i)) = s;
    }
  }
  return dm;
}

}  // namespace

template <typename T>
LossReport forward_backward(Model<T>& model, const Batch& batch, const LossWeights& w) {
  const auto& space = model.action_space();
  const int K = batch.unroll_steps;
  const auto B = static_cast<Eigen::Index>(batch.size);
  const auto n = static_cast<Eigen::Index>(space.num_variables());
  const auto L = static_cast<Eigen::Index>(model.config().latent_width);
  const auto E = static_cast<Eigen::Index>(space.encoding_width());
  require(K >= 1 && B >= 1, "empty batch");
  require(batch.actions.size() == static_cast<std::size_t>(K), "batch action count != K");
  const bool masked = w.mask_path != MaskPath::kAllOnes;

  using Tape = typename nn::Mlp<T>::Tape;
  const std::size_t steps = static_cast<std::size_t>(K) + 1;

  // ---- forward ----
  std::vector<Mat<T>> z(steps);
  Tape enc_tape;
  z[0] = model.encoder.forward(batch.observation.template cast<T>(), &enc_tape);
  std::vector<Tape> h_tape(steps), dyn_tape(steps);
  std::vector<Mat<T>> onehot(steps), mask(steps), mask_grad(steps);
  for (int k = 1; k <= K; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    onehot[ks] = batch.actions[ks - 1].template cast<T>();
    Mat<T> m = Mat<T>::Ones(B, n);
    if (masked) {
      const Mat<T> p = model.structure.forward(z[ks - 1], &h_tape[ks]);
      mask_grad[ks].resize(B, n);
      const auto& u = batch.gumbel_u[ks - 1];
      for (Eigen::Index b = 0; b < B; ++b) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto g = nn::gumbel_sigmoid_st(static_cast<double>(p(b, i)), u(b, i), w.gumbel_beta);
          m(b, i) = static_cast<T>(w.mask_path == MaskPath::kHard ? static_cast<double>(g.hard)
                                                                   : g.relaxed);
          mask_grad[ks](b, i) = static_cast<T>(g.grad_dp);
        }
      }
    }
    Mat<T> x(B, L + E);
    x.leftCols(L) = z[ks - 1];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto off = static_cast<Eigen::Index>(space.block_offset(static_cast<std::size_t>(i)));
      const auto width = space.cardinality(static_cast<std::size_t>(i));
      x.middleCols(L + off, width) =
          onehot[ks].middleCols(off, width).array().colwise() * m.col(i).array();
    }
    mask[ks] = std::move(m);
    z[ks] = model.dynamics.forward(x, &dyn_tape[ks]);
  }

  // ---- losses and head gradients ----
  LossReport report;
  std::vector<Mat<T>> dza(steps), dzb(steps);
  for (auto& d : dza) d = Mat<T>::Zero(B, L);
  for (auto& d : dzb) d = Mat<T>::Zero(B, L);
  const T inv_b = T(1) / static_cast<T>(B);
  const T policy_scale = static_cast<T>(w.policy) / static_cast<T>(K + 1) * inv_b;
  const T value_scale = static_cast<T>(w.value) / static_cast<T>(K + 1) * inv_b;
  const T reward_scale = static_cast<T>(w.reward) / static_cast<T>(K) * inv_b;
  const T recon_scale = static_cast<T>(w.recon * w.recon_weight) / static_cast<T>(K) * inv_b;
  const T sparsity_scale = static_cast<T>(w.recon * w.sparsity_lambda) / static_cast<T>(K) * inv_b;
  double policy_sum = 0.0, value_sum = 0.0, reward_sum = 0.0, recon_sum = 0.0, sparse_sum = 0.0;

  for (std::size_t k = 0; k < steps; ++k) {
    // policy
    Tape tape;
    const Mat<T> logits = model.policy.forward(z[k], &tape);
    const Mat<T> target = batch.policy[k].template cast<T>();
    Mat<T> dlogits = Mat<T>::Zero(B, logits.cols());
    for (Eigen::Index b = 0; b < B; ++b) {
      if (batch.has_policy[k][static_cast<std::size_t>(b)] == 0.0f) continue;
      const T mx = logits.row(b).maxCoeff();
      const T lse = mx + std::log((logits.row(b).array() - mx).exp().sum());
      policy_sum += static_cast<double>(-(target.row(b).array() * (logits.row(b).array() - lse)).sum());
      const auto probs = (logits.row(b).array() - lse).exp();
      dlogits.row(b) = (probs * target.row(b).sum() - target.row(b).array()).matrix() * policy_scale;
    }
    dzb[k] += model.policy.backward(tape, dlogits);

    // value
    const Mat<T> v = model.value.forward(z[k], &tape);
    Mat<T> dv(B, 1);
    for (Eigen::Index b = 0; b < B; ++b) {
      const T diff = v(b, 0) - static_cast<T>(batch.value[k][static_cast<std::size_t>(b)]);
      value_sum += static_cast<double>(diff * diff);
      dv(b, 0) = T(2) * diff * value_scale;
    }
    dzb[k] += model.value.backward(tape, dv);

    if (k == 0) continue;
    // reward of the transition into step k
    const Mat<T> r = model.reward.forward(z[k], &tape);
    Mat<T> dr(B, 1);
    for (Eigen::Index b = 0; b < B; ++b) {
      const T diff = r(b, 0) - static_cast<T>(batch.reward[k - 1][static_cast<std::size_t>(b)]);
      reward_sum += static_cast<double>(diff * diff);
      dr(b, 0) = T(2) * diff * reward_scale;
    }
    dzb[k] += model.reward.backward(tape, dr);

    // reconstruction
    const Mat<T> rec = model.decoder.forward(z[k], &tape);
    const Mat<T> diff = rec - batch.target_obs[k - 1].template cast<T>();
    recon_sum += static_cast<double>(diff.squaredNorm());
    dza[k] += model.decoder.backward(tape, (T(2) * recon_scale) * diff);
    if (masked) sparse_sum += static_cast<double>(mask[k].cwiseAbs().sum());
  }

  // ---- backward through the unroll ----
  for (int k = K; k >= 1; --k) {
    const auto ks = static_cast<std::size_t>(k);
    // Reconstruction stream: reaches h through the mask path.
    const Mat<T> dxa = model.dynamics.backward(dyn_tape[ks], dza[ks]);
    dza[ks - 1] += dxa.leftCols(L);
    // Task stream: the masked action encoding is treated as a constant.
    const Mat<T> dxb = model.dynamics.backward(dyn_tape[ks], dzb[ks]);
    dzb[ks - 1] += dxb.leftCols(L);
    if (!masked) continue;
    Mat<T> dm = mask_gradient<T>(space, dxa.rightCols(E), onehot[ks]);
    dm.array() += sparsity_scale;
    dza[ks - 1] += model.structure.backward(h_tape[ks], dm.cwiseProduct(mask_grad[ks]));
    if (!w.frozen_h) {
      const Mat<T> dmb = mask_gradient<T>(space, dxb.rightCols(E), onehot[ks]);
      dzb[ks - 1] += model.structure.backward(h_tape[ks], dmb.cwiseProduct(mask_grad[ks]));
    }
  }
  model.encoder.backward(enc_tape, dza[0] + dzb[0]);

  const double b = static_cast<double>(B);
  report.policy = policy_sum / (static_cast<double>(K + 1) * b);
  report.value = value_sum / (static_cast<double>(K + 1) * b);
  report.reward = reward_sum / (static_cast<double>(K) * b);
  report.recon = recon_sum / (static_cast<double>(K) * b);
  report.sparsity = sparse_sum / (static_cast<double>(K) * b);
  report.total = w.policy * report.policy + w.value * report.value + w.reward * report.reward +
                 w.recon * (w.recon_weight * report.recon + w.sparsity_lambda * report.sparsity);
  if (!std::isfinite(report.total)) {
    fail(ErrorCode::kNumericFault,
         "non-finite loss (policy " + std::to_string(report.policy) + ", value " +
             std::to_string(report.value) + ", reward " + std::to_string(report.reward) +
             ", recon " + std::to_string(report.recon) + ")");
  }
  return report;
}

template LossReport forward_backward<float>(Model<float>&, const Batch&, const LossWeights&);
template LossReport forward_backward<double>(Model<double>&, const Batch&, const LossWeights&);

template <typename T>
double loss_value(const Model<T>& model, const Batch& batch, const LossWeights& w) {
  Model<T> scratch = model;
  return forward_backward(scratch, batch, w).total;
}

template double loss_value<float>(const Model<float>&, const Batch&, const LossWeights&);
template double loss_value<double>(const Model<double>&, const Batch&, const LossWeights&);

// ---------------------------------------------------------------------------
// Trainer

namespace {

ModelConfig model_config_for(const RunConfig& c, const Environment& env) {
  ModelConfig m;
  m.observation_width = env.observation_width();
  m.cardinalities = env.action_space().cardinalities();
  m.latent_width = c.latent_width;
  m.hidden_width = c.hidden_width;
  m.hidden_layers = c.hidden_layers;
  return m;
}

FactoredAction random_action(const FactoredActionSpace& space, std::mt19937_64& rng) {
  FactoredAction a;
  for (int card : space.cardinalities()) {
    a.values.push_back(std::uniform_int_distribution<int>(0, card - 1)(rng));
  }
  return a;
}

}  // namespace

Trainer::Trainer(RunConfig config)
    : config_(std::move(config)),
      env_(make_environment(config_.env, config_.env_knobs)),
      params_(model_config_for(config_, *env_)),
      target_(params_),
      replay_(config_.train.replay_capacity, config_.train.min_replay),
      rng_(config_.seed) {
  config_.validate();
  params_.initialize(config_.seed);
  target_ = params_;
  optimizer_ = std::make_unique<nn::AdamW<float>>(params_.params(), config_.train.optimizer);
}

Episode Trainer::collect_episode(bool random_policy) {
  const auto& space = env_->action_space();
  const auto joint = static_cast<std::size_t>(space.size());
  const SearchConfig search = config_.acting_search();
  env_->reset(config_.seed * 1000003ULL + episodes_collected_++);
  Episode ep;
  ep.observations.push_back(env_->observe());
  while (!env_->done()) {
    ep.true_masks.push_back(env_->ground_truth_mask());
    FactoredAction action;
    if (random_policy) {
      action = random_action(space, rng_);
      ep.policies.emplace_back(joint, 1.0 / static_cast<double>(joint));
      ep.root_values.push_back(0.0);
    } else {
      const auto result =
          run_search(ep.observations.back(), params_, search, rng_, {SearchMode::kActing});
      ep.policies.push_back(unfolded_policy(result));
      ep.root_values.push_back(result.search_value);
      action = act(result, SearchMode::kActing, config_.train.temperature, rng_);
    }
    const auto step = env_->step(action);
    ep.actions.push_back(std::move(action));
    ep.rewards.push_back(step.reward);
    ep.observations.push_back(env_->observe());
  }
  return ep;
}

void Trainer::warmup() {
  while (!replay_.ready()) replay_.add(collect_episode(true));
}

void Trainer::sync_target() {
  target_ = params_;
  ++target_version_;
}

double Trainer::bootstrap_value(Episode& episode, std::size_t index) {
  if (episode.target_version != target_version_) {
    const auto len = episode.length();
    const auto width = static_cast<Eigen::Index>(target_.config().observation_width);
    nn::Matrix<float> obs(static_cast<Eigen::Index>(len), width);
    for (std::size_t i = 0; i < len; ++i) {
      obs.row(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::RowVectorXf>(episode.observations[i].data(), width);
    }
    const auto values = target_.value.forward(target_.encoder.forward(obs));
    episode.target_values.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      episode.target_values[i] =
          inverse_value_transform(static_cast<double>(values(static_cast<Eigen::Index>(i), 0)));
    }
    episode.target_version = target_version_;
  }
  return episode.target_values.at(index);
}

Batch Trainer::sample_batch() {
  const auto& t = config_.train;
  const auto& space = env_->action_space();
  const int K = t.unroll_steps;
  const auto B = static_cast<Eigen::Index>(t.batch_size);
  const auto O = static_cast<Eigen::Index>(env_->observation_width());
  const auto E = static_cast<Eigen::Index>(space.encoding_width());
  const auto A = static_cast<Eigen::Index>(space.size());
  const auto n = static_cast<Eigen::Index>(space.num_variables());
  const auto all = AbstractionMask::all_ones(space.num_variables());

  Batch batch;
  batch.size = static_cast<std::size_t>(B);
  batch.unroll_steps = K;
  batch.observation.resize(B, O);
  batch.actions.assign(static_cast<std::size_t>(K), nn::Matrix<float>::Zero(B, E));
  batch.target_obs.assign(static_cast<std::size_t>(K), nn::Matrix<float>(B, O));
  batch.policy.assign(static_cast<std::size_t>(K) + 1, nn::Matrix<float>::Zero(B, A));
  batch.has_policy.assign(static_cast<std::size_t>(K) + 1, std::vector<float>(batch.size, 0.0f));
  batch.value.assign(static_cast<std::size_t>(K) + 1, std::vector<float>(batch.size, 0.0f));
  batch.reward.assign(static_cast<std::size_t>(K), std::vector<float>(batch.size, 0.0f));
  batch.gumbel_u.assign(static_cast<std::size_t>(K), nn::Matrix<double>(B, n));

  auto row_of = [](const std::vector<float>& v) {
    return Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(v.size()));
  };
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto [e, start] = replay_.sample(rng_);
    Episode& ep = replay_.episode(e);
    const auto bi = static_cast<std::size_t>(b);
    const auto targets = compute_targets(
        ep, start, K, t.td_steps, config_.search.discount,
        [this, &ep](std::size_t i) { return bootstrap_value(ep, i); });
    const std::size_t len = ep.length();
    batch.observation.row(b) = row_of(ep.observations[start]);
    for (int k = 0; k <= K; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const auto& target = targets[ks];
      batch.value[ks][bi] = static_cast<float>(value_transform(target.value));
      if (!target.policy.empty()) {
        batch.has_policy[ks][bi] = 1.0f;
        for (Eigen::Index j = 0; j < A; ++j) {
          batch.policy[ks](b, j) = static_cast<float>(target.policy[static_cast<std::size_t>(j)]);
        }
      }
      if (k == 0) continue;
      batch.reward[ks - 1][bi] = static_cast<float>(value_transform(target.reward));
      const std::size_t idx = start + ks - 1;
      const FactoredAction a = idx < len ? ep.actions[idx] : random_action(space, rng_);
      const auto enc = encode_action_masked(space, a, all);
      batch.actions[ks - 1].row(b) = row_of(enc);
      batch.target_obs[ks - 1].row(b) = row_of(ep.observations[std::min(start + ks, len)]);
    }
  }
  for (auto& u : batch.gumbel_u) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = open_uniform(rng_);
  }
  return batch;
}

LossReport Trainer::train_step() {
  const Batch batch = sample_batch();
  params_.zero_grad();
  LossWeights weights = LossWeights::from(config_.train, config_.mode);
  // Until the dynamics has learned what actions do, masking only hides
  // inputs that still look like noise; train unmasked and leave h alone.
  if (steps_ < config_.train.structure_warmup) weights.mask_path = MaskPath::kAllOnes;
  LossReport report = forward_backward(params_, batch, weights);
  report.grad_norm = static_cast<double>(optimizer_->step());
  ++steps_;
  if (steps_ % config_.train.target_interval == 0) sync_target();
  return report;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

std::string number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::kIo, "malformed number '" + s + "' in metrics");
  }
  return x;
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream out;
  out << r.step << ',' << r.seed << ',' << r.env << ',' << number(r.return_mean) << ','
      << number(r.return_ci) << ',' << number(r.shd_mean) << ',' << number(r.reduction_pct) << ','
      << number(r.loss.total) << ',' << number(r.loss.policy) << ',' << number(r.loss.value)
      << ',' << number(r.loss.reward) << ',' << number(r.loss.recon) << ','
      << number(r.loss.sparsity);
  return out.str();
}

MetricsRow parse_metrics_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) f.push_back(cell);
  if (f.size() != 13) fail(ErrorCode::kIo, "metrics row needs 13 fields: " + line);
  MetricsRow r;
  try {
    r.step = std::stoll(f[0]);
    r.seed = std::stoull(f[1]);
  } catch (const std::exception&) {
    fail(ErrorCode::kIo, "malformed step/seed in metrics row: " + line);
  }
  r.env = f[2];
  r.return_mean = parse_number(f[3]);
  r.return_ci = parse_number(f[4]);
  r.shd_mean = parse_number(f[5]);
  r.reduction_pct = parse_number(f[6]);
  r.loss.total = parse_number(f[7]);
  r.loss.policy = parse_number(f[8]);
  r.loss.value = parse_number(f[9]);
  r.loss.reward = parse_number(f[10]);
  r.loss.recon = parse_number(f[11]);
  r.loss.sparsity = parse_number(f[12]);
  return r;
}

// ---------------------------------------------------------------------------
// Run loop

TrainingOutcome run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const MetricsRow&)>& on_row) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + out_dir.string());
  {
    std::ofstream cfg(out_dir / "config.json");
    if (!cfg) fail(ErrorCode::kIo, "cannot write " + (out_dir / "config.json").string());
    cfg << run_config_to_json(config).dump(2) << '\n';
  }
  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) fail(ErrorCode::kIo, "cannot write " + (out_dir / "metrics.csv").string());
  csv << kMetricsHeader << '\n';

  Trainer trainer(config);
  trainer.warmup();
  const auto seeds = evaluation_seeds(config.eval_seed, config.eval_episodes);
  const auto eval_search = config.acting_search();

  TrainingOutcome outcome;
  LossReport window;
  std::int64_t window_steps = 0;
  while (trainer.steps() < config.total_steps) {
    trainer.replay().add(trainer.collect_episode(false));
    for (int u = 0; u < config.train.updates_per_episode && trainer.steps() < config.total_steps;
         ++u) {
      window += trainer.train_step();
      ++window_steps;
      if (trainer.steps() % config.eval_interval != 0) continue;
      const auto report =
          evaluate(trainer.params(), config.env, config.env_knobs, eval_search, seeds);
      MetricsRow row;
      row.step = trainer.steps();
      row.seed = config.seed;
      row.env = config.env;
      row.return_mean = report.return_ci.mean;
      row.return_ci = report.return_ci.half_width();
      row.shd_mean = report.shd_mean;
      row.reduction_pct = 100.0 * report.reduction;
      row.loss = window.scaled(1.0 / static_cast<double>(window_steps));
      csv << format_metrics_row(row) << '\n' << std::flush;
      outcome.metrics.push_back(row);
      if (on_row) on_row(row);
      window = LossReport{};
      window_steps = 0;
    }
  }

  nlohmann::json meta;
  meta["run_config"] = run_config_to_json(config);
  meta["steps"] = trainer.steps();
  outcome.checkpoint = out_dir / "final.ckpt";
  write_checkpoint(outcome.checkpoint, to_checkpoint(trainer.params(), meta));
  return outcome;
}

}  // namespace fmcts
