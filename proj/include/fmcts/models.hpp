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

// The learned functions of the planner: encoder f, dynamics g, structure
// network h, decoder Dec and the policy/value/reward heads. Each one is an
// independent MLP; h shares no parameters with the others, so routing
// gradients to it is a matter of parameter partitioning.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fmcts/action_space.hpp"
#include "fmcts/checkpoint.hpp"
#include "fmcts/nn.hpp"
#include "json.hpp"

namespace fmcts {

struct ModelConfig {
  std::size_t observation_width = 0;
  std::vector<int> cardinalities;
  std::size_t latent_width = 64;
  std::size_t hidden_width = 128;
  std::size_t hidden_layers = 2;

  FactoredActionSpace action_space() const { return FactoredActionSpace(cardinalities); }
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Invertible squashing applied to value and reward targets:
// h(x) = sign(x) (sqrt(|x| + 1) - 1) + eps x.
double value_transform(double x);
double inverse_value_transform(double y);

template <typename T>
class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& config);

  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const FactoredActionSpace& action_space() const { return space_; }

  nn::Mlp<T> encoder;
  nn::Mlp<T> dynamics;
  nn::Mlp<T> structure;
  nn::Mlp<T> decoder;
  nn::Mlp<T> policy;
  nn::Mlp<T> value;
  nn::Mlp<T> reward;

  std::vector<nn::ParamTensor<T>*> params();
  std::vector<const nn::ParamTensor<T>*> params() const;
  std::vector<nn::ParamTensor<T>*> structure_params() { return structure.params(); }
  void zero_grad();

  template <typename U>
  Model<U> cast() const {
    Model<U> out;
    out.set_config(config_);
    out.encoder = encoder.template cast<U>();
    out.dynamics = dynamics.template cast<U>();
    out.structure = structure.template cast<U>();
    out.decoder = decoder.template cast<U>();
    out.policy = policy.template cast<U>();
    out.value = value.template cast<U>();
    out.reward = reward.template cast<U>();
    return out;
  }

  void set_config(const ModelConfig& config);

 private:
  ModelConfig config_;
  FactoredActionSpace space_{std::vector<int>{1}};
};

extern template class Model<float>;
extern template class Model<double>;

using ModelParams = Model<float>;

struct HeadOutputs {
  std::vector<float> policy_logits;  // one per joint action
  double value = 0.0;                // environment units
  double reward = 0.0;               // environment units
};

std::vector<float> encode(const ModelParams& params, std::span<const float> observation);
std::vector<double> infer_structure(const ModelParams& params, std::span<const float> latent);
std::vector<float> dynamics(const ModelParams& params, std::span<const float> latent,
                            std::span<const float> masked_action_encoding);
std::vector<float> decode(const ModelParams& params, std::span<const float> latent);
HeadOutputs predict_heads(const ModelParams& params, std::span<const float> latent);

// Training path: independent Gumbel draws per variable, bits from the
// straight-through estimator.
AbstractionMask sample_mask(std::span<const double> probs, std::mt19937_64& rng,
                            double beta);
// Search path: bit i is set iff probs[i] > tau.
AbstractionMask deterministic_mask(std::span<const double> probs, double tau);

// Uniform sample in the open interval (0, 1).
double open_uniform(std::mt19937_64& rng);

Checkpoint to_checkpoint(const ModelParams& params, nlohmann::json metadata);
ModelParams model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace fmcts
