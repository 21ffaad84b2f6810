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

#include "fmcts/models.hpp"

#include <cmath>

namespace fmcts {
namespace {

constexpr double kValueTransformEps = 1e-3;
constexpr std::uint64_t kMaxPolicyWidth = 1u << 16;

std::vector<std::size_t> widths(std::size_t in, const ModelConfig& c, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t l = 0; l < c.hidden_layers; ++l) w.push_back(c.hidden_width);
  w.push_back(out);
  return w;
}

nn::Matrix<float> row(std::span<const float> v) {
  nn::Matrix<float> m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

std::vector<float> to_vector(const nn::Matrix<float>& m) {
  return std::vector<float>(m.data(), m.data() + m.size());
}

void check_width(std::span<const float> v, std::size_t expected, const char* what) {
  if (v.size() != expected) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + " width " + std::to_string(v.size()) +
                                          " != " + std::to_string(expected));
  }
}

}  // namespace

void ModelConfig::validate() const {
  require(observation_width > 0, "observation width must be positive");
  require(latent_width > 0 && hidden_width > 0, "network widths must be positive");
  const FactoredActionSpace space(cardinalities);
  require(space.size() <= kMaxPolicyWidth, "joint action space too large for the policy head");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"observation_width", c.observation_width},
       {"cardinalities", c.cardinalities},
       {"latent_width", c.latent_width},
       {"hidden_width", c.hidden_width},
       {"hidden_layers", c.hidden_layers}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.observation_width = j.at("observation_width").get<std::size_t>();
  c.cardinalities = j.at("cardinalities").get<std::vector<int>>();
  c.latent_width = j.value("latent_width", c.latent_width);
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
}

double value_transform(double x) {
  const double s = x < 0 ? -1.0 : 1.0;
  return s * (std::sqrt(std::abs(x) + 1.0) - 1.0) + kValueTransformEps * x;
}

double inverse_value_transform(double y) {
  const double s = y < 0 ? -1.0 : 1.0;
  const double e = kValueTransformEps;
  const double root =
      (std::sqrt(1.0 + 4.0 * e * (std::abs(y) + 1.0 + e)) - 1.0) / (2.0 * e);
  return s * (root * root - 1.0);
}

template <typename T>
Model<T>::Model(const ModelConfig& config) {
  set_config(config);
}

template <typename T>
void Model<T>::set_config(const ModelConfig& config) {
  config.validate();
  config_ = config;
  space_ = config.action_space();
  const auto& c = config_;
  const auto n = space_.num_variables();
  const auto joint = static_cast<std::size_t>(space_.size());
  encoder = nn::Mlp<T>("encoder", widths(c.observation_width, c, c.latent_width),
                       nn::Activation::kTanh);
  dynamics = nn::Mlp<T>("dynamics",
                        widths(c.latent_width + space_.encoding_width(), c, c.latent_width),
                        nn::Activation::kTanh);
  structure = nn::Mlp<T>("structure", widths(c.latent_width, c, n), nn::Activation::kSigmoid);
  decoder = nn::Mlp<T>("decoder", widths(c.latent_width, c, c.observation_width),
                       nn::Activation::kNone);
  policy = nn::Mlp<T>("policy", widths(c.latent_width, c, joint), nn::Activation::kNone);
  value = nn::Mlp<T>("value", widths(c.latent_width, c, 1), nn::Activation::kNone);
  reward = nn::Mlp<T>("reward", widths(c.latent_width, c, 1), nn::Activation::kNone);
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  encoder.initialize(rng);
  dynamics.initialize(rng);
  structure.initialize(rng);
  decoder.initialize(rng);
  // Small policy logits start the prior near uniform; zero value/reward
  // outputs start predictions at 0.
  policy.initialize(rng, 0.1);
  value.initialize(rng, 0.0);
  reward.initialize(rng, 0.0);
}

template <typename T>
std::vector<nn::ParamTensor<T>*> Model<T>::params() {
  std::vector<nn::ParamTensor<T>*> out;
  for (auto* net : {&encoder, &dynamics, &structure, &decoder, &policy, &value, &reward}) {
    auto p = net->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
std::vector<const nn::ParamTensor<T>*> Model<T>::params() const {
  std::vector<const nn::ParamTensor<T>*> out;
  for (const auto* net : {&encoder, &dynamics, &structure, &decoder, &policy, &value, &reward}) {
    auto p = net->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template class Model<float>;
template class Model<double>;

std::vector<float> encode(const ModelParams& params, std::span<const float> observation) {
  check_width(observation, params.config().observation_width, "observation");
  return to_vector(params.encoder.forward(row(observation)));
}

std::vector<double> infer_structure(const ModelParams& params, std::span<const float> latent) {
  check_width(latent, params.config().latent_width, "latent");
  const auto p = params.structure.forward(row(latent));
  std::vector<double> out(static_cast<std::size_t>(p.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(p.data()[i]);
  return out;
}

std::vector<float> dynamics(const ModelParams& params, std::span<const float> latent,
                            std::span<const float> masked_action_encoding) {
  check_width(latent, params.config().latent_width, "latent");
  check_width(masked_action_encoding, params.action_space().encoding_width(), "action encoding");
  nn::Matrix<float> x(1, static_cast<Eigen::Index>(latent.size() + masked_action_encoding.size()));
  x << row(latent), row(masked_action_encoding);
  return to_vector(params.dynamics.forward(x));
}

std::vector<float> decode(const ModelParams& params, std::span<const float> latent) {
  check_width(latent, params.config().latent_width, "latent");
  return to_vector(params.decoder.forward(row(latent)));
}

HeadOutputs predict_heads(const ModelParams& params, std::span<const float> latent) {
  check_width(latent, params.config().latent_width, "latent");
  const auto z = row(latent);
  HeadOutputs out;
  out.policy_logits = to_vector(params.policy.forward(z));
  out.value = inverse_value_transform(static_cast<double>(params.value.forward(z)(0, 0)));
  out.reward = inverse_value_transform(static_cast<double>(params.reward.forward(z)(0, 0)));
  if (!std::isfinite(out.value) || !std::isfinite(out.reward)) {
    fail(ErrorCode::kNumericFault, "non-finite value or reward prediction");
  }
  for (float l : out.policy_logits) {
    if (!std::isfinite(l)) fail(ErrorCode::kNumericFault, "non-finite policy logit");
  }
  return out;
}

double open_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double u = 0.0;
  do {
    u = dist(rng);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

AbstractionMask sample_mask(std::span<const double> probs, std::mt19937_64& rng, double beta) {
  AbstractionMask mask;
  mask.bits.resize(probs.size());
  mask.probs = std::vector<double>(probs.begin(), probs.end());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    mask.bits[i] = nn::gumbel_sigmoid_st(probs[i], open_uniform(rng), beta).hard == 1;
  }
  return mask;
}

AbstractionMask deterministic_mask(std::span<const double> probs, double tau) {
  require(tau >= 0.0 && tau < 1.0, "mask threshold must lie in [0,1)");
  AbstractionMask mask;
  mask.bits.resize(probs.size());
  mask.probs = std::vector<double>(probs.begin(), probs.end());
  for (std::size_t i = 0; i < probs.size(); ++i) mask.bits[i] = probs[i] > tau;
  return mask;
}

Checkpoint to_checkpoint(const ModelParams& params, nlohmann::json metadata) {
  Checkpoint ckpt;
  ckpt.metadata = std::move(metadata);
  ckpt.metadata["model"] = params.config();
  for (const auto* p : params.params()) {
    ckpt.tensors.push_back({p->name, p->shape,
                            std::vector<float>(p->data.data(), p->data.data() + p->data.size())});
  }
  return ckpt;
}

ModelParams model_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("model")) fail(ErrorCode::kIo, "checkpoint lacks a model config");
  ModelParams model(ckpt.metadata.at("model").get<ModelConfig>());
  for (auto* p : model.params()) {
    const auto& t = ckpt.tensor(p->name);
    if (t.shape != p->shape) fail(ErrorCode::kIo, "checkpoint tensor " + p->name + " has wrong shape");
    std::copy(t.data.begin(), t.data.end(), p->data.data());
  }
  return model;
}

}  // namespace fmcts
