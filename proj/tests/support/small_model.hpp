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

#include <cstdint>
#include <optional>
#include <vector>

#include "fmcts/models.hpp"

namespace testing_support {

// A small randomly initialised model. When `structure_bias` is set, the last
// layer of the structure network is replaced by a constant bias so every
// structure probability equals sigmoid(bias).
inline fmcts::ModelParams small_model(std::vector<int> cardinalities, std::size_t obs_width,
                                      std::uint64_t seed,
                                      std::optional<float> structure_bias = std::nullopt,
                                      std::size_t latent = 8, std::size_t hidden = 16) {
  fmcts::ModelConfig cfg;
  cfg.observation_width = obs_width;
  cfg.cardinalities = std::move(cardinalities);
  cfg.latent_width = latent;
  cfg.hidden_width = hidden;
  cfg.hidden_layers = 1;
  fmcts::ModelParams m(cfg);
  m.initialize(seed);
  if (structure_bias) {
    auto ps = m.structure.params();
    ps[ps.size() - 2]->data.setZero();
    ps.back()->data.setConstant(*structure_bias);
  }
  return m;
}

inline std::vector<float> random_observation(std::size_t width, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> obs(width);
  for (auto& x : obs) x = u(rng);
  return obs;
}

}  // namespace testing_support
