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

// Evaluation metrics: structural Hamming distance, bootstrap intervals,
// evaluation episodes, search-space reduction and normalized scores.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmcts/action_space.hpp"
#include "fmcts/mcts.hpp"
#include "fmcts/models.hpp"
#include "json.hpp"

namespace fmcts {

// Number of positions where the two masks differ.
int shd(const AbstractionMask& predicted, const AbstractionMask& truth);

struct BootstrapInterval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double half_width() const { return 0.5 * (upper - lower); }
};

inline constexpr int kBootstrapResamples = 10000;

// 95% percentile bootstrap of the mean; deterministic for a given seed.
BootstrapInterval bootstrap_mean(std::span<const double> values,
                                 int resamples = kBootstrapResamples, double level = 0.95,
                                 std::uint64_t seed = 0);

struct EvalReport {
  std::string env;
  std::vector<std::uint64_t> seeds;
  std::vector<double> returns;
  BootstrapInterval return_ci;
  // Mean SHD between thresholded h(z) and the true mask over visited states;
  // NaN when the environment has no ground truth.
  double shd_mean = 0.0;
  std::size_t states = 0;
  double reduction = 0.0;  // mean root search-space reduction in [0, 1]
  double normalized_score = 0.0;
};

// Evaluation-mode episodes (no root noise, argmax acting), one per seed.
EvalReport evaluate(const ModelParams& params, const std::string& env_id,
                    const nlohmann::json& env_knobs, const SearchConfig& search,
                    std::span<const std::uint64_t> seeds);

// Default evaluation seeds: base, base + 1, ..., base + episodes - 1.
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, int episodes);

// 1 - |phi_z(A)| / |A| for one mask.
double reduction_fraction(const FactoredActionSpace& space, const AbstractionMask& mask);

// Mean reduction of the root masks thresholded at tau over `observations`.
double search_space_reduction(const ModelParams& params,
                              std::span<const std::vector<float>> observations, double tau);

// Bounds used by normalized_score.
struct ScoreBounds {
  double min = 0.0;
  double max = 1.0;
};
ScoreBounds score_bounds(const std::string& env_id,
                         const nlohmann::json& env_knobs = nlohmann::json::object());
// (R - min) / (max - min), clipped to [0, 1].
double normalized_score(double episode_return, const std::string& env_id,
                        const nlohmann::json& env_knobs = nlohmann::json::object());

// Mean episodic return of the uniform-random policy over `seeds`.
double random_policy_return(const std::string& env_id, const nlohmann::json& env_knobs,
                            std::span<const std::uint64_t> seeds);

}  // namespace fmcts
