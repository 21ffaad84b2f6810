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

#include "fmcts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

#include "fmcts/environments.hpp"
#include "fmcts/errors.hpp"

namespace fmcts {

int shd(const AbstractionMask& predicted, const AbstractionMask& truth) {
  require(predicted.size() == truth.size(), "shd: mask lengths differ");
  int d = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) d += predicted.bits[i] != truth.bits[i] ? 1 : 0;
  return d;
}

BootstrapInterval bootstrap_mean(std::span<const double> values, int resamples, double level,
                                 std::uint64_t seed) {
  require(!values.empty(), "bootstrap of an empty sample");
  require(resamples >= 1, "bootstrap needs at least one resample");
  require(level > 0.0 && level < 1.0, "confidence level must lie in (0,1)");
  BootstrapInterval out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  // Percentiles by linear interpolation between order statistics.
  auto quantile = [&means](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  const double alpha = 1.0 - level;
  out.lower = std::min(quantile(alpha / 2.0), out.mean);
  out.upper = std::max(quantile(1.0 - alpha / 2.0), out.mean);
  return out;
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t base, int episodes) {
  require(episodes >= 1, "need at least one evaluation episode");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(episodes));
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = base + i;
  return seeds;
}

double reduction_fraction(const FactoredActionSpace& space, const AbstractionMask& mask) {
  return 1.0 - static_cast<double>(abstract_size(space, mask)) / static_cast<double>(space.size());
}

EvalReport evaluate(const ModelParams& params, const std::string& env_id,
                    const nlohmann::json& env_knobs, const SearchConfig& search,
                    std::span<const std::uint64_t> seeds) {
  require(!seeds.empty(), "evaluation needs at least one seed");
  auto env = make_environment(env_id, env_knobs);
  require(env->action_space() == params.action_space(),
          "checkpoint action space does not match environment " + env_id);
  require(env->observation_width() == params.config().observation_width,
          "checkpoint observation width does not match environment " + env_id);
  EvalReport report;
  report.env = env_id;
  report.seeds.assign(seeds.begin(), seeds.end());
  double shd_sum = 0.0;
  std::size_t shd_states = 0;
  double reduction_sum = 0.0;
  for (const auto seed : seeds) {
    env->reset(seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    double ret = 0.0;
    while (!env->done()) {
      const auto obs = env->observe();
      const auto result = run_search(obs, params, search, rng, {SearchMode::kEvaluation});
      reduction_sum += reduction_fraction(params.action_space(), result.root_mask);
      ++report.states;
      if (const auto truth = env->ground_truth_mask()) {
        const auto predicted = deterministic_mask(result.root_structure_probs, search.mask_threshold);
        shd_sum += shd(predicted, *truth);
        ++shd_states;
      }
      ret += env->step(act(result, SearchMode::kEvaluation, 1.0, rng)).reward;
    }
    report.returns.push_back(ret);
  }
  report.return_ci = bootstrap_mean(report.returns);
  report.shd_mean = shd_states > 0 ? shd_sum / static_cast<double>(shd_states)
                                   : std::numeric_limits<double>::quiet_NaN();
  report.reduction = report.states > 0 ? reduction_sum / static_cast<double>(report.states) : 0.0;
  report.normalized_score = normalized_score(report.return_ci.mean, env_id, env_knobs);
  return report;
}

double search_space_reduction(const ModelParams& params,
                              std::span<const std::vector<float>> observations, double tau) {
  if (observations.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& obs : observations) {
    const auto probs = infer_structure(params, encode(params, obs));
    sum += reduction_fraction(params.action_space(), deterministic_mask(probs, tau));
  }
  return sum / static_cast<double>(observations.size());
}

namespace {

constexpr int kLayoutSamples = 1000;

// Mean BFS-optimal step count over the first kLayoutSamples layouts.
double mean_optimal_steps(const GridKeyConfig& config) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, double> cache;
  const auto key = std::make_tuple(config.grid_size, config.colors, config.horizon);
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  double sum = 0.0;
  for (int seed = 0; seed < kLayoutSamples; ++seed) {
    const auto steps = gridkey_shortest_solution(gridkey_reset(static_cast<std::uint64_t>(seed), config));
    if (!steps) fail(ErrorCode::kInvalidArgument, "generated an unsolvable layout");
    sum += std::min(*steps, config.horizon);
  }
  const double mean = sum / kLayoutSamples;
  cache.emplace(key, mean);
  return mean;
}

}  // namespace

ScoreBounds score_bounds(const std::string& env_id, const nlohmann::json& env_knobs) {
  auto env = make_environment(env_id, env_knobs);
  if (env_id == "cmab") return {0.0, cmab_optimal_return(env->horizon())};
  const auto* grid = dynamic_cast<const GridKeyEnvironment*>(env.get());
  GridKeyConfig config = grid->state().config;
  return {kGridKeyStepReward * config.horizon, kGridKeyStepReward * mean_optimal_steps(config)};
}

double normalized_score(double episode_return, const std::string& env_id,
                        const nlohmann::json& env_knobs) {
  const auto b = score_bounds(env_id, env_knobs);
  return std::clamp((episode_return - b.min) / (b.max - b.min), 0.0, 1.0);
}

double random_policy_return(const std::string& env_id, const nlohmann::json& env_knobs,
                            std::span<const std::uint64_t> seeds) {
  require(!seeds.empty(), "need at least one seed");
  auto env = make_environment(env_id, env_knobs);
  const auto& space = env->action_space();
  double total = 0.0;
  for (const auto seed : seeds) {
    env->reset(seed);
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    while (!env->done()) {
      FactoredAction a;
      for (int card : space.cardinalities()) {
        a.values.push_back(std::uniform_int_distribution<int>(0, card - 1)(rng));
      }
      total += env->step(a).reward;
    }
  }
  return total / static_cast<double>(seeds.size());
}

}  // namespace fmcts
