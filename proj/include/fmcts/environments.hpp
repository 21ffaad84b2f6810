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

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fmcts/action_space.hpp"
#include "json.hpp"

namespace fmcts {

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

// Deterministic environment with a factored action space. Layout randomness
// comes only from the seed passed to reset().
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual const FactoredActionSpace& action_space() const = 0;
  virtual std::size_t observation_width() const = 0;
  virtual int horizon() const = 0;

  virtual void reset(std::uint64_t seed) = 0;
  virtual std::vector<float> observe() const = 0;
  virtual StepResult step(const FactoredAction& action) = 0;
  virtual bool done() const = 0;

  // True relevance mask of the current state, when the environment knows it.
  virtual std::optional<AbstractionMask> ground_truth_mask() const { return std::nullopt; }
  virtual std::unique_ptr<Environment> clone() const = 0;
};

// Known ids: "cmab", "gridkey-k2", "gridkey-k3", "gridkey-k4". `knobs` holds
// environment-specific overrides (horizon, observation_width, grid_size).
std::unique_ptr<Environment> make_environment(const std::string& id,
                                              const nlohmann::json& knobs = nlohmann::json::object());
bool is_known_environment(const std::string& id);

// ---------------------------------------------------------------------------
// Contextual combinatorial bandit: three variables with seven values each.
// The relevant variable is i = floor(s / 6) mod 3; even states advance by
// a^i, odd states by 6 - a^i; the reward is the current state.

inline constexpr int kCmabVariables = 3;
inline constexpr int kCmabCardinality = 7;
inline constexpr int kCmabDefaultHorizon = 25;
inline constexpr std::size_t kCmabDefaultObservationWidth = 64;

struct CmabState {
  std::int64_t s = 0;
  int t = 0;
  int horizon = kCmabDefaultHorizon;
};

struct CmabTransition {
  CmabState next;
  double reward = 0.0;
};

int cmab_relevant_variable(std::int64_t s);
CmabTransition cmab_step(const CmabState& state, const FactoredAction& a);
AbstractionMask cmab_ground_truth_mask(const CmabState& state);
// Exact optimum of the undiscounted return, by dynamic programming over the
// reachable (t, s) pairs. Rewards r_t are collected for t = 0..H-1.
double cmab_optimal_return(int horizon = kCmabDefaultHorizon);
std::vector<float> cmab_observation(const CmabState& state,
                                    std::size_t width = kCmabDefaultObservationWidth);

// Observation encodings. kNormalized repeats s / (6H) across the width; the
// diagnostic kOneHot marks position min(s, 6H) in a vector of width 6H + 1,
// which makes parity and the relevant variable trivially decodable.
enum class CmabEncoding { kNormalized, kOneHot };
std::vector<float> cmab_onehot_observation(const CmabState& state);

class CmabEnvironment : public Environment {
 public:
  explicit CmabEnvironment(int horizon = kCmabDefaultHorizon,
                           std::size_t observation_width = kCmabDefaultObservationWidth,
                           CmabEncoding encoding = CmabEncoding::kNormalized);

  std::string id() const override { return "cmab"; }
  const FactoredActionSpace& action_space() const override { return space_; }
  std::size_t observation_width() const override { return width_; }
  int horizon() const override { return state_.horizon; }
  void reset(std::uint64_t seed) override;
  std::vector<float> observe() const override;
  StepResult step(const FactoredAction& action) override;
  bool done() const override { return state_.t >= state_.horizon; }
  std::optional<AbstractionMask> ground_truth_mask() const override;
  std::unique_ptr<Environment> clone() const override;

  const CmabState& state() const { return state_; }

 private:
  FactoredActionSpace space_;
  std::size_t width_;
  CmabEncoding encoding_;
  CmabState state_;
};

// ---------------------------------------------------------------------------
// Symbolic key-door gridworld. The action factors into
// turn {no-op, left, right} x forward {no-op, move} x pick {no-op, color...}
// x open {no-op, color...}, applied in that order within one step.

enum class Direction : int { kRight = 0, kDown = 1, kLeft = 2, kUp = 3 };

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

struct GridKeyConfig {
  int grid_size = 6;  // including the outer wall
  int colors = 4;
  int horizon = 120;
};

struct GridKeyState {
  GridKeyConfig config;
  Cell agent;
  Direction direction = Direction::kRight;
  Cell key;
  bool key_held = false;
  Cell door;
  bool door_open = false;
  Cell goal;
  int wall_column = 0;
  int key_color = 0;
  int door_color = 0;
  int steps = 0;
  bool reached_goal = false;

  bool is_wall(Cell c) const;
};

inline constexpr double kGridKeyStepReward = -0.1;

FactoredActionSpace gridkey_action_space(int colors);
GridKeyState gridkey_reset(std::uint64_t seed, const GridKeyConfig& config);
struct GridKeyTransition {
  GridKeyState next;
  double reward = 0.0;
  bool done = false;
};
GridKeyTransition gridkey_step(const GridKeyState& state, const FactoredAction& a);
// Minimal number of steps to the goal, by breadth-first search over
// (position, direction, key held, door open); nullopt if unreachable.
std::optional<int> gridkey_shortest_solution(const GridKeyState& state);
std::vector<float> gridkey_observation(const GridKeyState& state);
std::size_t gridkey_observation_width(const GridKeyConfig& config);

class GridKeyEnvironment : public Environment {
 public:
  explicit GridKeyEnvironment(GridKeyConfig config);

  std::string id() const override;
  const FactoredActionSpace& action_space() const override { return space_; }
  std::size_t observation_width() const override { return gridkey_observation_width(config_); }
  int horizon() const override { return config_.horizon; }
  void reset(std::uint64_t seed) override;
  std::vector<float> observe() const override;
  StepResult step(const FactoredAction& action) override;
  bool done() const override;
  std::unique_ptr<Environment> clone() const override;

  const GridKeyState& state() const { return state_; }

 private:
  GridKeyConfig config_;
  FactoredActionSpace space_;
  GridKeyState state_;
};

}  // namespace fmcts
