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

#include "fmcts/environments.hpp"

#include <algorithm>
#include <limits>
#include <tuple>
#include <deque>
#include <set>

#include "fmcts/errors.hpp"

namespace fmcts {

// ---------------------------------------------------------------------------
// CMAB

int cmab_relevant_variable(std::int64_t s) {
  return static_cast<int>((s / 6) % kCmabVariables);
}

CmabTransition cmab_step(const CmabState& state, const FactoredAction& a) {
  if (state.t >= state.horizon) {
    fail(ErrorCode::kEpisodeTerminated, "cmab: episode already terminated");
  }
  static const FactoredActionSpace space(std::vector<int>(kCmabVariables, kCmabCardinality));
  validate(space, a);
  const int i = cmab_relevant_variable(state.s);
  const int value = a.values[static_cast<std::size_t>(i)];
  CmabTransition out;
  out.reward = static_cast<double>(state.s);
  out.next = state;
  out.next.s = state.s % 2 == 0 ? state.s + value : state.s + (6 - value);
  out.next.t = state.t + 1;
  return out;
}

AbstractionMask cmab_ground_truth_mask(const CmabState& state) {
  AbstractionMask mask = AbstractionMask::all_zeros(kCmabVariables);
  mask.bits[static_cast<std::size_t>(cmab_relevant_variable(state.s))] = true;
  return mask;
}

double cmab_optimal_return(int horizon) {
  require(horizon >= 0, "horizon must be non-negative");
  const std::int64_t max_s = 6 * static_cast<std::int64_t>(horizon);
  // value[s] holds V_{t+1}(s) while computing V_t.
  std::vector<double> value(static_cast<std::size_t>(max_s + 7), 0.0);
  for (int t = horizon - 1; t >= 0; --t) {
    std::vector<double> next(value.size(), 0.0);
    const std::int64_t reachable = 6 * static_cast<std::int64_t>(t);
    for (std::int64_t s = 0; s <= reachable; ++s) {
      // Every increment in [0, 6] is achievable from both even and odd s.
      double best = value[static_cast<std::size_t>(s)];
      for (int d = 1; d <= 6; ++d) best = std::max(best, value[static_cast<std::size_t>(s + d)]);
      next[static_cast<std::size_t>(s)] = static_cast<double>(s) + best;
    }
    value = std::move(next);
  }
  return value[0];
}

std::vector<float> cmab_observation(const CmabState& state, std::size_t width) {
  const double scale = static_cast<double>((kCmabCardinality - 1) * state.horizon);
  const auto v = static_cast<float>(std::clamp(static_cast<double>(state.s) / scale, 0.0, 1.0));
  return std::vector<float>(width, v);
}

std::vector<float> cmab_onehot_observation(const CmabState& state) {
  const std::int64_t top = static_cast<std::int64_t>(kCmabCardinality - 1) * state.horizon;
  std::vector<float> obs(static_cast<std::size_t>(top) + 1, 0.0f);
  obs[static_cast<std::size_t>(std::clamp<std::int64_t>(state.s, 0, top))] = 1.0f;
  return obs;
}

CmabEnvironment::CmabEnvironment(int horizon, std::size_t observation_width,
                                 CmabEncoding encoding)
    : space_(std::vector<int>(kCmabVariables, kCmabCardinality)),
      width_(observation_width),
      encoding_(encoding) {
  require(horizon >= 1, "cmab horizon must be at least 1");
  require(observation_width >= 1, "cmab observation width must be positive");
  state_.horizon = horizon;
  if (encoding_ == CmabEncoding::kOneHot) {
    width_ = static_cast<std::size_t>((kCmabCardinality - 1) * horizon) + 1;
  }
}

void CmabEnvironment::reset(std::uint64_t) {
  state_.s = 0;
  state_.t = 0;
}

std::vector<float> CmabEnvironment::observe() const {
  return encoding_ == CmabEncoding::kOneHot ? cmab_onehot_observation(state_)
                                            : cmab_observation(state_, width_);
}

StepResult CmabEnvironment::step(const FactoredAction& action) {
  const auto tr = cmab_step(state_, action);
  state_ = tr.next;
  return {tr.reward, done()};
}

std::optional<AbstractionMask> CmabEnvironment::ground_truth_mask() const {
  return cmab_ground_truth_mask(state_);
}

std::unique_ptr<Environment> CmabEnvironment::clone() const {
  return std::make_unique<CmabEnvironment>(*this);
}

// ---------------------------------------------------------------------------
// GridKey

namespace {

constexpr int kTurnVar = 0;
constexpr int kForwardVar = 1;
constexpr int kPickVar = 2;
constexpr int kOpenVar = 3;

Cell ahead(Cell c, Direction d) {
  switch (d) {
    case Direction::kRight: return {c.x + 1, c.y};
    case Direction::kDown: return {c.x, c.y + 1};
    case Direction::kLeft: return {c.x - 1, c.y};
    case Direction::kUp: return {c.x, c.y - 1};
  }
  return c;
}

bool passable(const GridKeyState& s, Cell c) {
  if (s.is_wall(c)) return false;
  if (c == s.door && !s.door_open) return false;
  if (!s.key_held && c == s.key) return false;
  return true;
}

void validate_config(const GridKeyConfig& c) {
  require(c.grid_size >= 5, "gridkey grid_size must be at least 5");
  require(c.colors >= 1 && c.colors <= 8, "gridkey colors must be in [1, 8]");
  require(c.horizon >= 1, "gridkey horizon must be positive");
}

}  // namespace

bool GridKeyState::is_wall(Cell c) const {
  const int g = config.grid_size;
  if (c.x <= 0 || c.y <= 0 || c.x >= g - 1 || c.y >= g - 1) return true;
  return c.x == wall_column && !(c == door);
}

FactoredActionSpace gridkey_action_space(int colors) {
  return FactoredActionSpace({3, 2, colors + 1, colors + 1});
}

GridKeyState gridkey_reset(std::uint64_t seed, const GridKeyConfig& config) {
  validate_config(config);
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int g = config.grid_size;
  GridKeyState s;
  s.config = config;
  s.wall_column = uniform(2, g - 3);
  s.door = {s.wall_column, uniform(1, g - 2)};
  s.agent = {uniform(1, s.wall_column - 1), uniform(1, g - 2)};
  do {
    s.key = {uniform(1, s.wall_column - 1), uniform(1, g - 2)};
  } while (s.key == s.agent);
  s.goal = {uniform(s.wall_column + 1, g - 2), uniform(1, g - 2)};
  s.direction = static_cast<Direction>(uniform(0, 3));
  s.key_color = uniform(0, config.colors - 1);
  s.door_color = s.key_color;
  return s;
}

GridKeyTransition gridkey_step(const GridKeyState& state, const FactoredAction& a) {
  if (state.reached_goal || state.steps >= state.config.horizon) {
    fail(ErrorCode::kEpisodeTerminated, "gridkey: episode already terminated");
  }
  validate(gridkey_action_space(state.config.colors), a);
  GridKeyState s = state;
  switch (a.values[kTurnVar]) {
    case 1: s.direction = static_cast<Direction>((static_cast<int>(s.direction) + 3) % 4); break;
    case 2: s.direction = static_cast<Direction>((static_cast<int>(s.direction) + 1) % 4); break;
    default: break;
  }
  if (a.values[kForwardVar] == 1) {
    const Cell next = ahead(s.agent, s.direction);
    if (passable(s, next)) s.agent = next;
  }
  const Cell front = ahead(s.agent, s.direction);
  const int pick = a.values[kPickVar];
  if (pick > 0 && !s.key_held && front == s.key && pick - 1 == s.key_color) {
    s.key_held = true;
  }
  const int open = a.values[kOpenVar];
  if (open > 0 && s.key_held && !s.door_open && front == s.door && open - 1 == s.door_color) {
    s.door_open = true;
  }
  ++s.steps;
  s.reached_goal = s.agent == s.goal;
  GridKeyTransition out;
  out.done = s.reached_goal || s.steps >= s.config.horizon;
  out.next = s;
  out.reward = kGridKeyStepReward;
  return out;
}

std::optional<int> gridkey_shortest_solution(const GridKeyState& start) {
  if (start.reached_goal) return 0;
  const auto space = gridkey_action_space(start.config.colors);
  using Key = std::tuple<int, int, int, bool, bool>;
  auto key_of = [](const GridKeyState& s) {
    return Key{s.agent.x, s.agent.y, static_cast<int>(s.direction), s.key_held, s.door_open};
  };
  std::set<Key> seen{key_of(start)};
  std::deque<std::pair<GridKeyState, int>> frontier;
  GridKeyState root = start;
  root.steps = 0;
  root.config.horizon = std::numeric_limits<int>::max();
  frontier.emplace_back(root, 0);
  while (!frontier.empty()) {
    auto [s, depth] = frontier.front();
    frontier.pop_front();
    for (std::uint64_t j = 0; j < space.size(); ++j) {
      const auto tr = gridkey_step(s, joint_action(space, j));
      if (tr.next.reached_goal) return depth + 1;
      if (seen.insert(key_of(tr.next)).second) frontier.emplace_back(tr.next, depth + 1);
    }
  }
  return std::nullopt;
}

std::size_t gridkey_observation_width(const GridKeyConfig& config) {
  const auto cells = static_cast<std::size_t>(config.grid_size * config.grid_size);
  const auto channels = static_cast<std::size_t>(8 + 2 * config.colors);
  return cells * channels;
}

// Planes: agent, 4 x direction, key by color, door by color, door open, wall,
// goal. A held key is drawn on the agent's cell.
std::vector<float> gridkey_observation(const GridKeyState& s) {
  const int g = s.config.grid_size;
  const int k = s.config.colors;
  const auto cells = static_cast<std::size_t>(g * g);
  std::vector<float> obs(gridkey_observation_width(s.config), 0.0f);
  auto set = [&](int plane, Cell c) {
    obs[static_cast<std::size_t>(plane) * cells + static_cast<std::size_t>(c.y * g + c.x)] = 1.0f;
  };
  set(0, s.agent);
  set(1 + static_cast<int>(s.direction), s.agent);
  set(5 + s.key_color, s.key_held ? s.agent : s.key);
  set(5 + k + s.door_color, s.door);
  if (s.door_open) set(5 + 2 * k, s.door);
  for (int y = 0; y < g; ++y) {
    for (int x = 0; x < g; ++x) {
      if (s.is_wall({x, y})) set(6 + 2 * k, {x, y});
    }
  }
  set(7 + 2 * k, s.goal);
  return obs;
}

GridKeyEnvironment::GridKeyEnvironment(GridKeyConfig config)
    : config_(config), space_(gridkey_action_space(config.colors)) {
  validate_config(config_);
  state_ = gridkey_reset(0, config_);
}

std::string GridKeyEnvironment::id() const { return "gridkey-k" + std::to_string(config_.colors); }

void GridKeyEnvironment::reset(std::uint64_t seed) { state_ = gridkey_reset(seed, config_); }

std::vector<float> GridKeyEnvironment::observe() const { return gridkey_observation(state_); }

StepResult GridKeyEnvironment::step(const FactoredAction& action) {
  const auto tr = gridkey_step(state_, action);
  state_ = tr.next;
  return {tr.reward, tr.done};
}

bool GridKeyEnvironment::done() const {
  return state_.reached_goal || state_.steps >= config_.horizon;
}

std::unique_ptr<Environment> GridKeyEnvironment::clone() const {
  return std::make_unique<GridKeyEnvironment>(*this);
}

// ---------------------------------------------------------------------------

bool is_known_environment(const std::string& id) {
  return id == "cmab" || id == "gridkey-k2" || id == "gridkey-k3" || id == "gridkey-k4";
}

std::unique_ptr<Environment> make_environment(const std::string& id, const nlohmann::json& knobs) {
  if (!is_known_environment(id)) fail(ErrorCode::kUnknownEnvironment, "unknown environment id '" + id + "'");
  const auto allowed = id == "cmab" ? std::set<std::string>{"horizon", "observation_width", "encoding"}
                                    : std::set<std::string>{"horizon", "grid_size"};
  for (const auto& [key, _] : knobs.items()) {
    if (!allowed.count(key)) fail(ErrorCode::kConfig, "unknown knob '" + key + "' for environment " + id);
  }
  try {
    if (id == "cmab") {
      const auto encoding = knobs.value("encoding", std::string("normalized"));
      if (encoding != "normalized" && encoding != "onehot") {
        fail(ErrorCode::kConfig, "unknown cmab encoding '" + encoding + "'");
      }
      if (encoding == "onehot" && knobs.contains("observation_width")) {
        fail(ErrorCode::kConfig, "the onehot cmab encoding fixes its own width");
      }
      return std::make_unique<CmabEnvironment>(
          knobs.value("horizon", kCmabDefaultHorizon),
          knobs.value("observation_width", kCmabDefaultObservationWidth),
          encoding == "onehot" ? CmabEncoding::kOneHot : CmabEncoding::kNormalized);
    }
    GridKeyConfig config;
    config.colors = id.back() - '0';
    config.grid_size = knobs.value("grid_size", config.grid_size);
    config.horizon = knobs.value("horizon", config.horizon);
    return std::make_unique<GridKeyEnvironment>(config);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad environment knob: ") + e.what());
  }
}

}  // namespace fmcts
