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

// Tree search over abstract actions. Every node owns a mask fixed at
// expansion; its children are keyed by the abstract actions of that mask.
// With all masks forced to ones the search is plain MuZero PUCT search.

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "fmcts/action_space.hpp"
#include "fmcts/models.hpp"
#include "json.hpp"

namespace fmcts {

struct SearchConfig {
  int num_simulations = 50;
  double c1 = 1.25;
  double c2 = 19652.0;
  double discount = 0.997;
  double dirichlet_ratio = 0.25;
  double dirichlet_alpha = 0.3;
  double mask_threshold = 0.01;
  // Force all-ones masks at every node.
  bool vanilla = false;
  std::size_t branching_cap = kDefaultBranchingCap;
  // Value scored for edges with no visits: false gives the normalized 0 of
  // the textbook rule; true gives the node's current mean Q (its network
  // value before any visit), normalized like visited edges.
  bool unvisited_parent_q = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const SearchConfig& c);
// Reads known keys over the current values; unknown keys are ignored here and
// policed by the run-config loader.
void from_json(const nlohmann::json& j, SearchConfig& c);

enum class SearchMode {
  kActing,      // root Dirichlet noise, sampled final action
  kEvaluation,  // no noise, argmax final action
};

// Exploration coefficient c = c1 + log((sum_n + c2 + 1) / c2).
double exploration_coefficient(double sum_visits, double c1, double c2);

// Running min/max over the returns observed in one tree.
class MinMaxStats {
 public:
  void update(double value);
  // (q - min) / (max - min); 0 while the range is degenerate.
  double normalize(double value) const;
  bool empty() const { return max_ < min_; }

 private:
  double min_ = std::numeric_limits<double>::infinity();
  double max_ = -std::numeric_limits<double>::infinity();
};

// Result of one network evaluation at a node.
struct NodeEvaluation {
  std::vector<float> latent;
  std::vector<double> joint_prior;      // softmax over all joint actions
  std::vector<double> structure_probs;  // h(z)
  double value = 0.0;
  double reward = 0.0;  // reward predicted for the transition into the node
};

NodeEvaluation evaluate_initial(const ModelParams& params, std::span<const float> observation);
NodeEvaluation evaluate_recurrent(const ModelParams& params, std::span<const float> latent,
                                  std::span<const float> masked_action_encoding);

// An abstraction view together with its joint -> abstract index table.
struct CachedView {
  CachedView(const FactoredActionSpace& space, const AbstractionMask& mask, std::size_t cap);
  AbstractionView view;
  std::vector<std::size_t> joint_to_abstract;
};

struct Node {
  std::vector<float> latent;
  AbstractionMask mask;
  std::shared_ptr<const CachedView> view;
  std::vector<double> prior;  // over view->view abstract actions
  std::vector<double> structure_probs;
  double node_value = 0.0;
  double reward = 0.0;  // predicted reward of the edge into this node
  // Per-child edge statistics, indexed by abstract action.
  std::vector<int> child;  // node id, -1 while unexpanded
  std::vector<std::int64_t> edge_visits;
  std::vector<double> edge_value_sum;

  std::size_t num_actions() const { return prior.size(); }
  std::int64_t total_visits() const;
  double edge_q(std::size_t k) const;
};

class SearchTree {
 public:
  SearchTree(const FactoredActionSpace& space, const SearchConfig& cfg);

  const FactoredActionSpace& space() const { return space_; }
  const SearchConfig& config() const { return cfg_; }
  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  MinMaxStats& min_max() { return min_max_; }
  const MinMaxStats& min_max() const { return min_max_; }

  // Mask used at a node with structure probabilities `probs`.
  AbstractionMask node_mask(std::span<const double> probs) const;
  std::shared_ptr<const CachedView> view_for(const AbstractionMask& mask);

  // Creates a node from a network evaluation; returns its id.
  int add_node(NodeEvaluation eval);

 private:
  FactoredActionSpace space_;
  SearchConfig cfg_;
  std::vector<Node> nodes_;
  MinMaxStats min_max_;
  std::map<std::vector<bool>, std::shared_ptr<const CachedView>> views_;
};

// PUCT over the node's abstract actions; ties go to the lowest index.
std::size_t select_child(const Node& node, const MinMaxStats& stats, const SearchConfig& cfg);

// Mixes Dirichlet(alpha) noise into `prior`: (1 - ratio) prior + ratio noise.
void add_dirichlet_noise(std::vector<double>& prior, double alpha, double ratio,
                         std::mt19937_64& rng);

// Expands abstract action `k` of node `parent`; errors if already expanded.
int expand_child(SearchTree& tree, int parent, std::size_t k, const ModelParams& params);

// Backs `leaf_value` up the path of (node id, abstract index) edges.
void backup(SearchTree& tree, std::span<const std::pair<int, std::size_t>> path,
            double leaf_value);

struct SimulationTrace {
  std::vector<std::size_t> path;  // abstract indices chosen from the root
  double leaf_value = 0.0;
  double leaf_reward = 0.0;
};

struct SearchResult {
  std::vector<double> visit_dist;  // over root abstract actions
  std::vector<std::int64_t> visit_counts;
  std::vector<double> root_q;  // mean return per root edge; 0 when unvisited
  AbstractionMask root_mask;
  std::shared_ptr<const CachedView> root_view;
  std::vector<double> root_prior;  // after noise, if any
  std::vector<double> root_structure_probs;
  double root_value = 0.0;  // network value of the root
  double search_value = 0.0;  // visit-weighted mean return through the root
  std::vector<SimulationTrace> trace;  // filled when requested
};

struct SearchOptions {
  SearchMode mode = SearchMode::kEvaluation;
  bool record_trace = false;
  SearchTree* tree_out = nullptr;  // receives the final tree when set
};

SearchResult run_search(std::span<const float> observation, const ModelParams& params,
                        const SearchConfig& cfg, std::mt19937_64& rng,
                        const SearchOptions& options = {});

// The search policy over joint actions (visit distribution unfolded).
std::vector<double> unfolded_policy(const SearchResult& result);

// Picks the abstract action (sampled from visits^(1/temperature) when acting,
// argmax when evaluating) and fills dropped variables uniformly at random.
// Argmax ties on visit counts go to the larger root Q, then the lower index.
FactoredAction act(const SearchResult& result, SearchMode mode, double temperature,
                   std::mt19937_64& rng);

}  // namespace fmcts
