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

#include "fmcts/mcts.hpp"

#include <algorithm>
#include <cmath>

#include "fmcts/errors.hpp"

namespace fmcts {
namespace {

std::vector<double> softmax(std::span<const float> logits) {
  const float m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(m));
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

NodeEvaluation finish_evaluation(const ModelParams& params, std::vector<float> latent) {
  NodeEvaluation eval;
  auto heads = predict_heads(params, latent);
  eval.joint_prior = softmax(heads.policy_logits);
  eval.value = heads.value;
  eval.reward = heads.reward;
  eval.structure_probs = infer_structure(params, latent);
  eval.latent = std::move(latent);
  return eval;
}

}  // namespace

void SearchConfig::validate() const {
  require(num_simulations >= 1, "num_simulations must be at least 1");
  require(discount >= 0.0 && discount < 1.0, "discount must lie in [0,1)");
  require(dirichlet_ratio >= 0.0 && dirichlet_ratio <= 1.0, "dirichlet_ratio must lie in [0,1]");
  require(dirichlet_alpha > 0.0, "dirichlet_alpha must be positive");
  require(mask_threshold >= 0.0 && mask_threshold < 1.0, "mask_threshold must lie in [0,1)");
  require(c2 > 0.0, "c2 must be positive");
  require(branching_cap >= 1, "branching_cap must be positive");
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = {{"num_simulations", c.num_simulations}, {"c1", c.c1},
       {"c2", c.c2},
       {"discount", c.discount},
       {"dirichlet_ratio", c.dirichlet_ratio},
       {"dirichlet_alpha", c.dirichlet_alpha},
       {"mask_threshold", c.mask_threshold},
       {"vanilla", c.vanilla},
       {"branching_cap", c.branching_cap},
       {"unvisited_parent_q", c.unvisited_parent_q}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  c.num_simulations = j.value("num_simulations", c.num_simulations);
  c.c1 = j.value("c1", c.c1);
  c.c2 = j.value("c2", c.c2);
  c.discount = j.value("discount", c.discount);
  c.dirichlet_ratio = j.value("dirichlet_ratio", c.dirichlet_ratio);
  c.dirichlet_alpha = j.value("dirichlet_alpha", c.dirichlet_alpha);
  c.mask_threshold = j.value("mask_threshold", c.mask_threshold);
  c.vanilla = j.value("vanilla", c.vanilla);
  c.branching_cap = j.value("branching_cap", c.branching_cap);
  c.unvisited_parent_q = j.value("unvisited_parent_q", c.unvisited_parent_q);
}

double exploration_coefficient(double sum_visits, double c1, double c2) {
  return c1 + std::log((sum_visits + c2 + 1.0) / c2);
}

void MinMaxStats::update(double value) {
  min_ = std::min(min_, value);
  max_ = std::max(max_, value);
}

double MinMaxStats::normalize(double value) const {
  if (max_ > min_) return (value - min_) / (max_ - min_);
  return 0.0;
}

NodeEvaluation evaluate_initial(const ModelParams& params, std::span<const float> observation) {
  return finish_evaluation(params, encode(params, observation));
}

NodeEvaluation evaluate_recurrent(const ModelParams& params, std::span<const float> latent,
                                  std::span<const float> masked_action_encoding) {
  return finish_evaluation(params, dynamics(params, latent, masked_action_encoding));
}

CachedView::CachedView(const FactoredActionSpace& space, const AbstractionMask& mask,
                       std::size_t cap)
    : view(space, mask, cap), joint_to_abstract(view.joint_to_abstract()) {}

std::int64_t Node::total_visits() const {
  std::int64_t n = 0;
  for (auto v : edge_visits) n += v;
  return n;
}

double Node::edge_q(std::size_t k) const {
  return edge_visits[k] > 0 ? edge_value_sum[k] / static_cast<double>(edge_visits[k]) : 0.0;
}

SearchTree::SearchTree(const FactoredActionSpace& space, const SearchConfig& cfg)
    : space_(space), cfg_(cfg) {
  cfg_.validate();
}

AbstractionMask SearchTree::node_mask(std::span<const double> probs) const {
  if (cfg_.vanilla) return AbstractionMask::all_ones(space_.num_variables());
  return deterministic_mask(probs, cfg_.mask_threshold);
}

std::shared_ptr<const CachedView> SearchTree::view_for(const AbstractionMask& mask) {
  auto it = views_.find(mask.bits);
  if (it != views_.end()) return it->second;
  auto view = std::make_shared<const CachedView>(space_, mask, cfg_.branching_cap);
  views_.emplace(mask.bits, view);
  return view;
}

int SearchTree::add_node(NodeEvaluation eval) {
  Node node;
  node.mask = node_mask(eval.structure_probs);
  node.mask.probs = eval.structure_probs;
  node.view = view_for(node.mask);
  const auto& j2a = node.view->joint_to_abstract;
  node.prior.assign(node.view->view.size(), 0.0);
  for (std::size_t j = 0; j < j2a.size(); ++j) node.prior[j2a[j]] += eval.joint_prior[j];
  node.structure_probs = std::move(eval.structure_probs);
  node.latent = std::move(eval.latent);
  node.node_value = eval.value;
  node.reward = eval.reward;
  node.child.assign(node.prior.size(), -1);
  node.edge_visits.assign(node.prior.size(), 0);
  node.edge_value_sum.assign(node.prior.size(), 0.0);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size() - 1);
}

std::size_t select_child(const Node& node, const MinMaxStats& stats, const SearchConfig& cfg) {
  require(node.num_actions() > 0, "select_child on an unexpanded node");
  if (node.num_actions() == 1) return 0;
  const double total = static_cast<double>(node.total_visits());
  const double c = exploration_coefficient(total, cfg.c1, cfg.c2);
  // Before any child has been visited every score would be zero; counting
  // the expansion as one visit makes the first choice the largest prior.
  const double sqrt_total = std::sqrt(std::max(total, 1.0));
  double unvisited_q = 0.0;
  if (cfg.unvisited_parent_q) {
    double sum = 0.0;
    for (std::size_t k = 0; k < node.num_actions(); ++k) sum += node.edge_value_sum[k];
    unvisited_q = std::clamp(stats.normalize(total > 0.0 ? sum / total : node.node_value), 0.0, 1.0);
  }
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < node.num_actions(); ++k) {
    const auto n = static_cast<double>(node.edge_visits[k]);
    const double q = node.edge_visits[k] > 0 ? stats.normalize(node.edge_q(k)) : unvisited_q;
    const double score = q + c * node.prior[k] * sqrt_total / (1.0 + n);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

void add_dirichlet_noise(std::vector<double>& prior, double alpha, double ratio,
                         std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> noise(prior.size());
  double sum = 0.0;
  for (double& x : noise) {
    x = gamma(rng);
    sum += x;
  }
  if (!(sum > 0.0)) {
    // All draws underflowed (possible for tiny alpha): fall back to uniform.
    std::fill(noise.begin(), noise.end(), 1.0);
    sum = static_cast<double>(noise.size());
  }
  for (std::size_t k = 0; k < prior.size(); ++k) {
    prior[k] = (1.0 - ratio) * prior[k] + ratio * noise[k] / sum;
  }
}

int expand_child(SearchTree& tree, int parent, std::size_t k, const ModelParams& params) {
  const Node& p = tree.node(parent);
  require(k < p.num_actions(), "abstract action index out of range");
  if (p.child[k] >= 0) fail(ErrorCode::kDuplicateChild, "abstract action already expanded");
  const auto encoding = p.view->view.encode(k);
  auto eval = evaluate_recurrent(params, p.latent, encoding);
  const int id = tree.add_node(std::move(eval));
  tree.node(parent).child[k] = id;
  return id;
}

void backup(SearchTree& tree, std::span<const std::pair<int, std::size_t>> path,
            double leaf_value) {
  const double gamma = tree.config().discount;
  double g = leaf_value;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    Node& parent = tree.node(it->first);
    const std::size_t k = it->second;
    const int child = parent.child[k];
    const double r = child >= 0 ? tree.node(child).reward : 0.0;
    g = r + gamma * g;
    parent.edge_visits[k] += 1;
    parent.edge_value_sum[k] += g;
    tree.min_max().update(parent.edge_q(k));
  }
}

SearchResult run_search(std::span<const float> observation, const ModelParams& params,
                        const SearchConfig& cfg, std::mt19937_64& rng,
                        const SearchOptions& options) {
  SearchTree tree(params.action_space(), cfg);
  const int root = tree.add_node(evaluate_initial(params, observation));
  if (options.mode == SearchMode::kActing && cfg.dirichlet_ratio > 0.0) {
    add_dirichlet_noise(tree.node(root).prior, cfg.dirichlet_alpha, cfg.dirichlet_ratio, rng);
  }

  SearchResult result;
  std::vector<std::pair<int, std::size_t>> path;
  for (int sim = 0; sim < cfg.num_simulations; ++sim) {
    path.clear();
    int current = root;
    while (true) {
      const Node& node = tree.node(current);
      const std::size_t k = select_child(node, tree.min_max(), cfg);
      path.emplace_back(current, k);
      if (node.child[k] < 0) break;
      current = node.child[k];
    }
    const int leaf = expand_child(tree, path.back().first, path.back().second, params);
    const double leaf_value = tree.node(leaf).node_value;
    backup(tree, path, leaf_value);
    if (options.record_trace) {
      SimulationTrace t;
      for (const auto& step : path) t.path.push_back(step.second);
      t.leaf_value = leaf_value;
      t.leaf_reward = tree.node(leaf).reward;
      result.trace.push_back(std::move(t));
    }
  }

  const Node& r = tree.node(root);
  result.visit_counts = r.edge_visits;
  const double total = static_cast<double>(r.total_visits());
  result.visit_dist.resize(r.num_actions());
  result.root_q.resize(r.num_actions());
  double weighted = 0.0;
  for (std::size_t k = 0; k < r.num_actions(); ++k) {
    result.visit_dist[k] = static_cast<double>(r.edge_visits[k]) / total;
    result.root_q[k] = r.edge_q(k);
    weighted += r.edge_value_sum[k];
  }
  result.search_value = weighted / total;
  result.root_mask = r.mask;
  result.root_view = r.view;
  result.root_prior = r.prior;
  result.root_structure_probs = r.structure_probs;
  result.root_value = r.node_value;
  if (options.tree_out != nullptr) *options.tree_out = std::move(tree);
  return result;
}

std::vector<double> unfolded_policy(const SearchResult& result) {
  const auto& view = *result.root_view;
  std::vector<double> out(view.joint_to_abstract.size());
  const double u = 1.0 / static_cast<double>(view.view.fold());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = result.visit_dist[view.joint_to_abstract[j]] * u;
  }
  return out;
}

FactoredAction act(const SearchResult& result, SearchMode mode, double temperature,
                   std::mt19937_64& rng) {
  const auto& dist = result.visit_dist;
  require(!dist.empty(), "empty visit distribution");
  std::size_t k = 0;
  if (mode == SearchMode::kEvaluation || temperature <= 0.0) {
    for (std::size_t i = 1; i < dist.size(); ++i) {
      const bool more = dist[i] > dist[k];
      const bool tie_better = dist[i] == dist[k] && !result.root_q.empty() &&
                              result.root_q[i] > result.root_q[k];
      if (more || tie_better) k = i;
    }
  } else {
    std::vector<double> w(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) w[i] = std::pow(dist[i], 1.0 / temperature);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    k = pick(rng);
  }
  const auto& view = result.root_view->view;
  FactoredAction a = view.complete(k);
  for (int i : view.dropped()) {
    const int card = view.space().cardinality(static_cast<std::size_t>(i));
    a.values[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, card - 1)(rng);
  }
  return a;
}

}  // namespace fmcts
