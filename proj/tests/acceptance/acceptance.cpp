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

// End-to-end acceptance run. Every criterion prints exactly one line,
//
//   [PASS] C<n> <name>: <measurements>
//   [FAIL] C<n> <name>: <measurements>
//
// followed by a summary. Training runs start from scratch in --out-dir. The
// process exits 0 once every selected criterion has been measured (PASS or
// FAIL) and non-zero only when the harness itself breaks (bad arguments, a
// thrown error), so the verdicts live in the report, not the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmcts/environments.hpp"
#include "fmcts/errors.hpp"
#include "fmcts/eval.hpp"
#include "fmcts/mcts.hpp"
#include "fmcts/models.hpp"
#include "fmcts/training.hpp"
#include "json.hpp"
#include "support/random_batch.hpp"
#include "support/reference_search.hpp"
#include "support/small_model.hpp"

using namespace fmcts;
using testing_support::random_batch;
using testing_support::random_observation;
using testing_support::small_model;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream out;
  out << std::setprecision(precision) << x;
  return out.str();
}

std::string join(const std::vector<double>& xs, int precision = 4) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + fmt(xs[i], precision);
  return s + "]";
}

double mean(const std::vector<double>& xs) {
  return xs.empty() ? std::nan("") : std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

struct Verdict {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

class Report {
 public:
  void add(Verdict v) {
    std::cout << (v.pass ? "[PASS]" : "[FAIL]") << " C" << v.id << ' ' << v.name << ": " << v.detail
              << std::endl;
    verdicts_.push_back(std::move(v));
  }
  const std::vector<Verdict>& verdicts() const { return verdicts_; }

 private:
  std::vector<Verdict> verdicts_;
};

// ---------------------------------------------------------------------------
// Property criteria

Verdict vanilla_parity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int matched = 0;
  const int trees = 100;
  for (std::uint64_t seed = 0; seed < trees; ++seed) {
    // A strongly negative structure bias would drop every variable, so any
    // leak of the abstraction into vanilla search shows up immediately.
    const auto model = small_model({2, 3, 2}, 6, 1000 + seed, -20.0f);
    SearchConfig cfg;
    cfg.vanilla = true;
    cfg.num_simulations = 30;
    const auto obs = random_observation(6, rng);
    std::mt19937_64 search_rng(seed);
    SearchTree tree(model.action_space(), cfg);
    const auto result =
        run_search(obs, model, cfg, search_rng, {SearchMode::kEvaluation, true, &tree});
    const auto ref = reference::reference_search(obs, model, cfg.num_simulations, cfg.c1, cfg.c2,
                                                 cfg.discount);
    bool same = tree.nodes().size() == ref.nodes.size() && result.trace.size() == ref.sims.size();
    for (std::size_t s = 0; same && s < ref.sims.size(); ++s) {
      same = result.trace[s].leaf_value == ref.sims[s].leaf_value &&
             result.trace[s].path == ref.sims[s].path;
    }
    for (std::size_t id = 0; same && id < ref.nodes.size(); ++id) {
      const auto& n = tree.nodes()[id];
      const auto& r = ref.nodes[id];
      same = n.latent == r.latent && n.prior == r.prior && n.node_value == r.value;
      for (std::size_t k = 0; same && k < n.num_actions(); ++k) {
        const auto it = r.visits.find(k);
        const std::int64_t visits = it == r.visits.end() ? 0 : it->second;
        const double sum = it == r.visits.end() ? 0.0 : r.value_sum.at(k);
        const auto c = r.children.find(k);
        same = n.edge_visits[k] == visits && n.edge_value_sum[k] == sum &&
               n.child[k] == (c == r.children.end() ? -1 : c->second);
      }
    }
    matched += same ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  return {4, "vanilla-parity", matched == trees && secs < 60.0,
          std::to_string(matched) + "/" + std::to_string(trees) + " trees identical node-for-node in " +
              fmt(secs, 3) + " s (need 100/100, < 60 s)"};
}

Verdict masked_invariance() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  const int cases = 1000;
  int identical = 0;
  std::normal_distribution<float> nz(0.0f, 1.0f);
  for (int trial = 0; trial < cases; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    std::vector<int> cards(static_cast<std::size_t>(n));
    for (auto& c : cards) c = std::uniform_int_distribution<int>(2, 5)(rng);
    const auto model = small_model(cards, 5, 500 + static_cast<std::uint64_t>(trial % 50));
    const auto& space = model.action_space();
    std::vector<float> z(model.config().latent_width);
    for (auto& x : z) x = nz(rng);
    AbstractionMask mask;
    for (int i = 0; i < n; ++i) mask.bits.push_back(std::bernoulli_distribution(0.5)(rng));
    auto a = joint_action(space, std::uniform_int_distribution<std::uint64_t>(0, space.size() - 1)(rng));
    auto b = a;
    for (std::size_t i = 0; i < cards.size(); ++i) {
      if (!mask.bits[i]) b.values[i] = std::uniform_int_distribution<int>(0, cards[i] - 1)(rng);
    }
    const auto za = dynamics(model, z, encode_action_masked(space, a, mask));
    const auto zb = dynamics(model, z, encode_action_masked(space, b, mask));
    identical += za == zb ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  return {5, "masked-dynamics-invariance", identical == cases && secs < 10.0,
          std::to_string(identical) + "/" + std::to_string(cases) + " bit-identical latents in " +
              fmt(secs, 3) + " s (need 100%, < 10 s)"};
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<double> d(n);
  double s = 0.0;
  for (auto& x : d) s += (x = g(rng) + 1e-12);
  for (auto& x : d) x /= s;
  return d;
}

Verdict distribution_algebra() {
  std::mt19937_64 rng(31);
  const int cases = 1000;
  int ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < cases; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 5)(rng);
    std::vector<int> cards(static_cast<std::size_t>(n));
    for (auto& c : cards) c = std::uniform_int_distribution<int>(1, 6)(rng);
    const FactoredActionSpace space(cards);
    AbstractionMask mask;
    for (int i = 0; i < n; ++i) mask.bits.push_back(std::bernoulli_distribution(0.5)(rng));
    const auto prior = random_distribution(space.size(), rng);
    const auto marg = marginalize_prior(space, mask, prior);
    const auto q = random_distribution(marg.size(), rng);
    const auto unfolded = unfold_distribution(space, mask, q);
    const auto back = marginalize_prior(space, mask, unfolded);
    double err = std::abs(std::accumulate(marg.begin(), marg.end(), 0.0) - 1.0);
    err = std::max(err, std::abs(std::accumulate(unfolded.begin(), unfolded.end(), 0.0) - 1.0));
    bool nonneg = true;
    for (double x : marg) nonneg = nonneg && x >= 0.0;
    for (double x : unfolded) nonneg = nonneg && x >= 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) err = std::max(err, std::abs(back[k] - q[k]));
    worst = std::max(worst, err);
    ok += err <= 1e-9 && nonneg && marg.size() == abstract_size(space, mask) ? 1 : 0;
  }
  return {6, "distribution-algebra", ok == cases,
          std::to_string(ok) + "/" + std::to_string(cases) +
              " cases normalized and round-tripped, worst error " + fmt(worst, 3) + " (need 100%, <= 1e-9)"};
}

// Relative error ||a - n|| / (||a|| + ||n||) over the probed coordinates of
// one network's loss gradient.
double network_gradient_error(Model<double> model, const Batch& batch, const LossWeights& w,
                              std::mt19937_64& rng) {
  model.zero_grad();
  forward_backward(model, batch, w);
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (auto* p : model.params()) {
    const Eigen::Index size = p->data.size();
    const int probes = static_cast<int>(std::min<Eigen::Index>(size, 12));
    for (int probe = 0; probe < probes; ++probe) {
      const auto idx = size <= 12 ? probe : std::uniform_int_distribution<Eigen::Index>(0, size - 1)(rng);
      const double saved = p->data.data()[idx];
      const double eps = 1e-6;
      p->data.data()[idx] = saved + eps;
      const double up = loss_value(model, batch, w);
      p->data.data()[idx] = saved - eps;
      const double down = loss_value(model, batch, w);
      p->data.data()[idx] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = p->grad.data()[idx];
      diff += (analytic - numeric) * (analytic - numeric);
      norm_a += analytic * analytic;
      norm_n += numeric * numeric;
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm_a) + std::sqrt(norm_n), 1e-300);
}

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(55);
  const int nets = 50;
  double worst_plain = 0.0, worst_relaxed = 0.0;
  int ok = 0;
  for (int i = 0; i < nets; ++i) {
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> cards(static_cast<std::size_t>(n));
    for (auto& c : cards) c = std::uniform_int_distribution<int>(2, 4)(rng);
    const std::size_t obs = std::uniform_int_distribution<std::size_t>(3, 6)(rng);
    const std::size_t latent = std::uniform_int_distribution<std::size_t>(4, 8)(rng);
    const std::size_t hidden = std::uniform_int_distribution<std::size_t>(6, 12)(rng);
    const int K = std::uniform_int_distribution<int>(1, 3)(rng);
    const std::size_t B = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    auto model =
        small_model(cards, obs, 9000 + static_cast<std::uint64_t>(i), std::nullopt, latent, hidden)
            .cast<double>();
    // Freshly initialised biases are exactly zero; a row whose ReLUs are all
    // dead then feeds an exact zero into the next network and parks its
    // units on the ReLU kink, where a central difference reads half a slope.
    // Random biases put every probe at a generic, differentiable point.
    std::uniform_real_distribution<double> bias(-0.2, 0.2);
    for (auto* p : model.params()) {
      if (p->data.rows() == 1) {
        for (Eigen::Index k = 0; k < p->data.size(); ++k) p->data.data()[k] = bias(rng);
      }
    }
    const Batch batch = random_batch(model.action_space(), obs, K, B, 7000 + static_cast<std::uint64_t>(i));
    LossWeights w;
    w.recon_weight = 1.0 + i % 3;
    w.sparsity_lambda = 0.01 * (i % 4);
    // Even networks: every network on the unmasked path. Odd networks: the
    // relaxed Gumbel-Sigmoid path with all losses reaching h.
    const bool relaxed = i % 2 == 1;
    w.mask_path = relaxed ? MaskPath::kRelaxed : MaskPath::kAllOnes;
    w.frozen_h = !relaxed;
    w.gumbel_beta = relaxed ? 0.5 + 0.1 * (i % 7) : 1.0;
    const double err = network_gradient_error(model, batch, w, rng);
    if (relaxed) {
      worst_relaxed = std::max(worst_relaxed, err);
      ok += err <= 1e-3 ? 1 : 0;
    } else {
      worst_plain = std::max(worst_plain, err);
      ok += err <= 1e-4 ? 1 : 0;
    }
  }
  const double secs = seconds_since(t0);
  return {7, "gradient-correctness", ok == nets && secs < 60.0,
          std::to_string(ok) + "/" + std::to_string(nets) + " networks within tolerance; worst relative error " +
              fmt(worst_plain, 3) + " unmasked (<= 1e-4), " + fmt(worst_relaxed, 3) +
              " relaxed Gumbel-Sigmoid (<= 1e-3); " + fmt(secs, 3) + " s (< 60 s)"};
}

RunConfig small_trainer_config(std::uint64_t seed) {
  RunConfig c;
  c.env = "cmab";
  c.env_knobs = {{"observation_width", 8}, {"horizon", 8}};
  c.seed = seed;
  c.latent_width = 8;
  c.hidden_width = 16;
  c.hidden_layers = 1;
  c.search.num_simulations = 4;
  c.train.batch_size = 8;
  c.train.unroll_steps = 3;
  c.train.td_steps = 3;
  c.train.min_replay = 16;
  c.train.replay_capacity = 200;
  c.train.target_interval = 2;
  c.train.sparsity_lambda = 0.05;
  return c;
}

Verdict gradient_routing() {
  const int trials = 20;
  int zero = 0, control_nonzero = 0;
  for (int t = 0; t < trials; ++t) {
    auto structure_grad_norm = [&](double recon_coef) {
      RunConfig c = small_trainer_config(static_cast<std::uint64_t>(t));
      c.train.recon_coef = recon_coef;
      Trainer trainer(c);
      trainer.warmup();
      trainer.train_step();
      // Gradients as left by the full step (after clipping and the update).
      double max_abs = 0.0;
      for (const auto* p : trainer.params().structure.params()) {
        max_abs = std::max(max_abs, static_cast<double>(p->grad.cwiseAbs().maxCoeff()));
      }
      return max_abs;
    };
    zero += structure_grad_norm(0.0) == 0.0 ? 1 : 0;
    control_nonzero += structure_grad_norm(1.0) > 0.0 ? 1 : 0;
  }
  return {8, "gradient-routing", zero == trials && control_nonzero == trials,
          std::to_string(zero) + "/" + std::to_string(trials) +
              " train_steps with recon_coef=0 left every structure gradient exactly 0 (control recon_coef=1: " +
              std::to_string(control_nonzero) + "/" + std::to_string(trials) + " non-zero)"};
}

// ---------------------------------------------------------------------------
// Training criteria

struct RunSummary {
  double return_mean = 0.0;
  double shd = 0.0;
  double reduction = 0.0;
  double seconds = 0.0;
};

class Runner {
 public:
  Runner(std::filesystem::path out, std::int64_t steps_override)
      : out_(std::move(out)), steps_override_(steps_override) {}

  RunConfig base_config(const std::string& file) const {
    RunConfig c = load_run_config(std::filesystem::path(FMCTS_SOURCE_DIR) / "configs" / file);
    if (steps_override_ > 0) {
      c.total_steps = steps_override_;
      c.eval_interval = steps_override_;
      c.train.min_replay = std::min<std::size_t>(c.train.min_replay, 500);
    }
    return c;
  }

  // Runs (or reuses within this process) one training run and returns its
  // final evaluation.
  const RunSummary& run(const std::string& tag, const RunConfig& config) {
    const auto it = cache_.find(tag);
    if (it != cache_.end()) return it->second;
    const auto t0 = Clock::now();
    const auto dir = out_ / tag;
    std::cerr << "  training " << tag << " (" << config.total_steps << " steps) ..." << std::flush;
    const auto outcome = run_training(config, dir);
    if (outcome.metrics.empty()) fail(ErrorCode::kConfig, "run " + tag + " produced no evaluation");
    const auto& last = outcome.metrics.back();
    RunSummary s{last.return_mean, last.shd_mean, last.reduction_pct / 100.0, seconds_since(t0)};
    std::cerr << " return " << fmt(s.return_mean) << ", shd " << fmt(s.shd) << ", reduction "
              << fmt(s.reduction) << " (" << fmt(s.seconds, 3) << " s)" << std::endl;
    return cache_.emplace(tag, s).first->second;
  }

 private:
  std::filesystem::path out_;
  std::int64_t steps_override_;
  std::map<std::string, RunSummary> cache_;
};

const std::vector<std::uint64_t> kSeeds{0, 1, 2};

RunConfig cmab_config(const Runner& r, std::uint64_t seed, bool vanilla, double lambda = -1.0) {
  RunConfig c = r.base_config("cmab.json");
  c.seed = seed;
  c.mode.vanilla = vanilla;
  if (lambda >= 0.0) c.train.sparsity_lambda = lambda;
  return c;
}

std::string cmab_tag(std::uint64_t seed, bool vanilla, double lambda) {
  return std::string("cmab-") + (vanilla ? "vanilla" : "abstraction") + "-lambda" + fmt(lambda) +
         "-seed" + std::to_string(seed);
}

double untrained_shd(const RunConfig& c) {
  Trainer untrained(c);
  const auto seeds = evaluation_seeds(c.eval_seed, c.eval_episodes);
  return evaluate(untrained.params(), c.env, c.env_knobs, c.acting_search(), seeds).shd_mean;
}

void cmab_criteria(Runner& runner, const std::set<int>& selected, Report& report) {
  const double lambda = runner.base_config("cmab.json").train.sparsity_lambda;
  std::vector<double> shd, ret, red, van, base;
  for (auto seed : kSeeds) {
    const auto cfg = cmab_config(runner, seed, false);
    base.push_back(untrained_shd(cfg));
    const auto& s = runner.run(cmab_tag(seed, false, lambda), cfg);
    shd.push_back(s.shd);
    ret.push_back(s.return_mean);
    red.push_back(s.reduction);
  }
  if (selected.count(1)) {
    const int good = static_cast<int>(std::count_if(shd.begin(), shd.end(), [](double x) { return x <= 0.5; }));
    report.add({1, "cmab-csi-recovery", mean(shd) <= 1.0 && good >= 2,
                "trained SHD per seed " + join(shd) + ", mean " + fmt(mean(shd)) + " (need <= 1.0), " +
                    std::to_string(good) + "/3 seeds <= 0.5 (need >= 2); untrained SHD " + join(base)});
  }
  if (selected.count(2)) {
    for (auto seed : kSeeds) {
      van.push_back(runner.run(cmab_tag(seed, true, lambda), cmab_config(runner, seed, true)).return_mean);
    }
    const double optimal = cmab_optimal_return();
    int wins = 0;
    for (std::size_t i = 0; i < ret.size(); ++i) wins += ret[i] > van[i] ? 1 : 0;
    const double frac = mean(ret) / optimal;
    report.add({2, "cmab-return", frac >= 0.8 && wins >= 2,
                "abstraction return per seed " + join(ret) + ", mean " + fmt(mean(ret)) + " = " +
                    fmt(100.0 * frac, 3) + "% of optimal " + fmt(optimal) + " (need >= 80%); vanilla " +
                    join(van) + ", abstraction ahead in " + std::to_string(wins) + "/3 seeds (need >= 2)"});
  }
  if (selected.count(3)) {
    const double truth = 1.0 - 7.0 / 343.0;
    // Reduction alone cannot tell good masks from masks that drop relevant
    // variables too; say so when the measurement is beyond the true value.
    const std::string caveat =
        mean(red) > truth + 1e-9 ? "; exceeds the true-structure value, so masks also drop relevant variables (see SHD)"
                                 : "";
    report.add({3, "search-space-reduction", mean(red) >= 0.90,
                "mean root reduction per seed " + join(red) + ", mean " + fmt(mean(red)) +
                    " (need >= 0.90; true structure gives " + fmt(truth) + ")" + caveat});
  }
  if (selected.count(10)) {
    std::vector<double> lambdas{0.0, 0.001, 0.01};
    std::vector<double> sweep, sweep_red;
    for (double l : lambdas) {
      const auto& s = runner.run(cmab_tag(0, false, l), cmab_config(runner, 0, false, l));
      sweep.push_back(s.shd);
      sweep_red.push_back(s.reduction);
    }
    const bool ok = std::all_of(sweep.begin(), sweep.end(), [](double x) { return x <= 1.0; });
    // All-zero masks score SHD exactly 1 against one-hot ground truth, so the
    // bound can be met without recovering anything; flag that case.
    const double all_zero = 1.0 - 1.0 / 343.0;
    const bool collapsed = std::all_of(sweep_red.begin(), sweep_red.end(),
                                       [&](double r) { return r >= all_zero - 1e-9; });
    report.add({10, "lambda-sweep", ok,
                "seed-0 SHD at lambda " + join(lambdas) + " = " + join(sweep) + " (need all <= 1.0)" +
                    (collapsed ? "; every run collapsed to all-zero masks (reduction " + fmt(all_zero) +
                                     "), which scores SHD 1 without recovering any structure"
                               : "")});
  }
}

void gridkey_criterion(Runner& runner, Report& report) {
  std::vector<double> abs, van, abs_red;
  RunConfig base = runner.base_config("gridkey-k4.json");
  for (auto seed : kSeeds) {
    for (bool vanilla : {false, true}) {
      RunConfig c = base;
      c.seed = seed;
      c.mode.vanilla = vanilla;
      const auto tag = std::string("gridkey-") + (vanilla ? "vanilla" : "abstraction") + "-seed" +
                       std::to_string(seed);
      const auto& s = runner.run(tag, c);
      (vanilla ? van : abs).push_back(s.return_mean);
      if (!vanilla) abs_red.push_back(s.reduction);
    }
  }
  const auto seeds = evaluation_seeds(base.eval_seed, base.eval_episodes);
  const double random = random_policy_return(base.env, base.env_knobs, seeds);
  int wins = 0;
  for (std::size_t i = 0; i < abs.size(); ++i) wins += abs[i] > van[i] ? 1 : 0;
  const bool ok = wins >= 2 && mean(abs) > random && mean(van) > random;
  report.add({9, "gridkey-directional", ok,
              "abstraction return per seed " + join(abs) + ", vanilla " + join(van) + ", abstraction ahead in " +
                  std::to_string(wins) + "/3 seeds (need >= 2); means " + fmt(mean(abs)) + " / " +
                  fmt(mean(van)) + " vs random " + fmt(random) + " (both must exceed it); " +
                  std::to_string(base.search.num_simulations) + " simulations; abstraction root reduction " +
                  join(abs_red) +
                  (std::all_of(abs_red.begin(), abs_red.end(),
                               [](double r) { return r >= 1.0 - 1.0 / 150.0 - 1e-9; })
                       ? " (all-zero masks: a single abstract action, i.e. uniformly random joint actions)"
                       : "")});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run: one PASS/FAIL line per criterion"};
  std::string out_dir = "acceptance_runs";
  std::vector<int> only;
  std::int64_t steps = 0;
  app.add_option("--out-dir", out_dir, "Directory for training runs");
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--steps", steps,
                 "Override the gradient budget of every training run (smoke runs only; the "
                 "criteria are defined at the configured budget)");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected(only.begin(), only.end());
  if (selected.empty()) {
    for (int i = 1; i <= 10; ++i) selected.insert(i);
  }
  const auto t0 = Clock::now();
  Report report;
  try {
    if (selected.count(4)) report.add(vanilla_parity());
    if (selected.count(5)) report.add(masked_invariance());
    if (selected.count(6)) report.add(distribution_algebra());
    if (selected.count(7)) report.add(gradient_correctness());
    if (selected.count(8)) report.add(gradient_routing());
    Runner runner(out_dir, steps);
    if (selected.count(1) || selected.count(2) || selected.count(3) || selected.count(10)) {
      cmab_criteria(runner, selected, report);
    }
    if (selected.count(9)) gridkey_criterion(runner, report);
  } catch (const std::exception& e) {
    std::cerr << "acceptance harness error: " << e.what() << std::endl;
    return 1;
  }

  int passed = 0;
  for (const auto& v : report.verdicts()) passed += v.pass ? 1 : 0;
  std::cout << "acceptance summary: " << passed << "/" << report.verdicts().size() << " PASS"
            << (steps > 0 ? " (reduced budget: " + std::to_string(steps) + " steps per run)" : "")
            << " in " << fmt(seconds_since(t0), 4) << " s" << std::endl;

  nlohmann::json j = nlohmann::json::array();
  for (const auto& v : report.verdicts()) {
    j.push_back({{"criterion", v.id}, {"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream(std::filesystem::path(out_dir) / "acceptance.json") << j.dump(2) << '\n';
  return 0;
}
