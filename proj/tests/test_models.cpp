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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fmcts/environments.hpp"
#include "fmcts/errors.hpp"
#include "fmcts/models.hpp"
#include "support/small_model.hpp"

using namespace fmcts;
using testing_support::random_observation;
using testing_support::small_model;

namespace {

ModelParams cmab_model(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.observation_width = kCmabDefaultObservationWidth;
  cfg.cardinalities = {7, 7, 7};
  ModelParams m(cfg);
  m.initialize(seed);
  return m;
}

}  // namespace

TEST_CASE("shapes with the default widths") {
  const auto m = cmab_model(0);
  const auto obs = cmab_observation(CmabState{}, kCmabDefaultObservationWidth);
  const auto z = encode(m, obs);
  CHECK(z.size() == 64);
  CHECK(z == encode(m, obs));
  for (float x : z) CHECK(std::isfinite(x));
  CHECK(decode(m, z).size() == obs.size());
  const auto heads = predict_heads(m, z);
  CHECK(heads.policy_logits.size() == 343);
  CHECK(std::isfinite(heads.value));
  CHECK(std::isfinite(heads.reward));
  const auto p = infer_structure(m, z);
  CHECK(p.size() == 3);
  for (double x : p) CHECK((x >= 0.0 && x <= 1.0));
  CHECK_THROWS_AS(encode(m, std::vector<float>(63, 0.0f)), Error);
  CHECK_THROWS_AS(dynamics(m, z, std::vector<float>(20, 0.0f)), Error);
}

TEST_CASE("outputs stay finite for large inputs") {
  const auto m = small_model({3, 2}, 10, 4);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  for (int i = 0; i < 100; ++i) {
    std::vector<float> obs(10);
    for (auto& x : obs) x = u(rng);
    const auto z = encode(m, obs);
    const auto h = predict_heads(m, z);
    for (float l : h.policy_logits) CHECK(std::isfinite(l));
    CHECK(std::isfinite(h.value));
    for (double p : infer_structure(m, z)) CHECK(std::isfinite(p));
  }
}

TEST_CASE("deterministic masks") {
  const std::vector<double> p{0.99, 0.005, 0.5};
  CHECK(deterministic_mask(p, 0.01).bits == std::vector<bool>{true, false, true});
  CHECK(deterministic_mask(p, 0.5).bits == std::vector<bool>{true, false, false});  // strict
  CHECK(deterministic_mask(std::vector<double>{0.001, 0.0}, 0.01).count() == 0);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> q(5);
    for (auto& x : q) x = std::uniform_real_distribution<double>(0, 1)(rng);
    const double t1 = std::uniform_real_distribution<double>(0, 0.99)(rng);
    const double t2 = std::uniform_real_distribution<double>(t1, 0.99)(rng);
    const auto lo = deterministic_mask(q, t1), hi = deterministic_mask(q, t2);
    for (std::size_t k = 0; k < 5; ++k) CHECK((!hi.bits[k] || lo.bits[k]));
  }
}

TEST_CASE("sampled masks") {
  std::mt19937_64 rng(3);
  const int n = 10000;
  int ones_hi = 0, ones_lo = 0, ones_half = 0;
  for (int i = 0; i < n; ++i) {
    ones_hi += static_cast<int>(sample_mask(std::vector<double>{1.0, 1.0}, rng, 1.0).count());
    ones_lo += static_cast<int>(sample_mask(std::vector<double>{0.0, 0.0}, rng, 1.0).count());
    ones_half += sample_mask(std::vector<double>{0.5}, rng, 1.0).bits[0] ? 1 : 0;
  }
  CHECK(ones_hi >= 2 * n - 2);
  CHECK(ones_lo <= 2);
  CHECK(std::abs(ones_half / static_cast<double>(n) - 0.5) <= 0.02);
  const auto m = sample_mask(std::vector<double>{0.3, 0.7}, rng, 1.0);
  REQUIRE(m.probs.has_value());
  CHECK((*m.probs)[1] == 0.7);
}

TEST_CASE("masked dynamics ignore dropped variables exactly") {
  const auto m = small_model({3, 4, 2, 5}, 6, 7);
  const auto& space = m.action_space();
  std::mt19937_64 rng(4);
  std::normal_distribution<float> nz(0.0f, 1.0f);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> z(m.config().latent_width);
    for (auto& x : z) x = nz(rng);
    AbstractionMask mask;
    for (int i = 0; i < 4; ++i) mask.bits.push_back(std::bernoulli_distribution(0.5)(rng));
    auto a = joint_action(space, std::uniform_int_distribution<std::uint64_t>(0, space.size() - 1)(rng));
    auto b = a;
    for (std::size_t i = 0; i < 4; ++i) {
      if (!mask.bits[i]) b.values[i] = std::uniform_int_distribution<int>(0, space.cardinality(i) - 1)(rng);
    }
    const auto za = dynamics(m, z, encode_action_masked(space, a, mask));
    const auto zb = dynamics(m, z, encode_action_masked(space, b, mask));
    CHECK(za == zb);
  }
}

TEST_CASE("all-ones masks give the unrestricted dynamics") {
  const auto m = small_model({2, 3}, 4, 8);
  const auto& space = m.action_space();
  std::mt19937_64 rng(5);
  const auto z = encode(m, random_observation(4, rng));
  for (std::uint64_t j = 0; j < space.size(); ++j) {
    const auto a = joint_action(space, j);
    std::vector<float> onehot(space.encoding_width(), 0.0f);
    onehot[static_cast<std::size_t>(a.values[0])] = 1.0f;
    onehot[2 + static_cast<std::size_t>(a.values[1])] = 1.0f;
    CHECK(dynamics(m, z, onehot) == dynamics(m, z, encode_action_masked(space, a, AbstractionMask::all_ones(2))));
  }
}

TEST_CASE("model checkpoint round trip is bit exact") {
  const auto m = small_model({3, 3}, 5, 11);
  const auto path = std::filesystem::temp_directory_path() / "fmcts_test_model.ckpt";
  write_checkpoint(path, to_checkpoint(m, {{"steps", 3}}));
  const auto ckpt = read_checkpoint(path);
  CHECK(ckpt.metadata.at("steps") == 3);
  const auto back = model_from_checkpoint(ckpt);
  const auto a = m.params();
  const auto b = back.params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->data == b[i]->data);
  }
  std::mt19937_64 rng(6);
  const auto obs = random_observation(5, rng);
  CHECK(predict_heads(m, encode(m, obs)).policy_logits == predict_heads(back, encode(back, obs)).policy_logits);
  std::filesystem::remove(path);
}

TEST_CASE("initialisation is seeded") {
  const auto a = small_model({2, 2}, 3, 5);
  const auto b = small_model({2, 2}, 3, 5);
  const auto c = small_model({2, 2}, 3, 6);
  CHECK(a.params()[0]->data == b.params()[0]->data);
  CHECK(a.params()[0]->data != c.params()[0]->data);
}
