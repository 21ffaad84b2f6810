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

// Algebra of factored action spaces A = A^1 x ... x A^n.
//
// Joint actions are addressed by a mixed-radix index with variable 0 as the
// most significant digit. A mask selects the variables that are relevant in a
// given state; projecting a joint action onto the kept variables yields an
// abstract action. Abstract actions of one mask are enumerated in the same
// lexicographic order, so an abstract action also has a dense index.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace fmcts {

inline constexpr std::size_t kDefaultBranchingCap = 4096;
inline constexpr double kDistributionTolerance = 1e-9;

class FactoredActionSpace {
 public:
  explicit FactoredActionSpace(std::vector<int> cardinalities);

  std::size_t num_variables() const { return cardinalities_.size(); }
  int cardinality(std::size_t i) const { return cardinalities_[i]; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }
  std::uint64_t size() const { return size_; }
  int max_cardinality() const;
  // Width of the concatenated one-hot encoding.
  std::size_t encoding_width() const { return encoding_width_; }
  std::size_t block_offset(std::size_t i) const { return offsets_[i]; }

  bool operator==(const FactoredActionSpace& other) const {
    return cardinalities_ == other.cardinalities_;
  }

 private:
  std::vector<int> cardinalities_;
  std::vector<std::size_t> offsets_;
  std::uint64_t size_ = 1;
  std::size_t encoding_width_ = 0;
};

struct FactoredAction {
  std::vector<int> values;

  bool operator==(const FactoredAction&) const = default;
};

struct AbstractionMask {
  std::vector<bool> bits;
  // Bernoulli parameters that produced the bits, when known.
  std::optional<std::vector<double>> probs;

  static AbstractionMask all_ones(std::size_t n) {
    return {std::vector<bool>(n, true), std::nullopt};
  }
  static AbstractionMask all_zeros(std::size_t n) {
    return {std::vector<bool>(n, false), std::nullopt};
  }

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  bool all() const { return count() == bits.size(); }
};

// Canonical form: strictly increasing kept_indices and aligned kept_values.
struct AbstractAction {
  std::vector<int> kept_indices;
  std::vector<int> kept_values;

  bool operator==(const AbstractAction&) const = default;
};

struct AbstractActionHash {
  std::size_t operator()(const AbstractAction& a) const noexcept;
};

void validate(const FactoredActionSpace& space, const FactoredAction& a);
void validate(const FactoredActionSpace& space, const AbstractionMask& mask);

std::uint64_t joint_index(const FactoredActionSpace& space,
                          const FactoredAction& a);
FactoredAction joint_action(const FactoredActionSpace& space,
                            std::uint64_t index);

// Product of the cardinalities of the kept variables; saturates at
// UINT64_MAX rather than overflowing.
std::uint64_t abstract_size(const FactoredActionSpace& space,
                            const AbstractionMask& mask);

AbstractAction project(const FactoredActionSpace& space,
                       const FactoredAction& a, const AbstractionMask& mask);

std::vector<AbstractAction> enumerate_abstract_actions(
    const FactoredActionSpace& space, const AbstractionMask& mask,
    std::size_t branching_cap = kDefaultBranchingCap);

// Probability vectors over joint actions are indexed by joint_index().
// Abstract distributions follow enumerate_abstract_actions() order.
std::vector<double> marginalize_prior(const FactoredActionSpace& space,
                                      const AbstractionMask& mask,
                                      std::span<const double> prior);

std::vector<double> unfold_distribution(const FactoredActionSpace& space,
                                        const AbstractionMask& mask,
                                        std::span<const double> abstract_dist);

std::vector<float> encode_action_masked(const FactoredActionSpace& space,
                                        const FactoredAction& a,
                                        const AbstractionMask& mask);

// Precomputed view of one (space, mask) pair: maps joint and abstract
// actions to dense abstract indices. Used on the hot paths of the search.
class AbstractionView {
 public:
  AbstractionView(const FactoredActionSpace& space, AbstractionMask mask,
                  std::size_t branching_cap = kDefaultBranchingCap);

  const FactoredActionSpace& space() const { return space_; }
  const AbstractionMask& mask() const { return mask_; }
  std::size_t size() const { return size_; }
  const std::vector<int>& kept() const { return kept_; }
  const std::vector<int>& dropped() const { return dropped_; }

  std::size_t index_of(const FactoredAction& a) const;
  std::size_t index_of(const AbstractAction& a) const;
  AbstractAction action_at(std::size_t index) const;
  // Abstract index of every joint action, in joint_index() order.
  std::vector<std::size_t> joint_to_abstract() const;
  // Joint action with the kept variables of `index` and `filler` elsewhere.
  FactoredAction complete(std::size_t index, int filler = 0) const;
  // One-hot encoding of abstract action `index`; dropped blocks are zero.
  std::vector<float> encode(std::size_t index) const;
  // Number of joint actions folded into each abstract action.
  std::uint64_t fold() const { return fold_; }

 private:
  FactoredActionSpace space_;
  AbstractionMask mask_;
  std::vector<int> kept_;
  std::vector<int> dropped_;
  std::vector<std::size_t> strides_;  // abstract-index stride per kept var
  std::size_t size_ = 1;
  std::uint64_t fold_ = 1;
};

}  // namespace fmcts
