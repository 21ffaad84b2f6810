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

#include "fmcts/action_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fmcts/errors.hpp"

namespace fmcts {
namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

void check_distribution(std::span<const double> dist, std::size_t expected,
                        const char* what) {
  if (dist.size() != expected) {
    fail(ErrorCode::kInvalidArgument,
         std::string(what) + ": expected " + std::to_string(expected) +
             " entries, got " + std::to_string(dist.size()));
  }
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      fail(ErrorCode::kInvalidDistribution,
           std::string(what) + ": negative or non-finite probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance) {
    fail(ErrorCode::kInvalidDistribution,
         std::string(what) + ": probabilities sum to " + std::to_string(sum));
  }
}

}  // namespace

FactoredActionSpace::FactoredActionSpace(std::vector<int> cardinalities)
    : cardinalities_(std::move(cardinalities)) {
  if (cardinalities_.empty()) {
    fail(ErrorCode::kInvalidArgument, "action space needs at least one variable");
  }
  offsets_.reserve(cardinalities_.size());
  for (int c : cardinalities_) {
    if (c < 1) {
      fail(ErrorCode::kInvalidArgument,
           "sub-action cardinality must be positive, got " + std::to_string(c));
    }
    if (size_ > std::numeric_limits<std::uint64_t>::max() /
                    static_cast<std::uint64_t>(c)) {
      fail(ErrorCode::kInvalidArgument,
           "joint action space does not fit in a 64-bit count");
    }
    size_ *= static_cast<std::uint64_t>(c);
    offsets_.push_back(encoding_width_);
    encoding_width_ += static_cast<std::size_t>(c);
  }
}

int FactoredActionSpace::max_cardinality() const {
  return *std::max_element(cardinalities_.begin(), cardinalities_.end());
}

std::size_t AbstractionMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
}

std::size_t AbstractActionHash::operator()(
    const AbstractAction& a) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](int v) {
    h ^= std::hash<int>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (int i : a.kept_indices) mix(i);
  mix(-1);
  for (int v : a.kept_values) mix(v);
  return h;
}

void validate(const FactoredActionSpace& space, const FactoredAction& a) {
  if (a.values.size() != space.num_variables()) {
    fail(ErrorCode::kInvalidArgument,
         "action has " + std::to_string(a.values.size()) +
             " sub-actions, space has " +
             std::to_string(space.num_variables()));
  }
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] < 0 || a.values[i] >= space.cardinality(i)) {
      fail(ErrorCode::kInvalidArgument,
           "sub-action " + std::to_string(i) + " out of range: " +
               std::to_string(a.values[i]));
    }
  }
}

void validate(const FactoredActionSpace& space, const AbstractionMask& mask) {
  if (mask.bits.size() != space.num_variables()) {
    fail(ErrorCode::kInvalidArgument,
         "mask has " + std::to_string(mask.bits.size()) +
             " bits, space has " + std::to_string(space.num_variables()));
  }
  if (mask.probs) {
    if (mask.probs->size() != mask.bits.size()) {
      fail(ErrorCode::kInvalidArgument, "mask probabilities length mismatch");
    }
    for (double p : *mask.probs) {
      if (!(p >= 0.0 && p <= 1.0)) {
        fail(ErrorCode::kInvalidArgument, "mask probability outside [0,1]");
      }
    }
  }
}

std::uint64_t joint_index(const FactoredActionSpace& space,
                          const FactoredAction& a) {
  validate(space, a);
  std::uint64_t index = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    index = index * static_cast<std::uint64_t>(space.cardinality(i)) +
            static_cast<std::uint64_t>(a.values[i]);
  }
  return index;
}

FactoredAction joint_action(const FactoredActionSpace& space,
                            std::uint64_t index) {
  require(index < space.size(), "joint action index out of range");
  FactoredAction a{std::vector<int>(space.num_variables())};
  for (std::size_t i = space.num_variables(); i-- > 0;) {
    const auto c = static_cast<std::uint64_t>(space.cardinality(i));
    a.values[i] = static_cast<int>(index % c);
    index /= c;
  }
  return a;
}

std::uint64_t abstract_size(const FactoredActionSpace& space,
                            const AbstractionMask& mask) {
  validate(space, mask);
  std::uint64_t size = 1;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) {
      size = saturating_mul(size, static_cast<std::uint64_t>(space.cardinality(i)));
    }
  }
  return size;
}

AbstractAction project(const FactoredActionSpace& space,
                       const FactoredAction& a, const AbstractionMask& mask) {
  validate(space, a);
  validate(space, mask);
  AbstractAction out;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) {
      out.kept_indices.push_back(static_cast<int>(i));
      out.kept_values.push_back(a.values[i]);
    }
  }
  return out;
}

std::vector<AbstractAction> enumerate_abstract_actions(
    const FactoredActionSpace& space, const AbstractionMask& mask,
    std::size_t branching_cap) {
  const AbstractionView view(space, mask, branching_cap);
  std::vector<AbstractAction> actions;
  actions.reserve(view.size());
  for (std::size_t k = 0; k < view.size(); ++k) {
    actions.push_back(view.action_at(k));
  }
  return actions;
}

std::vector<double> marginalize_prior(const FactoredActionSpace& space,
                                      const AbstractionMask& mask,
                                      std::span<const double> prior) {
  check_distribution(prior, space.size(), "prior");
  const AbstractionView view(space, mask,
                             std::numeric_limits<std::size_t>::max());
  const auto map = view.joint_to_abstract();
  std::vector<double> out(view.size(), 0.0);
  for (std::size_t j = 0; j < map.size(); ++j) out[map[j]] += prior[j];
  return out;
}

std::vector<double> unfold_distribution(const FactoredActionSpace& space,
                                        const AbstractionMask& mask,
                                        std::span<const double> abstract_dist) {
  const AbstractionView view(space, mask,
                             std::numeric_limits<std::size_t>::max());
  check_distribution(abstract_dist, view.size(), "abstract distribution");
  const double uniform = 1.0 / static_cast<double>(view.fold());
  const auto map = view.joint_to_abstract();
  std::vector<double> out(map.size());
  for (std::size_t j = 0; j < map.size(); ++j) {
    out[j] = abstract_dist[map[j]] * uniform;
  }
  return out;
}

std::vector<float> encode_action_masked(const FactoredActionSpace& space,
                                        const FactoredAction& a,
                                        const AbstractionMask& mask) {
  validate(space, a);
  validate(space, mask);
  std::vector<float> enc(space.encoding_width(), 0.0f);
  for (std::size_t i = 0; i < space.num_variables(); ++i) {
    if (mask.bits[i]) {
      enc[space.block_offset(i) + static_cast<std::size_t>(a.values[i])] = 1.0f;
    }
  }
  return enc;
}

AbstractionView::AbstractionView(const FactoredActionSpace& space,
                                 AbstractionMask mask,
                                 std::size_t branching_cap)
    : space_(space), mask_(std::move(mask)) {
  const std::uint64_t size = abstract_size(space_, mask_);
  if (size > branching_cap) throw BranchingCapError(size, branching_cap);
  size_ = static_cast<std::size_t>(size);
  for (std::size_t i = 0; i < mask_.bits.size(); ++i) {
    if (mask_.bits[i]) {
      kept_.push_back(static_cast<int>(i));
    } else {
      dropped_.push_back(static_cast<int>(i));
      fold_ *= static_cast<std::uint64_t>(space_.cardinality(i));
    }
  }
  strides_.assign(kept_.size(), 1);
  for (std::size_t k = kept_.size(); k-- > 1;) {
    strides_[k - 1] = strides_[k] * static_cast<std::size_t>(
                                        space_.cardinality(kept_[k]));
  }
}

std::size_t AbstractionView::index_of(const FactoredAction& a) const {
  std::size_t index = 0;
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    index += strides_[k] * static_cast<std::size_t>(a.values[kept_[k]]);
  }
  return index;
}

std::size_t AbstractionView::index_of(const AbstractAction& a) const {
  if (a.kept_indices != kept_) {
    fail(ErrorCode::kInvalidArgument,
         "abstract action does not belong to this abstraction");
  }
  std::size_t index = 0;
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    const int v = a.kept_values[k];
    if (v < 0 || v >= space_.cardinality(kept_[k])) {
      fail(ErrorCode::kInvalidArgument, "abstract action value out of range");
    }
    index += strides_[k] * static_cast<std::size_t>(v);
  }
  return index;
}

AbstractAction AbstractionView::action_at(std::size_t index) const {
  require(index < size_, "abstract action index out of range");
  AbstractAction a;
  a.kept_indices = kept_;
  a.kept_values.resize(kept_.size());
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    a.kept_values[k] = static_cast<int>(index / strides_[k]);
    index %= strides_[k];
  }
  return a;
}

std::vector<std::size_t> AbstractionView::joint_to_abstract() const {
  const auto n = space_.num_variables();
  std::vector<std::size_t> stride_of(n, 0);
  for (std::size_t k = 0; k < kept_.size(); ++k) stride_of[kept_[k]] = strides_[k];
  std::vector<std::size_t> map(static_cast<std::size_t>(space_.size()));
  std::vector<int> digits(n, 0);
  std::size_t abstract = 0;
  for (std::size_t j = 0; j < map.size(); ++j) {
    map[j] = abstract;
    // Odometer increment, last variable fastest.
    for (std::size_t i = n; i-- > 0;) {
      if (++digits[i] < space_.cardinality(i)) {
        abstract += stride_of[i];
        break;
      }
      abstract -= stride_of[i] * static_cast<std::size_t>(digits[i] - 1);
      digits[i] = 0;
    }
  }
  return map;
}

FactoredAction AbstractionView::complete(std::size_t index, int filler) const {
  require(index < size_, "abstract action index out of range");
  FactoredAction a{std::vector<int>(space_.num_variables(), filler)};
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    a.values[kept_[k]] = static_cast<int>(index / strides_[k]);
    index %= strides_[k];
  }
  return a;
}

std::vector<float> AbstractionView::encode(std::size_t index) const {
  require(index < size_, "abstract action index out of range");
  std::vector<float> enc(space_.encoding_width(), 0.0f);
  for (std::size_t k = 0; k < kept_.size(); ++k) {
    const auto value = index / strides_[k];
    index %= strides_[k];
    enc[space_.block_offset(kept_[k]) + value] = 1.0f;
  }
  return enc;
}

}  // namespace fmcts
