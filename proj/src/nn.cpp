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

#include "fmcts/nn.hpp"

#include <algorithm>

namespace fmcts::nn {

GumbelSample gumbel_sigmoid_st(double p, double u, double beta) {
  if (!(beta > 0.0)) fail(ErrorCode::kInvalidArgument, "gumbel temperature must be positive");
  if (!(u > 0.0 && u < 1.0)) fail(ErrorCode::kInvalidArgument, "uniform sample must lie in (0,1)");
  if (!std::isfinite(p)) fail(ErrorCode::kNumericFault, "non-finite Bernoulli parameter");
  const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double logit = std::log(pc) - std::log1p(-pc) + std::log(u) - std::log1p(-u);
  const double relaxed = 1.0 / (1.0 + std::exp(-logit / beta));
  GumbelSample s;
  s.relaxed = relaxed;
  s.hard = relaxed > 0.5 ? 1 : 0;
  s.grad_dp = relaxed * (1.0 - relaxed) / (beta * pc * (1.0 - pc));
  return s;
}

}  // namespace fmcts::nn
