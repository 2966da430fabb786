// Copyright 2026 The qdet Authors.
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

#ifndef QDET_CONTEXT_HPP_
#define QDET_CONTEXT_HPP_

#include <optional>
#include <string>

#include "qdet/layers.hpp"
#include "qdet/sequence.hpp"

namespace qdet {

// Additive (single tanh layer) attention scorer with a learned projection.
// The conditioning matrix U_a is present only for the conditioned variant,
// where the score of every timestep also sees a per-example context vector.
struct AttentionScorer {
  ad::Parameter W_a;                 // [dim x A]
  std::optional<ad::Parameter> U_a;  // [cond_dim x A]
  ad::Parameter v_a;                 // [A x 1]
  ad::Parameter b_a;                 // [A]
  int64_t width = 0;

  static AttentionScorer create(const std::string& prefix, int64_t dim, int64_t attn_width,
                                std::optional<int64_t> cond_dim, RandomStream& rng);

  bool conditioned() const { return U_a.has_value(); }
  std::vector<ad::Parameter> parameters() const;
};

// Result of reducing a sequence to one vector per example. alphas is
// defined only for the attention path.
struct ContextOutput {
  ad::Var context;  // [batch x dim]
  ad::Var alphas;   // [batch x T], undefined for the last-state path
};

// c(z) = z at each example's last valid timestep.
ContextOutput context_last(const StepSequence& z);

// c(z) = sum_t alpha_t z_t with alpha from the additive scorer; condition
// must be present exactly when the scorer is conditioned.
ContextOutput context_attention(const StepSequence& z, const AttentionScorer& scorer,
                                const std::optional<ad::Var>& condition);

}  // namespace qdet

#endif  // QDET_CONTEXT_HPP_
