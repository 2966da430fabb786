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

#ifndef QDET_SEQUENCE_HPP_
#define QDET_SEQUENCE_HPP_

#include <vector>

#include "qdet/autodiff.hpp"

namespace qdet {

// A padded batch of per-timestep activations: steps[t] is [batch x dim],
// lengths give each example's valid prefix. Valid steps always form a
// contiguous prefix.
struct StepSequence {
  std::vector<ad::Var> steps;
  std::vector<int> lengths;

  int64_t batch() const { return steps.empty() ? 0 : steps[0].value().dim(0); }
  int64_t dim() const { return steps.empty() ? 0 : steps[0].value().dim(1); }
  int max_steps() const { return static_cast<int>(steps.size()); }

  // {0,1} validity matrix [batch x T].
  Tensor mask() const {
    Tensor m({batch(), static_cast<int64_t>(max_steps())});
    for (int64_t b = 0; b < batch(); ++b) {
      for (int t = 0; t < max_steps(); ++t) {
        m.at(b, t) = t < lengths[static_cast<size_t>(b)] ? 1.0 : 0.0;
      }
    }
    return m;
  }
};

inline void check_prefix_lengths(const std::vector<int>& lengths, int max_steps) {
  for (int len : lengths) {
    if (len < 0 || len > max_steps) {
      throw ContractError("sequence length " + std::to_string(len) + " outside [0, " +
                          std::to_string(max_steps) + "]");
    }
  }
}

}  // namespace qdet

#endif  // QDET_SEQUENCE_HPP_
