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

#ifndef QDET_GRADCHECK_HPP_
#define QDET_GRADCHECK_HPP_

#include <functional>
#include <string>
#include <vector>

#include "qdet/autodiff.hpp"

namespace qdet::ad {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int64_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool pass(double tol) const { return max_rel_err <= tol; }
  std::string worst_name() const;
};

struct GradCheckOptions {
  double eps = 1e-5;
  // Parameters larger than this get a deterministic element sample.
  int64_t max_elems_per_param = 24;
  uint64_t sample_seed = 12345;
};

// Compares analytic gradients against central finite differences of a
// deterministic loss builder. The builder is re-invoked per probe, so any
// stochastic pieces (dropout masks) must be frozen by the caller.
GradCheckReport grad_check(const std::function<Var()>& build_loss,
                           const std::vector<Parameter>& params,
                           const GradCheckOptions& opts = {});

}  // namespace qdet::ad

#endif  // QDET_GRADCHECK_HPP_
