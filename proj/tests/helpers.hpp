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

#ifndef QDET_TESTS_HELPERS_HPP_
#define QDET_TESTS_HELPERS_HPP_

#include <cmath>
#include <functional>
#include <string>

#include "qdet/autodiff.hpp"
#include "qdet/rng.hpp"

namespace qdet::testing {

inline Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  RandomStream rng(seed);
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline ad::Parameter make_param(const std::string& name, Tensor t) {
  return {name, ad::Var::leaf(std::move(t))};
}

struct FdResult {
  std::string name;
  double rel = 0.0;
  double abs_diff = 0.0;
  bool pass(double tol) const { return rel < tol || abs_diff < 1e-7; }
};

// Norm-relative central-difference comparison per parameter.
inline std::vector<FdResult> fd_compare(const std::function<ad::Var()>& loss,
                                        const std::vector<ad::Parameter>& params,
                                        double eps = 1e-5) {
  ad::zero_grads(params);
  ad::backward(loss());
  std::vector<FdResult> out;
  for (const ad::Parameter& p : params) {
    const Tensor analytic = p.var.grad();
    Tensor& value = p.var.node()->value;
    double diff_sq = 0.0, norm_sq = 0.0;
    for (int64_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + eps;
      const double lp = loss().value()[0];
      value[i] = saved - eps;
      const double lm = loss().value()[0];
      value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      diff_sq += (analytic[i] - numeric) * (analytic[i] - numeric);
      norm_sq += std::max(analytic[i] * analytic[i], numeric * numeric);
    }
    out.push_back({p.name, std::sqrt(diff_sq) / std::max(std::sqrt(norm_sq), 1e-8),
                   std::sqrt(diff_sq)});
  }
  return out;
}

}  // namespace qdet::testing

#endif  // QDET_TESTS_HELPERS_HPP_
