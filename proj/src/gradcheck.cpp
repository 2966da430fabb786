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

#include "qdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "qdet/rng.hpp"

namespace qdet::ad {

std::string GradCheckReport::worst_name() const {
  std::string name;
  double worst = -1.0;
  for (const auto& e : entries) {
    if (e.max_rel_err > worst) {
      worst = e.max_rel_err;
      name = e.name;
    }
  }
  return name;
}

GradCheckReport grad_check(const std::function<Var()>& build_loss,
                           const std::vector<Parameter>& params,
                           const GradCheckOptions& opts) {
  GradCheckReport report;
  zero_grads(params);
  Var loss = build_loss();
  backward(loss);

  // Snapshot analytic gradients before probing mutates values.
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter& p : params) analytic.push_back(p.var.grad());

  RandomStream sampler(opts.sample_seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    const Parameter& p = params[pi];
    Tensor& value = p.var.node()->value;
    const int64_t total = value.size();

    std::vector<int64_t> idx;
    if (total <= opts.max_elems_per_param) {
      idx.resize(static_cast<size_t>(total));
      for (int64_t i = 0; i < total; ++i) idx[static_cast<size_t>(i)] = i;
    } else {
      for (int64_t i = 0; i < opts.max_elems_per_param; ++i) {
        idx.push_back(sampler.uniform_int(total));
      }
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }

    GradCheckEntry entry;
    entry.name = p.name;
    for (int64_t i : idx) {
      const double saved = value[i];
      value[i] = saved + opts.eps;
      const double lp = build_loss().value()[0];
      value[i] = saved - opts.eps;
      const double lm = build_loss().value()[0];
      value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * opts.eps);
      const double exact = analytic[pi][i];
      if (!std::isfinite(numeric) || !std::isfinite(exact)) {
        throw ContractError("grad_check: non-finite gradient for parameter " + p.name);
      }
      const double rel = std::abs(exact - numeric) /
                         std::max({std::abs(exact), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace qdet::ad
