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

#include "qdet/context.hpp"

namespace qdet {

namespace {

Tensor uniform_tensor(std::vector<int64_t> shape, RandomStream& rng, double range) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

}  // namespace

AttentionScorer AttentionScorer::create(const std::string& prefix, int64_t dim, int64_t attn_width,
                                        std::optional<int64_t> cond_dim, RandomStream& rng) {
  AttentionScorer s;
  s.width = attn_width;
  s.W_a = {prefix + ".W_a", ad::Var::leaf(uniform_tensor({dim, attn_width}, rng, kWeightInitRange))};
  if (cond_dim.has_value()) {
    s.U_a = ad::Parameter{prefix + ".U_a",
                          ad::Var::leaf(uniform_tensor({*cond_dim, attn_width}, rng, kWeightInitRange))};
  }
  s.v_a = {prefix + ".v_a", ad::Var::leaf(uniform_tensor({attn_width, 1}, rng, kWeightInitRange))};
  s.b_a = {prefix + ".b_a", ad::Var::leaf(Tensor::zeros({attn_width}))};
  return s;
}

std::vector<ad::Parameter> AttentionScorer::parameters() const {
  std::vector<ad::Parameter> out = {W_a, v_a, b_a};
  if (U_a.has_value()) out.insert(out.begin() + 1, *U_a);
  return out;
}

ContextOutput context_last(const StepSequence& z) {
  for (int len : z.lengths) {
    if (len < 1) throw ContractError("context_last: zero-length example");
  }
  check_prefix_lengths(z.lengths, z.max_steps());
  ContextOutput out;
  out.context = ad::gather_last_step(z.steps, z.lengths);
  return out;
}

ContextOutput context_attention(const StepSequence& z, const AttentionScorer& scorer,
                                const std::optional<ad::Var>& condition) {
  if (scorer.conditioned() != condition.has_value()) {
    throw ConfigError(scorer.conditioned()
                          ? "context_attention: conditioned scorer needs a condition vector"
                          : "context_attention: condition given to an unconditioned scorer");
  }
  for (int len : z.lengths) {
    if (len < 1) throw ContractError("context_attention: zero-length example");
  }
  check_prefix_lengths(z.lengths, z.max_steps());

  std::optional<ad::Var> cond_proj;
  if (condition.has_value()) {
    cond_proj = ad::matmul(*condition, scorer.U_a->var);  // [n x A]
  }

  // e_t = v_a^T tanh(z_t W_a (+ cond U_a) + b_a), one column per timestep.
  std::vector<ad::Var> score_cols;
  score_cols.reserve(z.steps.size());
  for (const ad::Var& zt : z.steps) {
    ad::Var pre = ad::add(ad::matmul(zt, scorer.W_a.var), scorer.b_a.var);
    if (cond_proj.has_value()) pre = ad::add(pre, *cond_proj);
    score_cols.push_back(ad::matmul(ad::tanh_act(pre), scorer.v_a.var));  // [n x 1]
  }
  ad::Var scores = ad::concat(score_cols, 1);  // [n x T]

  ContextOutput out;
  out.alphas = ad::softmax_masked(scores, z.mask());
  out.context = ad::weighted_sum_steps(z.steps, out.alphas);
  return out;
}

}  // namespace qdet
