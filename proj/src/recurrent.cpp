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

#include "qdet/recurrent.hpp"

#include <cmath>

namespace qdet {

namespace {

Tensor uniform_tensor(std::vector<int64_t> shape, RandomStream& rng, double range) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

// Orthogonalizes a square gaussian matrix by modified Gram-Schmidt.
Tensor orthogonal_tensor(int64_t n, RandomStream& rng) {
  Tensor q({n, n});
  for (int64_t i = 0; i < q.size(); ++i) q[i] = rng.normal();
  for (int64_t c = 0; c < n; ++c) {
    for (int64_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (int64_t r = 0; r < n; ++r) dot += q.at(r, c) * q.at(r, p);
      for (int64_t r = 0; r < n; ++r) q.at(r, c) -= dot * q.at(r, p);
    }
    double norm = 0.0;
    for (int64_t r = 0; r < n; ++r) norm += q.at(r, c) * q.at(r, c);
    norm = std::sqrt(norm);
    for (int64_t r = 0; r < n; ++r) q.at(r, c) /= norm;
  }
  return q;
}

Tensor recurrent_init(int64_t h, RandomStream& rng, bool orthogonal) {
  return orthogonal ? orthogonal_tensor(h, rng) : uniform_tensor({h, h}, rng, kWeightInitRange);
}

ad::Var affine(const ad::Var& x, const ad::Parameter& w, const ad::Var& s,
               const ad::Parameter& u, const ad::Parameter& b) {
  return ad::add(ad::add(ad::matmul(x, w.var), ad::matmul(s, u.var)), b.var);
}

}  // namespace

GruCell GruCell::create(const std::string& prefix, int64_t input, int64_t hidden,
                        RandomStream& rng, bool orthogonal_recurrent) {
  GruCell c;
  c.input = input;
  c.hidden = hidden;
  auto w = [&](const char* name) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(uniform_tensor({input, hidden}, rng, kWeightInitRange))};
  };
  auto u = [&](const char* name) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(recurrent_init(hidden, rng, orthogonal_recurrent))};
  };
  auto b = [&](const char* name) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(Tensor::zeros({hidden}))};
  };
  c.Wr = w("W_r"); c.Ur = u("U_r"); c.br = b("b_r");
  c.Wu = w("W_u"); c.Uu = u("U_u"); c.bu = b("b_u");
  c.Wc = w("W_c"); c.Uc = u("U_c"); c.bc = b("b_c");
  return c;
}

ad::Var GruCell::step(const ad::Var& x, const ad::Var& s_prev) const {
  ad::Var r = ad::sigmoid(affine(x, Wr, s_prev, Ur, br));
  ad::Var u = ad::sigmoid(affine(x, Wu, s_prev, Uu, bu));
  ad::Var cand = ad::tanh_act(
      ad::add(ad::add(ad::matmul(x, Wc.var), ad::matmul(ad::mul(r, s_prev), Uc.var)), bc.var));
  ad::Var one_minus_u = ad::sub(ad::Var::constant(Tensor::full(u.value().shape(), 1.0)), u);
  return ad::add(ad::mul(one_minus_u, s_prev), ad::mul(u, cand));
}

std::vector<ad::Parameter> GruCell::parameters() const {
  return {Wr, Ur, br, Wu, Uu, bu, Wc, Uc, bc};
}

LstmCell LstmCell::create(const std::string& prefix, int64_t input, int64_t hidden,
                          RandomStream& rng, bool orthogonal_recurrent) {
  LstmCell c;
  c.input = input;
  c.hidden = hidden;
  auto w = [&](const char* name) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(uniform_tensor({input, hidden}, rng, kWeightInitRange))};
  };
  auto u = [&](const char* name) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(recurrent_init(hidden, rng, orthogonal_recurrent))};
  };
  auto b = [&](const char* name, double init) {
    return ad::Parameter{prefix + "." + name, ad::Var::leaf(Tensor::full({hidden}, init))};
  };
  c.Wi = w("W_i"); c.Ui = u("U_i"); c.bi = b("b_i", 0.0);
  c.Wf = w("W_f"); c.Uf = u("U_f"); c.bf = b("b_f", 1.0);
  c.Wo = w("W_o"); c.Uo = u("U_o"); c.bo = b("b_o", 0.0);
  c.Wg = w("W_g"); c.Ug = u("U_g"); c.bg = b("b_g", 0.0);
  return c;
}

LstmCell::State LstmCell::step(const ad::Var& x, const State& prev) const {
  ad::Var i = ad::sigmoid(affine(x, Wi, prev.h, Ui, bi));
  ad::Var f = ad::sigmoid(affine(x, Wf, prev.h, Uf, bf));
  ad::Var o = ad::sigmoid(affine(x, Wo, prev.h, Uo, bo));
  ad::Var g = ad::tanh_act(affine(x, Wg, prev.h, Ug, bg));
  ad::Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  ad::Var h = ad::mul(o, ad::tanh_act(c));
  return {h, c};
}

std::vector<ad::Parameter> LstmCell::parameters() const {
  return {Wi, Ui, bi, Wf, Uf, bf, Wo, Uo, bo, Wg, Ug, bg};
}

RecurrentCell RecurrentCell::create(CellType type, const std::string& prefix, int64_t input,
                                    int64_t hidden, RandomStream& rng, bool orthogonal_recurrent) {
  RecurrentCell rc;
  if (type == CellType::kGru) {
    rc.cell = GruCell::create(prefix, input, hidden, rng, orthogonal_recurrent);
  } else {
    rc.cell = LstmCell::create(prefix, input, hidden, rng, orthogonal_recurrent);
  }
  return rc;
}

int64_t RecurrentCell::hidden() const {
  return std::visit([](const auto& c) { return c.hidden; }, cell);
}

int64_t RecurrentCell::input() const {
  return std::visit([](const auto& c) { return c.input; }, cell);
}

std::vector<ad::Parameter> RecurrentCell::parameters() const {
  return std::visit([](const auto& c) { return c.parameters(); }, cell);
}

namespace {

// Validity column for global position t: 1 where t < len_b.
Tensor valid_col(const std::vector<int>& lengths, int t) {
  Tensor m({static_cast<int64_t>(lengths.size())});
  for (size_t b = 0; b < lengths.size(); ++b) m[static_cast<int64_t>(b)] = t < lengths[b] ? 1.0 : 0.0;
  return m;
}

Tensor invert_col(const Tensor& m) {
  Tensor inv(m.shape());
  for (int64_t i = 0; i < m.size(); ++i) inv[i] = 1.0 - m[i];
  return inv;
}

// new_state where valid, carried state elsewhere.
ad::Var masked_select(const ad::Var& fresh, const ad::Var& carried, const Tensor& valid) {
  ad::Var keep = ad::scale_rows(fresh, ad::Var::constant(valid));
  ad::Var carry = ad::scale_rows(carried, ad::Var::constant(invert_col(valid)));
  return ad::add(keep, carry);
}

}  // namespace

StepSequence rnn_forward(const RecurrentCell& cell, const StepSequence& inputs, Direction dir) {
  const int t_count = inputs.max_steps();
  const int64_t n = inputs.batch();
  if (static_cast<int64_t>(inputs.lengths.size()) != n) {
    throw ContractError("rnn_forward: lengths/batch mismatch");
  }
  check_prefix_lengths(inputs.lengths, t_count);
  if (inputs.dim() != cell.input()) {
    throw DimensionError("rnn_forward: input dim " + std::to_string(inputs.dim()) +
                         " != cell input " + std::to_string(cell.input()));
  }

  StepSequence out;
  out.lengths = inputs.lengths;
  out.steps.resize(static_cast<size_t>(t_count));

  const int64_t h = cell.hidden();
  ad::Var zero_state = ad::Var::constant(Tensor::zeros({n, h}));

  auto run = [&](auto& c) {
    using CellT = std::decay_t<decltype(c)>;
    if constexpr (std::is_same_v<CellT, GruCell>) {
      ad::Var state = zero_state;
      for (int k = 0; k < t_count; ++k) {
        const int t = dir == Direction::kForward ? k : t_count - 1 - k;
        const Tensor valid = valid_col(inputs.lengths, t);
        ad::Var fresh = c.step(inputs.steps[static_cast<size_t>(t)], state);
        state = masked_select(fresh, state, valid);
        out.steps[static_cast<size_t>(t)] = state;
      }
    } else {
      LstmCell::State state{zero_state, zero_state};
      for (int k = 0; k < t_count; ++k) {
        const int t = dir == Direction::kForward ? k : t_count - 1 - k;
        const Tensor valid = valid_col(inputs.lengths, t);
        LstmCell::State fresh = c.step(inputs.steps[static_cast<size_t>(t)], state);
        state.h = masked_select(fresh.h, state.h, valid);
        state.c = masked_select(fresh.c, state.c, valid);
        out.steps[static_cast<size_t>(t)] = state.h;
      }
    }
  };
  std::visit(run, cell.cell);
  return out;
}

BiRnn BiRnn::create(CellType type, const std::string& prefix, int64_t input, int64_t hidden,
                    RandomStream& rng, bool orthogonal_recurrent) {
  BiRnn net;
  net.fwd = RecurrentCell::create(type, prefix + ".fwd", input, hidden, rng, orthogonal_recurrent);
  net.bwd = RecurrentCell::create(type, prefix + ".bwd", input, hidden, rng, orthogonal_recurrent);
  return net;
}

std::vector<ad::Parameter> BiRnn::parameters() const {
  std::vector<ad::Parameter> out = fwd.parameters();
  std::vector<ad::Parameter> b = bwd.parameters();
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

StepSequence birnn_forward(const BiRnn& net, const StepSequence& inputs) {
  StepSequence f = rnn_forward(net.fwd, inputs, Direction::kForward);
  StepSequence b = rnn_forward(net.bwd, inputs, Direction::kBackward);
  StepSequence out;
  out.lengths = inputs.lengths;
  out.steps.reserve(f.steps.size());
  for (size_t t = 0; t < f.steps.size(); ++t) {
    out.steps.push_back(ad::concat({f.steps[t], b.steps[t]}, 1));
  }
  return out;
}

}  // namespace qdet
