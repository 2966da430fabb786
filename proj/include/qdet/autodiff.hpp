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

#ifndef QDET_AUTODIFF_HPP_
#define QDET_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qdet/tensor.hpp"

namespace qdet::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph. `grad` persists across backward
// calls and accumulates until explicitly zeroed; `tmp` is the per-backward
// scratch contribution.
struct Node {
  Tensor value;
  Tensor grad;
  Tensor tmp;
  bool tmp_live = false;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;

  // Scratch gradient buffer, zero-initialized on first touch per backward.
  Tensor& grad_buf();
  // Persistent gradient, materialized on demand.
  Tensor& grad_ref();
};

// Value-semantics handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Tensor v);
  static Var leaf(Tensor v);  // requires_grad = true

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad_ref(); }
  Tensor& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }

  void zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.zero();
  }

 private:
  NodePtr node_;
};

// Named trainable leaf.
struct Parameter {
  std::string name;
  Var var;
};

// ---- differentiable operations ----

Var matmul(const Var& a, const Var& b);

// Binary elementwise ops accept equal shapes, or a trailing-dimension
// vector on the right broadcast over the leading rows (the bias case).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var sigmoid(const Var& x);
Var tanh_act(const Var& x);
Var relu(const Var& x);

// Row-wise masked softmax; mask is a constant {0,1} tensor of the same
// shape. Masked entries are exactly 0; every row needs at least one 1.
Var softmax_masked(const Var& scores, const Tensor& mask);

Var concat(const std::vector<Var>& xs, int axis);

// Columns [j0, j1) of a 2-d tensor.
Var slice_cols(const Var& x, int64_t j0, int64_t j1);

// y[i,j] = x[i,j] * s[i]; s has shape [n] or [n x 1].
Var scale_rows(const Var& x, const Var& s);

// Row gather from a [V x d] table. Ids must lie in [0, V); gradient is
// scattered into the referenced rows only. With skip_row0_grad, row 0
// (the padding row) never receives gradient.
Var gather_rows(const Var& table, const std::vector<int>& ids, bool skip_row0_grad);

// out[b, :] = steps[lengths[b] - 1].value[b, :]. Every length >= 1.
Var gather_last_step(const std::vector<Var>& steps, const std::vector<int>& lengths);

// out = sum_t alphas[:, t] * steps[t]; alphas is [n x T].
Var weighted_sum_steps(const std::vector<Var>& steps, const Var& alphas);

// Packs the valid rows of a step list into one [m x d] matrix, ordered by
// timestep then batch row. Used for statistics over batch and valid steps.
struct PackedRows {
  Var packed;
  // flat (t * n + b) -> packed row, -1 where padded
  std::vector<int64_t> row_of;
  int64_t rows = 0;
};
PackedRows pack_valid_rows(const std::vector<Var>& steps, const std::vector<int>& lengths);

// Inverse of pack_valid_rows for one timestep: rebuilds the [n x d] step
// tensor (zero rows at padded positions).
Var unpack_step(const Var& packed, const PackedRows& map, int t, int64_t n);

// Same data, new shape (element count must match).
Var reshape(const Var& x, std::vector<int64_t> shape);

Var sum_all(const Var& x);
Var sum_squares(const Var& x);

// Mean negative log-likelihood of Bernoulli labels given probabilities in
// (0,1), and the stable logit-space variant used by training.
Var bce_loss(const Var& scores, const Tensor& labels);
Var bce_with_logits(const Var& logits, const Tensor& labels);

// Batch normalization core (training statistics path). mu/var must be the
// biased column statistics of x.value(); the backward covers their
// dependence on x.
Var batchnorm_train(const Var& x, const Var& gamma, const Var& beta,
                    const Tensor& mu, const Tensor& var, double eps);

// Reverse pass from a scalar loss. Gradients of multiply-used nodes are
// summed; repeated calls without zeroing accumulate.
void backward(const Var& loss);

void zero_grads(const std::vector<Parameter>& params);

}  // namespace qdet::ad

#endif  // QDET_AUTODIFF_HPP_
