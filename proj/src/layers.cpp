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

#include "qdet/layers.hpp"

#include <cmath>

namespace qdet {

namespace {

Tensor uniform_tensor(std::vector<int64_t> shape, RandomStream& rng, double range) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
  return t;
}

}  // namespace

DenseLayer DenseLayer::create(const std::string& prefix, int64_t in, int64_t out,
                              Activation act, RandomStream& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.activation = act;
  layer.W = {prefix + ".W", ad::Var::leaf(uniform_tensor({in, out}, rng, kWeightInitRange))};
  layer.b = {prefix + ".b", ad::Var::leaf(Tensor::zeros({out}))};
  return layer;
}

ad::Var DenseLayer::forward(const ad::Var& x) const {
  ad::Var y = ad::add(ad::matmul(x, W.var), b.var);
  return activation == Activation::kRelu ? ad::relu(y) : y;
}

EmbeddingTable EmbeddingTable::create(const std::string& prefix, int64_t vocab, int64_t dim,
                                      RandomStream& rng) {
  EmbeddingTable table;
  table.vocab_size = vocab;
  table.dim = dim;
  Tensor e = uniform_tensor({vocab, dim}, rng, kWeightInitRange);
  for (int64_t j = 0; j < dim; ++j) e.at(0, j) = 0.0;  // padding row
  table.E = {prefix + ".E", ad::Var::leaf(std::move(e))};
  return table;
}

ad::Var EmbeddingTable::lookup(const std::vector<int>& ids) const {
  return ad::gather_rows(E.var, ids, /*skip_row0_grad=*/true);
}

void DropoutLayer::begin_forward() {
  if (frozen_) rng_.seed(seed_);
}

ad::Var DropoutLayer::apply(const ad::Var& x, Mode mode) {
  if (mode == Mode::kInfer || rate_ == 0.0) return x;
  const double keep = 1.0 - rate_;
  Tensor mask(x.value().shape());
  for (int64_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng_.uniform01() < rate_ ? 0.0 : 1.0 / keep;
  }
  return ad::mul(x, ad::Var::constant(std::move(mask)));
}

BatchNormLayer BatchNormLayer::create(const std::string& prefix, int64_t dim, RandomStream&) {
  BatchNormLayer layer;
  layer.dim_ = dim;
  layer.gamma_ = {prefix + ".gamma", ad::Var::leaf(Tensor::full({dim}, 1.0))};
  layer.beta_ = {prefix + ".beta", ad::Var::leaf(Tensor::zeros({dim}))};
  layer.running_mean_ = Tensor::zeros({dim});
  layer.running_var_ = Tensor::full({dim}, 1.0);
  return layer;
}

ad::Var BatchNormLayer::normalize(const ad::Var& packed, Mode mode) {
  const Tensor& xv = packed.value();
  const int64_t m = xv.dim(0), d = xv.dim(1);
  if (d != dim_) {
    throw DimensionError("batchnorm: input width " + std::to_string(d) + " != layer width " +
                         std::to_string(dim_));
  }
  if (mode == Mode::kInfer) {
    // (x - running_mean) * gamma / sqrt(running_var + eps) + beta
    Tensor scale({d}), shift({d});
    for (int64_t j = 0; j < d; ++j) {
      scale[j] = 1.0 / std::sqrt(running_var_[j] + eps_);
      shift[j] = -running_mean_[j] * scale[j];
    }
    ad::Var xs = ad::add(ad::mul(packed, ad::Var::constant(std::move(scale))),
                         ad::Var::constant(std::move(shift)));
    return ad::add(ad::mul(xs, gamma_.var), beta_.var);
  }
  if (m < 2) throw ContractError("batchnorm: train mode requires n >= 2, got " + std::to_string(m));
  Tensor mu({d}), var({d});
  for (int64_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += xv.at(i, j);
    mu[j] = s / static_cast<double>(m);
  }
  for (int64_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      const double c = xv.at(i, j) - mu[j];
      s += c * c;
    }
    var[j] = s / static_cast<double>(m);  // biased
  }
  for (int64_t j = 0; j < d; ++j) {
    running_mean_[j] = (1.0 - momentum_) * running_mean_[j] + momentum_ * mu[j];
    running_var_[j] = (1.0 - momentum_) * running_var_[j] + momentum_ * var[j];
  }
  return ad::batchnorm_train(packed, gamma_.var, beta_.var, mu, var, eps_);
}

ad::Var BatchNormLayer::forward(const ad::Var& x, Mode mode) { return normalize(x, mode); }

StepSequence BatchNormLayer::forward_seq(const StepSequence& xs, Mode mode) {
  const int64_t n = xs.batch();
  ad::PackedRows packed = ad::pack_valid_rows(xs.steps, xs.lengths);
  ad::Var normalized = normalize(packed.packed, mode);
  StepSequence out;
  out.lengths = xs.lengths;
  out.steps.reserve(xs.steps.size());
  for (int t = 0; t < xs.max_steps(); ++t) {
    out.steps.push_back(ad::unpack_step(normalized, packed, t, n));
  }
  return out;
}

}  // namespace qdet
