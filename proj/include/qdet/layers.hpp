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

#ifndef QDET_LAYERS_HPP_
#define QDET_LAYERS_HPP_

#include <string>
#include <vector>

#include "qdet/autodiff.hpp"
#include "qdet/rng.hpp"
#include "qdet/sequence.hpp"

namespace qdet {

enum class Mode { kTrain, kInfer };

enum class Activation { kNone, kRelu };

constexpr double kWeightInitRange = 0.08;

// Fully connected layer, y = act(xW + b).
struct DenseLayer {
  ad::Parameter W;  // [in x out]
  ad::Parameter b;  // [out]
  Activation activation = Activation::kRelu;
  int64_t in = 0, out = 0;

  static DenseLayer create(const std::string& prefix, int64_t in, int64_t out,
                           Activation act, RandomStream& rng);

  ad::Var forward(const ad::Var& x) const;
};

// Learned token vectors. Row 0 is the padding row: zero-initialized and
// excluded from gradient updates.
struct EmbeddingTable {
  ad::Parameter E;  // [V x d]
  int64_t vocab_size = 0, dim = 0;

  static EmbeddingTable create(const std::string& prefix, int64_t vocab, int64_t dim,
                               RandomStream& rng);

  // ids are one timestep column of a batch; padded positions carry id 0.
  ad::Var lookup(const std::vector<int>& ids) const;
};

// Inverted dropout: survivors are scaled by 1/(1-p) so inference is the
// identity. The mask is drawn once per apply and reused by backward.
class DropoutLayer {
 public:
  DropoutLayer() = default;
  DropoutLayer(double rate, uint64_t seed) : rate_(rate), seed_(seed), rng_(seed) {}

  double rate() const { return rate_; }

  // Reseeds the stream when frozen; called at the start of each model
  // forward so repeated evaluations see identical masks.
  void begin_forward();
  void freeze(bool on) { frozen_ = on; }
  bool frozen() const { return frozen_; }

  ad::Var apply(const ad::Var& x, Mode mode);

 private:
  double rate_ = 0.0;
  uint64_t seed_ = 0;
  RandomStream rng_{0};
  bool frozen_ = false;
};

// Batch normalization over features, with running statistics for
// inference. For sequence inputs the statistics pool the batch and the
// valid timesteps jointly; padded positions are excluded.
class BatchNormLayer {
 public:
  BatchNormLayer() = default;

  static BatchNormLayer create(const std::string& prefix, int64_t dim, RandomStream& rng);

  ad::Var forward(const ad::Var& x, Mode mode);
  StepSequence forward_seq(const StepSequence& xs, Mode mode);

  const ad::Parameter& gamma() const { return gamma_; }
  const ad::Parameter& beta() const { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  double momentum() const { return momentum_; }
  double eps() const { return eps_; }
  int64_t dim() const { return dim_; }

 private:
  // Normalizes a packed [m x d] matrix in the requested mode and updates
  // running statistics in train mode.
  ad::Var normalize(const ad::Var& packed, Mode mode);

  ad::Parameter gamma_, beta_;
  Tensor running_mean_, running_var_;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  int64_t dim_ = 0;
};

}  // namespace qdet

#endif  // QDET_LAYERS_HPP_
