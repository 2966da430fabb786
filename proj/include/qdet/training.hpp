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

#ifndef QDET_TRAINING_HPP_
#define QDET_TRAINING_HPP_

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qdet/data.hpp"
#include "qdet/model.hpp"

namespace qdet {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double clip_norm = 5.0;  // <= 0 disables clipping
  uint64_t seed = 1;
  // With warn_on_nonfinite, non-finite gradients are zeroed instead of
  // aborting the run.
  bool warn_on_nonfinite = false;
  bool sort_by_length = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// First-order optimizer over a fixed parameter list. Slot state is keyed
// by position, so the parameter list must not change between steps.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, const std::vector<ad::Parameter>& params);

  // Applies one update from the accumulated gradients (global-norm clip
  // first when configured), leaving gradients untouched.
  void step();

  int64_t steps_taken() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<ad::Parameter> params_;
  std::vector<Tensor> velocity_;  // momentum
  std::vector<Tensor> m_, v_;     // adam moments
  int64_t t_ = 0;
};

// Precision/recall/F1 with the question class positive; zero denominators
// yield 0 by convention.
struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  int64_t count = 0;
  std::map<std::string, EvalReport> buckets;  // keyed "short"/"intermediate"/"long"

  nlohmann::json to_json() const;
};

EvalReport metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn);

// Scores every example (infer mode) and thresholds at `threshold`.
// Fills per-length-bucket sub-reports when `with_buckets` is set.
EvalReport evaluate_f1(QuestionDetector& model, const std::vector<Example>& examples,
                       const Vocab& vocab, FeatureCache* features, double threshold = 0.5,
                       bool with_buckets = false);

// Per-example scores in input order.
std::vector<double> score_examples(QuestionDetector& model, const std::vector<Example>& examples,
                                   const Vocab& vocab, FeatureCache* features);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_f1 = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; argmax validation F1, ties earliest
  double best_valid_f1 = 0.0;
  std::string model_path;

  nlohmann::json to_json() const;
  void save(const std::string& path) const;
};

// Epoch loop with validation-F1 early stopping; the model is left at the
// best validation snapshot.
TrainLog fit(QuestionDetector& model, const DatasetSplit& splits, const Vocab& vocab,
             FeatureCache* features, const TrainConfig& config);

}  // namespace qdet

#endif  // QDET_TRAINING_HPP_
