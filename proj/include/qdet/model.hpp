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

#ifndef QDET_MODEL_HPP_
#define QDET_MODEL_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdet/batch.hpp"
#include "qdet/context.hpp"
#include "qdet/recurrent.hpp"

namespace qdet {

enum class InputMode { kText, kAudio, kBoth };
enum class Fusion { kNone, kCombinational, kConditional };
enum class ContextFn { kC1, kC2 };
enum class Regularizer { kNone, kDropout, kBatchNorm };

std::string to_string(InputMode m);
std::string to_string(Fusion f);
std::string to_string(ContextFn c);
std::string to_string(CellType c);
std::string to_string(Regularizer r);
CellType cell_from_string(const std::string& s);
Regularizer regularizer_from_string(const std::string& s);

// One model row of the grid: input source(s) plus context function.
struct ModelRow {
  InputMode input_mode;
  Fusion fusion;
  ContextFn context_fn;
  std::string name;  // e.g. "text_c1", "condition_c2"
};

// The seven rows, in table order.
const std::vector<ModelRow>& all_model_rows();
const ModelRow& model_row_by_name(const std::string& name);

// Everything needed to construct one grid candidate deterministically.
struct ModelConfig {
  InputMode input_mode = InputMode::kText;
  Fusion fusion = Fusion::kNone;
  ContextFn context_fn = ContextFn::kC1;
  CellType cell = CellType::kGru;
  Regularizer regularizer = Regularizer::kNone;
  int64_t hidden = 200;
  int64_t embed_dim = 200;
  int64_t attention_dim = 200;
  double dropout_rate = 0.2;
  uint64_t seed = 1;
  int64_t vocab_size = 0;
  int64_t audio_feat_dim = 52;
  bool orthogonal_recurrent = false;

  bool uses_text() const { return input_mode != InputMode::kAudio; }
  bool uses_audio() const { return input_mode != InputMode::kText; }
  std::string row_name() const;

  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Builds a config for one grid cell from row/cell/regularizer names.
ModelConfig make_model_config(const ModelRow& row, CellType cell, Regularizer reg,
                              const ModelConfig& base);

// A question detector assembled per config: optional text branch
// (embedding -> bidirectional RNN -> dense), optional audio branch
// (dense -> bidirectional RNN -> dense), context function(s), and a
// logistic classifier head.
class QuestionDetector {
 public:
  explicit QuestionDetector(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  int64_t parameter_count() const;

  // Classifier input width: 2H for single-input models, 4H for fused.
  int64_t context_dim() const;

  ad::Var forward_logits(const SequenceBatch& batch, Mode mode);
  ad::Var forward(const SequenceBatch& batch, Mode mode);
  std::vector<int> predict(const SequenceBatch& batch, double threshold = 0.5);

  void zero_grads();

  // Freezes dropout masks so repeated forwards are identical (used by
  // gradient checking).
  void freeze_noise(bool on);

  // Named state: parameters first, then batch-norm running statistics.
  std::vector<std::pair<std::string, Tensor*>> state_tensors();

  std::vector<Tensor> snapshot();
  void restore(const std::vector<Tensor>& snap);

 private:
  struct Branch {
    std::optional<EmbeddingTable> embed;
    std::optional<DenseLayer> f;
    std::optional<BatchNormLayer> bn_f;
    std::optional<BiRnn> rnn;
    std::optional<DenseLayer> h;
    std::optional<BatchNormLayer> bn_h;
    std::optional<AttentionScorer> scorer;
    DropoutLayer input_dropout;
  };

  StepSequence text_annotations(const SequenceBatch& batch, Mode mode);
  StepSequence audio_annotations(const SequenceBatch& batch, Mode mode);
  ContextOutput branch_context(Branch& branch, const StepSequence& z,
                               const std::optional<ad::Var>& condition);
  ad::Var context_vector(const SequenceBatch& batch, Mode mode);

  void register_params(const std::vector<ad::Parameter>& ps);

  ModelConfig config_;
  Branch text_, audio_;
  ad::Parameter head_w_, head_b_;
  std::optional<BatchNormLayer> head_bn_;
  DropoutLayer context_dropout_;
  std::vector<ad::Parameter> params_;
};

// Single-file model archive: magic + versioned JSON header (config plus
// caller metadata) + named raw float64 tensors. Round-trip is bit-exact.
void save_model(QuestionDetector& model, const std::string& path,
                const nlohmann::json& extra_meta);

struct LoadedModel {
  std::unique_ptr<QuestionDetector> model;
  nlohmann::json extra_meta;
};
LoadedModel load_model(const std::string& path);

}  // namespace qdet

#endif  // QDET_MODEL_HPP_
