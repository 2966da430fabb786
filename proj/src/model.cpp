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

#include "qdet/model.hpp"

#include <algorithm>

namespace qdet {

std::string to_string(InputMode m) {
  switch (m) {
    case InputMode::kText: return "text";
    case InputMode::kAudio: return "audio";
    case InputMode::kBoth: return "both";
  }
  return "?";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kNone: return "none";
    case Fusion::kCombinational: return "combinational";
    case Fusion::kConditional: return "conditional";
  }
  return "?";
}

std::string to_string(ContextFn c) { return c == ContextFn::kC1 ? "c1" : "c2"; }
std::string to_string(CellType c) { return c == CellType::kGru ? "gru" : "lstm"; }

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::kNone: return "none";
    case Regularizer::kDropout: return "dropout";
    case Regularizer::kBatchNorm: return "batchnorm";
  }
  return "?";
}

CellType cell_from_string(const std::string& s) {
  if (s == "gru") return CellType::kGru;
  if (s == "lstm") return CellType::kLstm;
  throw ConfigError("unknown cell type '" + s + "' (expected gru|lstm)");
}

Regularizer regularizer_from_string(const std::string& s) {
  if (s == "none") return Regularizer::kNone;
  if (s == "dropout") return Regularizer::kDropout;
  if (s == "bn" || s == "batchnorm") return Regularizer::kBatchNorm;
  throw ConfigError("unknown regularizer '" + s + "' (expected none|dropout|bn)");
}

const std::vector<ModelRow>& all_model_rows() {
  static const std::vector<ModelRow> rows = {
      {InputMode::kText, Fusion::kNone, ContextFn::kC1, "text_c1"},
      {InputMode::kText, Fusion::kNone, ContextFn::kC2, "text_c2"},
      {InputMode::kAudio, Fusion::kNone, ContextFn::kC1, "audio_c1"},
      {InputMode::kAudio, Fusion::kNone, ContextFn::kC2, "audio_c2"},
      {InputMode::kBoth, Fusion::kCombinational, ContextFn::kC1, "combination_c1"},
      {InputMode::kBoth, Fusion::kCombinational, ContextFn::kC2, "combination_c2"},
      {InputMode::kBoth, Fusion::kConditional, ContextFn::kC2, "condition_c2"},
  };
  return rows;
}

const ModelRow& model_row_by_name(const std::string& name) {
  for (const ModelRow& row : all_model_rows()) {
    if (row.name == name) return row;
  }
  throw ConfigError("unknown model row '" + name + "'");
}

std::string ModelConfig::row_name() const {
  for (const ModelRow& row : all_model_rows()) {
    if (row.input_mode == input_mode && row.fusion == fusion && row.context_fn == context_fn) {
      return row.name;
    }
  }
  return "custom";
}

void ModelConfig::validate() const {
  if (fusion == Fusion::kConditional) {
    if (input_mode != InputMode::kBoth) {
      throw ConfigError("conditional fusion requires both input modalities");
    }
    if (context_fn != ContextFn::kC2) {
      throw ConfigError("conditional fusion requires the attention context function (c2)");
    }
  }
  if ((fusion == Fusion::kNone) != (input_mode != InputMode::kBoth)) {
    throw ConfigError("fusion=none is exactly the single-input case");
  }
  if (hidden <= 0 || embed_dim <= 0 || attention_dim <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (uses_text() && vocab_size < 2) {
    throw ConfigError("text models need vocab_size >= 2 (padding + unk)");
  }
  if (uses_audio() && audio_feat_dim <= 0) {
    throw ConfigError("audio models need a positive feature dimension");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{
      {"input_mode", to_string(input_mode)},
      {"fusion", to_string(fusion)},
      {"context_fn", to_string(context_fn)},
      {"cell", to_string(cell)},
      {"regularizer", to_string(regularizer)},
      {"hidden", hidden},
      {"embed_dim", embed_dim},
      {"attention_dim", attention_dim},
      {"dropout_rate", dropout_rate},
      {"seed", seed},
      {"vocab_size", vocab_size},
      {"audio_feat_dim", audio_feat_dim},
      {"orthogonal_recurrent", orthogonal_recurrent},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  const std::string im = j.at("input_mode").get<std::string>();
  if (im == "text") c.input_mode = InputMode::kText;
  else if (im == "audio") c.input_mode = InputMode::kAudio;
  else if (im == "both") c.input_mode = InputMode::kBoth;
  else throw ConfigError("unknown input_mode '" + im + "'");
  const std::string fu = j.at("fusion").get<std::string>();
  if (fu == "none") c.fusion = Fusion::kNone;
  else if (fu == "combinational") c.fusion = Fusion::kCombinational;
  else if (fu == "conditional") c.fusion = Fusion::kConditional;
  else throw ConfigError("unknown fusion '" + fu + "'");
  const std::string cf = j.at("context_fn").get<std::string>();
  if (cf == "c1") c.context_fn = ContextFn::kC1;
  else if (cf == "c2") c.context_fn = ContextFn::kC2;
  else throw ConfigError("unknown context_fn '" + cf + "'");
  c.cell = cell_from_string(j.at("cell").get<std::string>());
  c.regularizer = regularizer_from_string(j.at("regularizer").get<std::string>());
  c.hidden = j.at("hidden").get<int64_t>();
  c.embed_dim = j.at("embed_dim").get<int64_t>();
  c.attention_dim = j.at("attention_dim").get<int64_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.vocab_size = j.at("vocab_size").get<int64_t>();
  c.audio_feat_dim = j.at("audio_feat_dim").get<int64_t>();
  c.orthogonal_recurrent = j.value("orthogonal_recurrent", false);
  return c;
}

ModelConfig make_model_config(const ModelRow& row, CellType cell, Regularizer reg,
                              const ModelConfig& base) {
  ModelConfig c = base;
  c.input_mode = row.input_mode;
  c.fusion = row.fusion;
  c.context_fn = row.context_fn;
  c.cell = cell;
  c.regularizer = reg;
  c.validate();
  return c;
}

void QuestionDetector::register_params(const std::vector<ad::Parameter>& ps) {
  params_.insert(params_.end(), ps.begin(), ps.end());
}

QuestionDetector::QuestionDetector(const ModelConfig& config) : config_(config) {
  config_.validate();
  RandomStream rng(config_.seed);
  const int64_t h2 = 2 * config_.hidden;
  const bool bn = config_.regularizer == Regularizer::kBatchNorm;
  const bool c2 = config_.context_fn == ContextFn::kC2;

  if (config_.uses_text()) {
    text_.embed = EmbeddingTable::create("text.embed", config_.vocab_size, config_.embed_dim, rng);
    register_params({text_.embed->E});
    text_.rnn = BiRnn::create(config_.cell, "text.rnn", config_.embed_dim, config_.hidden, rng,
                              config_.orthogonal_recurrent);
    register_params(text_.rnn->parameters());
    text_.h = DenseLayer::create("text.h", h2, h2, Activation::kRelu, rng);
    register_params({text_.h->W, text_.h->b});
    if (bn) {
      text_.bn_h = BatchNormLayer::create("text.bn_h", h2, rng);
      register_params({text_.bn_h->gamma(), text_.bn_h->beta()});
    }
    if (c2) {
      // The conditional model conditions text attention on the audio context.
      std::optional<int64_t> cond =
          config_.fusion == Fusion::kConditional ? std::optional<int64_t>(h2) : std::nullopt;
      text_.scorer = AttentionScorer::create("text.attn", h2, config_.attention_dim, cond, rng);
      register_params(text_.scorer->parameters());
    }
    text_.input_dropout = DropoutLayer(config_.dropout_rate, RandomStream::derive(config_.seed, "drop.text"));
  }

  if (config_.uses_audio()) {
    audio_.f = DenseLayer::create("audio.f", config_.audio_feat_dim, config_.embed_dim,
                                  Activation::kRelu, rng);
    register_params({audio_.f->W, audio_.f->b});
    if (bn) {
      audio_.bn_f = BatchNormLayer::create("audio.bn_f", config_.embed_dim, rng);
      register_params({audio_.bn_f->gamma(), audio_.bn_f->beta()});
    }
    audio_.rnn = BiRnn::create(config_.cell, "audio.rnn", config_.embed_dim, config_.hidden, rng,
                               config_.orthogonal_recurrent);
    register_params(audio_.rnn->parameters());
    audio_.h = DenseLayer::create("audio.h", h2, h2, Activation::kRelu, rng);
    register_params({audio_.h->W, audio_.h->b});
    if (bn) {
      audio_.bn_h = BatchNormLayer::create("audio.bn_h", h2, rng);
      register_params({audio_.bn_h->gamma(), audio_.bn_h->beta()});
    }
    if (c2) {
      audio_.scorer = AttentionScorer::create("audio.attn", h2, config_.attention_dim, std::nullopt, rng);
      register_params(audio_.scorer->parameters());
    }
    audio_.input_dropout = DropoutLayer(config_.dropout_rate, RandomStream::derive(config_.seed, "drop.audio"));
  }

  const int64_t d_ctx = context_dim();
  Tensor w({d_ctx, 1});
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-kWeightInitRange, kWeightInitRange);
  head_w_ = {"head.w", ad::Var::leaf(std::move(w))};
  head_b_ = {"head.b", ad::Var::leaf(Tensor::zeros({1}))};
  register_params({head_w_, head_b_});
  if (bn) {
    head_bn_ = BatchNormLayer::create("head.bn", d_ctx, rng);
    register_params({head_bn_->gamma(), head_bn_->beta()});
  }
  context_dropout_ = DropoutLayer(config_.dropout_rate, RandomStream::derive(config_.seed, "drop.ctx"));
}

int64_t QuestionDetector::parameter_count() const {
  int64_t total = 0;
  for (const ad::Parameter& p : params_) total += p.var.value().size();
  return total;
}

int64_t QuestionDetector::context_dim() const {
  const int64_t h2 = 2 * config_.hidden;
  return config_.input_mode == InputMode::kBoth ? 2 * h2 : h2;
}

StepSequence QuestionDetector::text_annotations(const SequenceBatch& batch, Mode mode) {
  if (!batch.has_text()) throw InputError("model requires the text modality");
  StepSequence embedded;
  embedded.lengths = batch.text_lengths;
  embedded.steps.reserve(static_cast<size_t>(batch.text_max));
  const bool drop = config_.regularizer == Regularizer::kDropout;
  for (int t = 0; t < batch.text_max; ++t) {
    ad::Var e = text_.embed->lookup(batch.token_column(t));
    if (drop) e = text_.input_dropout.apply(e, mode);
    embedded.steps.push_back(e);
  }
  StepSequence z = birnn_forward(*text_.rnn, embedded);
  for (ad::Var& s : z.steps) s = text_.h->forward(s);
  if (text_.bn_h) z = text_.bn_h->forward_seq(z, mode);
  return z;
}

StepSequence QuestionDetector::audio_annotations(const SequenceBatch& batch, Mode mode) {
  if (!batch.has_audio()) throw InputError("model requires the audio modality");
  if (batch.audio_feat_dim != config_.audio_feat_dim) {
    throw DimensionError("audio feature dim " + std::to_string(batch.audio_feat_dim) +
                         " != configured " + std::to_string(config_.audio_feat_dim));
  }
  StepSequence fed;
  fed.lengths = batch.audio_lengths;
  fed.steps.reserve(static_cast<size_t>(batch.audio_max));
  const bool drop = config_.regularizer == Regularizer::kDropout;
  for (int t = 0; t < batch.audio_max; ++t) {
    ad::Var x = audio_.f->forward(ad::Var::constant(batch.audio_step(t)));
    if (drop) x = audio_.input_dropout.apply(x, mode);
    fed.steps.push_back(x);
  }
  if (audio_.bn_f) fed = audio_.bn_f->forward_seq(fed, mode);
  StepSequence z = birnn_forward(*audio_.rnn, fed);
  for (ad::Var& s : z.steps) s = audio_.h->forward(s);
  if (audio_.bn_h) z = audio_.bn_h->forward_seq(z, mode);
  return z;
}

ContextOutput QuestionDetector::branch_context(Branch& branch, const StepSequence& z,
                                               const std::optional<ad::Var>& condition) {
  if (config_.context_fn == ContextFn::kC1) return context_last(z);
  return context_attention(z, *branch.scorer, condition);
}

ad::Var QuestionDetector::context_vector(const SequenceBatch& batch, Mode mode) {
  if (config_.input_mode == InputMode::kText) {
    return branch_context(text_, text_annotations(batch, mode), std::nullopt).context;
  }
  if (config_.input_mode == InputMode::kAudio) {
    return branch_context(audio_, audio_annotations(batch, mode), std::nullopt).context;
  }
  StepSequence z_text = text_annotations(batch, mode);
  StepSequence z_audio = audio_annotations(batch, mode);
  if (config_.fusion == Fusion::kConditional) {
    ContextOutput c_audio = branch_context(audio_, z_audio, std::nullopt);
    ContextOutput c_text = branch_context(text_, z_text, c_audio.context);
    return ad::concat({c_text.context, c_audio.context}, 1);
  }
  ContextOutput c_text = branch_context(text_, z_text, std::nullopt);
  ContextOutput c_audio = branch_context(audio_, z_audio, std::nullopt);
  return ad::concat({c_text.context, c_audio.context}, 1);
}

ad::Var QuestionDetector::forward_logits(const SequenceBatch& batch, Mode mode) {
  if (config_.regularizer == Regularizer::kDropout) {
    text_.input_dropout.begin_forward();
    audio_.input_dropout.begin_forward();
    context_dropout_.begin_forward();
  }
  ad::Var ctx = context_vector(batch, mode);
  if (config_.regularizer == Regularizer::kDropout) {
    ctx = context_dropout_.apply(ctx, mode);
  }
  if (head_bn_) ctx = head_bn_->forward(ctx, mode);
  ad::Var logits = ad::add(ad::matmul(ctx, head_w_.var), head_b_.var);  // [n x 1]
  return ad::reshape(logits, {static_cast<int64_t>(batch.n)});
}

ad::Var QuestionDetector::forward(const SequenceBatch& batch, Mode mode) {
  return ad::sigmoid(forward_logits(batch, mode));
}

std::vector<int> QuestionDetector::predict(const SequenceBatch& batch, double threshold) {
  ad::Var scores = forward(batch, Mode::kInfer);
  std::vector<int> labels(static_cast<size_t>(batch.n));
  for (int i = 0; i < batch.n; ++i) {
    labels[static_cast<size_t>(i)] = scores.value()[i] >= threshold ? 1 : 0;
  }
  return labels;
}

void QuestionDetector::zero_grads() { ad::zero_grads(params_); }

void QuestionDetector::freeze_noise(bool on) {
  text_.input_dropout.freeze(on);
  audio_.input_dropout.freeze(on);
  context_dropout_.freeze(on);
}

std::vector<std::pair<std::string, Tensor*>> QuestionDetector::state_tensors() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (ad::Parameter& p : params_) {
    out.emplace_back(p.name, &p.var.node()->value);
  }
  auto add_bn = [&out](std::optional<BatchNormLayer>& bn, const std::string& prefix) {
    if (!bn) return;
    out.emplace_back(prefix + ".running_mean", &bn->running_mean());
    out.emplace_back(prefix + ".running_var", &bn->running_var());
  };
  add_bn(text_.bn_h, "text.bn_h");
  add_bn(audio_.bn_f, "audio.bn_f");
  add_bn(audio_.bn_h, "audio.bn_h");
  add_bn(head_bn_, "head.bn");
  return out;
}

std::vector<Tensor> QuestionDetector::snapshot() {
  std::vector<Tensor> snap;
  for (auto& [name, t] : state_tensors()) snap.push_back(*t);
  return snap;
}

void QuestionDetector::restore(const std::vector<Tensor>& snap) {
  auto state = state_tensors();
  if (snap.size() != state.size()) throw ContractError("restore: snapshot size mismatch");
  for (size_t i = 0; i < state.size(); ++i) *state[i].second = snap[i];
}

}  // namespace qdet
