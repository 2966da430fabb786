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

#include "qdet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

namespace qdet {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "momentum") return OptimizerKind::kMomentum;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "' (expected sgd|momentum|adam)");
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (batch_size < 1 || max_epochs < 1) throw ConfigError("batch size and epochs must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{
      {"optimizer", qdet::to_string(optimizer)},
      {"lr", lr},
      {"momentum", momentum},
      {"adam_beta1", adam_beta1},
      {"adam_beta2", adam_beta2},
      {"adam_eps", adam_eps},
      {"batch_size", batch_size},
      {"max_epochs", max_epochs},
      {"patience", patience},
      {"clip_norm", clip_norm},
      {"seed", seed},
      {"warn_on_nonfinite", warn_on_nonfinite},
      {"sort_by_length", sort_by_length},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.warn_on_nonfinite = j.value("warn_on_nonfinite", c.warn_on_nonfinite);
  c.sort_by_length = j.value("sort_by_length", c.sort_by_length);
  c.validate();
  return c;
}

Optimizer::Optimizer(const TrainConfig& config, const std::vector<ad::Parameter>& params)
    : config_(config), params_(params) {
  if (config_.optimizer == OptimizerKind::kMomentum) {
    for (const ad::Parameter& p : params_) velocity_.push_back(Tensor::zeros(p.var.value().shape()));
  } else if (config_.optimizer == OptimizerKind::kAdam) {
    for (const ad::Parameter& p : params_) {
      m_.push_back(Tensor::zeros(p.var.value().shape()));
      v_.push_back(Tensor::zeros(p.var.value().shape()));
    }
  }
}

void Optimizer::step() {
  // Non-finite guard, then optional global-norm clipping.
  double sq_norm = 0.0;
  for (const ad::Parameter& p : params_) {
    Tensor& g = p.var.node()->grad_ref();
    for (int64_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        if (!config_.warn_on_nonfinite) {
          throw ContractError("non-finite gradient in parameter " + p.name);
        }
        std::cerr << "[warn] zeroing non-finite gradient in " << p.name << "\n";
        g[i] = 0.0;
      }
      sq_norm += g[i] * g[i];
    }
  }
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }

  ++t_;
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& theta = params_[pi].var.node()->value;
    const Tensor& g = params_[pi].var.grad();
    switch (config_.optimizer) {
      case OptimizerKind::kSgd:
        for (int64_t i = 0; i < theta.size(); ++i) theta[i] -= config_.lr * scale * g[i];
        break;
      case OptimizerKind::kMomentum: {
        Tensor& vel = velocity_[pi];
        for (int64_t i = 0; i < theta.size(); ++i) {
          vel[i] = config_.momentum * vel[i] + scale * g[i];
          theta[i] -= config_.lr * vel[i];
        }
        break;
      }
      case OptimizerKind::kAdam: {
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        const double bc1 = 1.0 - std::pow(config_.adam_beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(config_.adam_beta2, static_cast<double>(t_));
        for (int64_t i = 0; i < theta.size(); ++i) {
          const double gi = scale * g[i];
          m[i] = config_.adam_beta1 * m[i] + (1.0 - config_.adam_beta1) * gi;
          v[i] = config_.adam_beta2 * v[i] + (1.0 - config_.adam_beta2) * gi * gi;
          const double mhat = m[i] / bc1;
          const double vhat = v[i] / bc2;
          theta[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.adam_eps);
        }
        break;
      }
    }
  }
}

EvalReport metrics_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  r.count = tp + fp + fn + tn;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{
      {"precision", precision}, {"recall", recall}, {"f1", f1}, {"tp", tp},
      {"fp", fp},               {"fn", fn},         {"tn", tn}, {"count", count},
  };
  if (!buckets.empty()) {
    nlohmann::json b;
    for (const auto& [name, sub] : buckets) b[name] = sub.to_json();
    j["buckets"] = std::move(b);
  }
  return j;
}

std::vector<double> score_examples(QuestionDetector& model, const std::vector<Example>& examples,
                                   const Vocab& vocab, FeatureCache* features) {
  if (examples.empty()) throw ContractError("score_examples: empty example list");
  BatchOptions opts;
  opts.batch_size = 64;
  opts.shuffle = false;
  opts.need_text = model.config().uses_text();
  opts.need_audio = model.config().uses_audio();
  std::unordered_map<std::string, double> by_id;
  for (SequenceBatch& batch : make_batches(examples, vocab, features, opts)) {
    ad::Var scores = model.forward(batch, Mode::kInfer);
    for (int i = 0; i < batch.n; ++i) {
      by_id[batch.example_ids[static_cast<size_t>(i)]] = scores.value()[i];
    }
  }
  std::vector<double> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(by_id.at(e.id));
  return out;
}

EvalReport evaluate_f1(QuestionDetector& model, const std::vector<Example>& examples,
                       const Vocab& vocab, FeatureCache* features, double threshold,
                       bool with_buckets) {
  if (examples.empty()) throw ContractError("evaluate_f1: empty example list");
  const std::vector<double> scores = score_examples(model, examples, vocab, features);

  auto tally = [&](auto&& keep) {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
      if (!keep(examples[i])) continue;
      const int pred = scores[i] >= threshold ? 1 : 0;
      const int gold = examples[i].label;
      if (pred == 1 && gold == 1) ++tp;
      else if (pred == 1 && gold == 0) ++fp;
      else if (pred == 0 && gold == 1) ++fn;
      else ++tn;
    }
    return metrics_from_counts(tp, fp, fn, tn);
  };

  EvalReport report = tally([](const Example&) { return true; });
  if (with_buckets) {
    for (LengthBucket b : {LengthBucket::kShort, LengthBucket::kIntermediate, LengthBucket::kLong}) {
      report.buckets[to_string(b)] =
          tally([b](const Example& e) { return length_bucket(e) == b; });
    }
  }
  return report;
}

nlohmann::json TrainLog::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const EpochStats& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"valid_f1", e.valid_f1},
                           {"seconds", e.seconds}});
  }
  return nlohmann::json{{"epochs", std::move(epochs_json)},
                        {"best_epoch", best_epoch},
                        {"best_valid_f1", best_valid_f1},
                        {"model_path", model_path}};
}

void TrainLog::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write train log: " + path);
  for (const EpochStats& e : epochs) {
    os << nlohmann::json{{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"valid_f1", e.valid_f1},
                         {"seconds", e.seconds}}
              .dump()
       << '\n';
  }
  os << nlohmann::json{{"best_epoch", best_epoch},
                       {"best_valid_f1", best_valid_f1},
                       {"model_path", model_path}}
            .dump()
     << '\n';
}

TrainLog fit(QuestionDetector& model, const DatasetSplit& splits, const Vocab& vocab,
             FeatureCache* features, const TrainConfig& config) {
  config.validate();
  if (splits.train.empty() || splits.valid.empty()) {
    throw ContractError("fit: train and valid splits must be nonempty");
  }

  Optimizer optimizer(config, model.parameters());
  TrainLog log;
  std::vector<Tensor> best_snapshot = model.snapshot();
  double best_f1 = -1.0;
  int best_epoch = 0;

  BatchOptions opts;
  opts.batch_size = config.batch_size;
  opts.sort_by_length = config.sort_by_length;
  opts.need_text = model.config().uses_text();
  opts.need_audio = model.config().uses_audio();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    opts.shuffle_seed = RandomStream::derive(config.seed, "epoch." + std::to_string(epoch));
    std::vector<SequenceBatch> batches = make_batches(splits.train, vocab, features, opts);

    double loss_sum = 0.0;
    int64_t seen = 0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      SequenceBatch& batch = batches[bi];
      model.zero_grads();
      ad::Var logits = model.forward_logits(batch, Mode::kTrain);
      Tensor labels({static_cast<int64_t>(batch.n)}, std::vector<double>(batch.labels));
      ad::Var loss = ad::bce_with_logits(logits, labels);
      const double loss_value = loss.value()[0];
      if (!std::isfinite(loss_value)) {
        throw ContractError("fit: loss is not finite at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(bi + 1));
      }
      ad::backward(loss);
      optimizer.step();
      loss_sum += loss_value * batch.n;
      seen += batch.n;
    }

    const EvalReport valid = evaluate_f1(model, splits.valid, vocab, features);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(seen), valid.f1, seconds});

    if (valid.f1 > best_f1) {
      best_f1 = valid.f1;
      best_epoch = epoch;
      best_snapshot = model.snapshot();
    }
    if (epoch - best_epoch >= config.patience) break;
  }

  model.restore(best_snapshot);
  log.best_epoch = best_epoch;
  log.best_valid_f1 = best_f1;
  return log;
}

}  // namespace qdet
