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

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "qdet/grid.hpp"
#include "qdet/kernels.hpp"
#include "qdet/synth.hpp"

namespace fs = std::filesystem;
using namespace qdet;

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config file " + path + " is not valid JSON: " + e.what());
  }
  return j;
}

struct PipelineData {
  DatasetSplit split;
  Vocab vocab = Vocab::from_tokens({"<pad>", "<unk>"});
  std::unique_ptr<FeatureCache> features;
};

PipelineData load_pipeline_data(const std::string& data_dir, const MfccConfig& mfcc,
                                const std::array<double, 3>& fractions, uint64_t split_seed) {
  PipelineData out;
  const std::string dataset_file = (fs::path(data_dir) / "dataset.jsonl").string();
  std::vector<Example> examples = filter_by_length(load_dataset(dataset_file));
  out.split = split_dataset(examples, fractions, split_seed);
  std::vector<std::string> train_texts;
  for (const Example& e : out.split.train) train_texts.push_back(e.text);
  out.vocab = Vocab::build(train_texts);
  out.features = std::make_unique<FeatureCache>(mfcc, data_dir);
  return out;
}

void print_report(const EvalReport& report, const std::string& heading) {
  std::cout << heading << ": F1 " << report.f1 << "  precision " << report.precision << "  recall "
            << report.recall << "  (tp " << report.tp << " fp " << report.fp << " fn " << report.fn
            << " tn " << report.tn << ")\n";
  for (const auto& [bucket, sub] : report.buckets) {
    std::cout << "  " << bucket << ": F1 " << sub.f1 << "  precision " << sub.precision
              << "  recall " << sub.recall << "  n " << sub.count << "\n";
  }
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed) {
  SynthConfig config =
      config_path.empty() ? SynthConfig{} : SynthConfig::from_json(read_json_file(config_path));
  if (seed.has_value()) config.seed = *seed;
  write_synthetic_corpus(config, out_dir);
  std::cout << "wrote " << config.n_examples << " examples to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& row_name, const std::string& cell_name, const std::string& reg_name,
              const std::string& data_dir, uint64_t seed, const std::string& out_dir,
              const std::string& train_config_path, const std::string& mfcc_config_path,
              int64_t hidden, int64_t embed_dim, int64_t attention_dim, double dropout_rate,
              uint64_t split_seed) {
  TrainConfig train_config = train_config_path.empty()
                                 ? TrainConfig{}
                                 : TrainConfig::from_json(read_json_file(train_config_path));
  train_config.seed = seed;
  MfccConfig mfcc = mfcc_config_path.empty() ? MfccConfig{}
                                             : MfccConfig::from_json(read_json_file(mfcc_config_path));

  PipelineData data = load_pipeline_data(data_dir, mfcc, {0.8, 0.1, 0.1}, split_seed);

  const ModelRow& row = model_row_by_name(row_name);
  ModelConfig config;
  config.input_mode = row.input_mode;
  config.fusion = row.fusion;
  config.context_fn = row.context_fn;
  config.cell = cell_from_string(cell_name);
  config.regularizer = regularizer_from_string(reg_name);
  config.hidden = hidden;
  config.embed_dim = embed_dim;
  config.attention_dim = attention_dim;
  config.dropout_rate = dropout_rate;
  config.seed = seed;
  config.vocab_size = data.vocab.size();
  config.audio_feat_dim = mfcc.feature_dim();
  config.validate();

  QuestionDetector model(config);
  TrainLog log = fit(model, data.split, data.vocab, data.features.get(), train_config);

  fs::create_directories(out_dir);
  const std::string model_file = (fs::path(out_dir) / (row_name + "_" + cell_name + "_" +
                                                       reg_name + "_s" + std::to_string(seed) + ".qdm"))
                                     .string();
  nlohmann::json meta{{"vocab", data.vocab.tokens()},
                      {"mfcc", mfcc.to_json()},
                      {"train", train_config.to_json()},
                      {"split", {{"fractions", {0.8, 0.1, 0.1}}, {"seed", split_seed}}}};
  save_model(model, model_file, meta);
  log.model_path = model_file;
  log.save(model_file + ".trainlog.jsonl");

  const EvalReport test = evaluate_f1(model, data.split.test, data.vocab, data.features.get(), 0.5, true);
  std::cout << "best epoch " << log.best_epoch << "  valid F1 " << log.best_valid_f1 << "\n";
  print_report(test, "test");
  std::cout << "model: " << model_file << "\n";
  return 0;
}

int cmd_eval(const std::string& model_file, const std::string& data_dir, const std::string& split_name,
             bool buckets, bool declarative, double threshold, std::string out_path) {
  LoadedModel loaded = load_model(model_file);
  const nlohmann::json& meta = loaded.extra_meta;
  Vocab vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  MfccConfig mfcc = MfccConfig::from_json(meta.at("mfcc"));
  const uint64_t split_seed = meta.contains("split") ? meta.at("split").value("seed", 17) : 17;

  FeatureCache features(mfcc, data_dir);
  std::vector<Example> examples =
      filter_by_length(load_dataset((fs::path(data_dir) / "dataset.jsonl").string()));

  std::vector<Example> subset;
  if (split_name == "all") {
    subset = examples;
  } else {
    DatasetSplit split = split_dataset(examples, {0.8, 0.1, 0.1}, split_seed);
    if (split_name == "train") subset = split.train;
    else if (split_name == "valid") subset = split.valid;
    else if (split_name == "test") subset = split.test;
    else throw ConfigError("unknown split '" + split_name + "' (expected train|valid|test|all)");
  }

  const EvalReport report =
      evaluate_f1(*loaded.model, subset, vocab, &features, threshold, buckets);
  print_report(report, split_name);

  nlohmann::json out_records = nlohmann::json::array();
  out_records.push_back({{"kind", "report"}, {"split", split_name}, {"report", report.to_json()}});

  if (declarative) {
    std::vector<Example> decl;
    for (const Example& e : subset) {
      auto it = e.meta.find("type");
      if (it != e.meta.end() && it->second == "declarative_question") decl.push_back(e);
    }
    if (decl.empty()) {
      std::cout << "no declarative-question examples in split '" << split_name << "'\n";
    } else {
      const std::vector<double> scores = score_examples(*loaded.model, decl, vocab, &features);
      double mean = 0.0;
      for (size_t i = 0; i < decl.size(); ++i) {
        out_records.push_back({{"kind", "declarative"},
                               {"id", decl[i].id},
                               {"text", decl[i].text},
                               {"score", scores[i]}});
        mean += scores[i];
      }
      mean /= static_cast<double>(decl.size());
      std::cout << "declarative questions: " << decl.size() << ", mean score " << mean << "\n";
      out_records.push_back({{"kind", "declarative_mean"}, {"score", mean}});
    }
  }

  if (out_path.empty()) out_path = model_file + ".eval.jsonl";
  std::ofstream os(out_path, std::ios::trunc);
  for (const auto& rec : out_records) os << rec.dump() << '\n';
  std::cout << "report: " << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& model_file, const std::string& input_path, double threshold) {
  LoadedModel loaded = load_model(model_file);
  const nlohmann::json& meta = loaded.extra_meta;
  Vocab vocab = Vocab::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  MfccConfig mfcc = MfccConfig::from_json(meta.at("mfcc"));

  std::vector<Example> examples = load_dataset(input_path);
  FeatureCache features(mfcc, fs::path(input_path).parent_path().string());
  const std::vector<double> scores = score_examples(*loaded.model, examples, vocab, &features);
  for (size_t i = 0; i < examples.size(); ++i) {
    std::cout << nlohmann::json{{"id", examples[i].id},
                                {"score", scores[i]},
                                {"label", scores[i] >= threshold ? 1 : 0}}
                     .dump()
              << "\n";
  }
  return 0;
}

int cmd_grid(const std::string& spec_path, const std::string& out_dir, int jobs, bool resume) {
  GridSpec spec = GridSpec::from_file(spec_path);
  const GridResult result = run_grid(spec, out_dir, jobs, resume);
  int ok = 0, failed = 0;
  for (const CellResult& c : result.cells) (c.ok ? ok : failed) += 1;
  std::cout << "grid: " << ok << " cells ok, " << failed << " failed, " << result.trained
            << " trained this run\n";
  std::cout << emit_table(result, TableKind::kMain, TableFormat::kText);
  std::cout << "tables: " << (fs::path(out_dir) / "tables").string() << "\n";
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdet: multimodal question detection models"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "cap kernel threads (0 = auto)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus (WAVs + records)");
  std::string synth_config, synth_out;
  std::optional<uint64_t> synth_seed;
  synth->add_option("--config", synth_config, "synth config JSON");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override config seed");

  auto* train = app.add_subcommand("train", "train one grid cell");
  std::string train_row, train_cell = "gru", train_reg = "none", train_data, train_out = "run";
  std::string train_config_path, mfcc_config_path;
  uint64_t train_seed = 1, train_split_seed = 17;
  int64_t hidden = 200, embed_dim = 200, attention_dim = 200;
  double dropout_rate = 0.2;
  train->add_option("--model", train_row, "model row (text_c1 .. condition_c2)")->required();
  train->add_option("--cell", train_cell, "gru|lstm");
  train->add_option("--reg", train_reg, "none|dropout|bn");
  train->add_option("--data", train_data, "corpus directory (dataset.jsonl + wav/)")->required();
  train->add_option("--seed", train_seed, "training + init seed");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--train-config", train_config_path, "TrainConfig JSON");
  train->add_option("--mfcc-config", mfcc_config_path, "MfccConfig JSON");
  train->add_option("--hidden", hidden, "recurrent width per direction");
  train->add_option("--embed-dim", embed_dim, "embedding / audio projection width");
  train->add_option("--attention-dim", attention_dim, "attention width");
  train->add_option("--dropout-rate", dropout_rate, "dropout probability");
  train->add_option("--split-seed", train_split_seed, "dataset split seed");

  auto* eval = app.add_subcommand("eval", "evaluate a saved model");
  std::string eval_model, eval_data, eval_split = "test", eval_out;
  bool eval_buckets = false, eval_decl = false;
  double eval_threshold = 0.5;
  eval->add_option("--model-file", eval_model, "model archive")->required();
  eval->add_option("--data", eval_data, "corpus directory")->required();
  eval->add_option("--split", eval_split, "train|valid|test|all");
  eval->add_flag("--buckets", eval_buckets, "report per length bucket");
  eval->add_flag("--declarative", eval_decl, "score declarative questions");
  eval->add_option("--threshold", eval_threshold, "decision threshold");
  eval->add_option("--out", eval_out, "records output path");

  auto* predict = app.add_subcommand("predict", "score a records file");
  std::string pred_model, pred_input;
  double pred_threshold = 0.5;
  predict->add_option("--model-file", pred_model, "model archive")->required();
  predict->add_option("--input", pred_input, "records file")->required();
  predict->add_option("--threshold", pred_threshold, "decision threshold");

  auto* grid = app.add_subcommand("grid", "run the full candidate grid");
  std::string grid_spec, grid_out = "grid_out";
  int grid_jobs = 1;
  bool grid_resume = false;
  grid->add_option("--spec", grid_spec, "grid spec JSON")->required();
  grid->add_option("--out", grid_out, "output directory");
  grid->add_option("--jobs", grid_jobs, "parallel training workers");
  grid->add_flag("--resume", grid_resume, "skip cells with cached results");

  CLI11_PARSE(app, argc, argv);
  kernels::set_thread_cap(threads);

  try {
    if (*synth) return cmd_synth(synth_config, synth_out, synth_seed);
    if (*train) {
      return cmd_train(train_row, train_cell, train_reg, train_data, train_seed, train_out,
                       train_config_path, mfcc_config_path, hidden, embed_dim, attention_dim,
                       dropout_rate, train_split_seed);
    }
    if (*eval) {
      return cmd_eval(eval_model, eval_data, eval_split, eval_buckets, eval_decl, eval_threshold,
                      eval_out);
    }
    if (*predict) return cmd_predict(pred_model, pred_input, pred_threshold);
    if (*grid) return cmd_grid(grid_spec, grid_out, grid_jobs, grid_resume);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
