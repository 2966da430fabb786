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

#ifndef QDET_GRID_HPP_
#define QDET_GRID_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qdet/training.hpp"

namespace qdet {

// The full candidate grid: model rows x {gru, lstm} x {none, dropout, bn},
// per seed. The default seven rows and six variants give 42 cells.
struct GridSpec {
  std::string dataset_dir;
  std::vector<std::string> rows;
  std::vector<CellType> cells = {CellType::kGru, CellType::kLstm};
  std::vector<Regularizer> regularizers = {Regularizer::kNone, Regularizer::kDropout,
                                           Regularizer::kBatchNorm};
  std::vector<uint64_t> seeds = {1, 2, 3};

  int64_t hidden = 200;
  int64_t embed_dim = 200;
  int64_t attention_dim = 200;
  double dropout_rate = 0.2;
  bool orthogonal_recurrent = false;

  TrainConfig train;
  MfccConfig mfcc;
  std::array<double, 3> split_fractions = {0.8, 0.1, 0.1};
  uint64_t split_seed = 17;

  // Cell type used for the length-bucket and example-score tables.
  std::string analysis_cell = "gru";
  int declarative_examples = 10;

  GridSpec();

  void validate() const;
  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
  static GridSpec from_file(const std::string& path);

  int64_t cells_per_seed() const;
};

struct CellKey {
  std::string row;
  CellType cell = CellType::kGru;
  Regularizer reg = Regularizer::kNone;
  uint64_t seed = 1;

  std::string name() const;
};

struct CellResult {
  CellKey key;
  bool ok = false;
  std::string error;
  double valid_f1 = 0.0;
  double test_f1 = 0.0;
  EvalReport test_report;
  // Test-split declarative-question scores, present for attention rows.
  std::vector<std::pair<std::string, double>> declarative_scores;
  double seconds = 0.0;
  std::string model_file;
  std::string content_hash;

  nlohmann::json to_json() const;
  static CellResult from_json(const nlohmann::json& j);
};

struct GridResult {
  GridSpec spec;
  std::vector<CellResult> cells;
  int trained = 0;  // cells actually trained this run (resume skips)

  const CellResult* find(const std::string& row, CellType cell, Regularizer reg,
                         uint64_t seed) const;
  // Mean over seeds; empty when any seed is missing/failed.
  std::optional<double> mean_test_f1(const std::string& row, CellType cell, Regularizer reg) const;
};

// Trains every cell (resumable via content-hashed result files under
// out_dir/cells), then writes the three tables under out_dir/tables.
GridResult run_grid(const GridSpec& spec, const std::string& out_dir, int jobs, bool resume);

enum class TableKind { kMain, kLength, kDeclarative };
enum class TableFormat { kText, kCsv, kLatex };

// Pure rendering of a grid result. Missing cells render as an em-dash
// with a footnote.
std::string emit_table(const GridResult& result, TableKind kind, TableFormat format);

// Per-example scores of several trained models; examples must contain at
// least one declarative question. Used by the example-score table and the
// eval CLI.
struct DeclarativeAnalysis {
  std::vector<std::string> family_names;
  std::vector<std::string> example_ids;
  std::vector<std::string> texts;
  std::vector<std::vector<double>> scores;  // [example][family]
  std::vector<double> aggregate_mean;       // per family, declarative rows only
};

DeclarativeAnalysis declarative_analysis(std::vector<QuestionDetector*> models,
                                         const std::vector<std::string>& names,
                                         const std::vector<Example>& examples, const Vocab& vocab,
                                         FeatureCache* features);

// FNV-1a over bytes; cache keys for resumable cells.
uint64_t fnv1a64(const std::string& bytes);
std::string file_content_hash(const std::string& path);

}  // namespace qdet

#endif  // QDET_GRID_HPP_
