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

#include "qdet/grid.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "qdet/kernels.hpp"

namespace qdet {

namespace fs = std::filesystem;

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_content_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot hash missing file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(fnv1a64(buf.str())));
  return out;
}

GridSpec::GridSpec() {
  for (const ModelRow& row : all_model_rows()) rows.push_back(row.name);
}

void GridSpec::validate() const {
  if (dataset_dir.empty()) throw ConfigError("grid spec needs a dataset directory");
  if (rows.empty() || cells.empty() || regularizers.empty() || seeds.empty()) {
    throw ConfigError("grid spec has an empty axis");
  }
  for (const std::string& r : rows) model_row_by_name(r);  // throws on unknown
  cell_from_string(analysis_cell);
  train.validate();
  mfcc.validate();
}

int64_t GridSpec::cells_per_seed() const {
  return static_cast<int64_t>(rows.size() * cells.size() * regularizers.size());
}

nlohmann::json GridSpec::to_json() const {
  std::vector<std::string> cell_names, reg_names;
  for (CellType c : cells) cell_names.push_back(qdet::to_string(c));
  for (Regularizer r : regularizers) reg_names.push_back(qdet::to_string(r));
  return nlohmann::json{
      {"dataset", dataset_dir},
      {"rows", rows},
      {"cells", cell_names},
      {"regularizers", reg_names},
      {"seeds", seeds},
      {"model",
       {{"hidden", hidden},
        {"embed_dim", embed_dim},
        {"attention_dim", attention_dim},
        {"dropout_rate", dropout_rate},
        {"orthogonal_recurrent", orthogonal_recurrent}}},
      {"train", train.to_json()},
      {"mfcc", mfcc.to_json()},
      {"split", {{"fractions", split_fractions}, {"seed", split_seed}}},
      {"analysis_cell", analysis_cell},
      {"declarative_examples", declarative_examples},
  };
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec s;
  s.dataset_dir = j.at("dataset").get<std::string>();
  if (j.contains("rows")) s.rows = j.at("rows").get<std::vector<std::string>>();
  if (j.contains("cells")) {
    s.cells.clear();
    for (const auto& c : j.at("cells")) s.cells.push_back(cell_from_string(c.get<std::string>()));
  }
  if (j.contains("regularizers")) {
    s.regularizers.clear();
    for (const auto& r : j.at("regularizers")) {
      s.regularizers.push_back(regularizer_from_string(r.get<std::string>()));
    }
  }
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  if (j.contains("model")) {
    const auto& m = j.at("model");
    s.hidden = m.value("hidden", s.hidden);
    s.embed_dim = m.value("embed_dim", s.embed_dim);
    s.attention_dim = m.value("attention_dim", s.attention_dim);
    s.dropout_rate = m.value("dropout_rate", s.dropout_rate);
    s.orthogonal_recurrent = m.value("orthogonal_recurrent", s.orthogonal_recurrent);
  }
  if (j.contains("train")) s.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("mfcc")) s.mfcc = MfccConfig::from_json(j.at("mfcc"));
  if (j.contains("split")) {
    const auto& sp = j.at("split");
    if (sp.contains("fractions")) {
      const auto f = sp.at("fractions").get<std::vector<double>>();
      if (f.size() != 3) throw ConfigError("split fractions need 3 entries");
      s.split_fractions = {f[0], f[1], f[2]};
    }
    s.split_seed = sp.value("seed", s.split_seed);
  }
  s.analysis_cell = j.value("analysis_cell", s.analysis_cell);
  s.declarative_examples = j.value("declarative_examples", s.declarative_examples);
  s.validate();
  return s;
}

GridSpec GridSpec::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open grid spec: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("grid spec " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::string CellKey::name() const {
  return row + "_" + qdet::to_string(cell) + "_" + qdet::to_string(reg) + "_s" + std::to_string(seed);
}

nlohmann::json CellResult::to_json() const {
  nlohmann::json decl = nlohmann::json::array();
  for (const auto& [id, score] : declarative_scores) decl.push_back({{"id", id}, {"score", score}});
  return nlohmann::json{
      {"row", key.row},
      {"cell", qdet::to_string(key.cell)},
      {"regularizer", qdet::to_string(key.reg)},
      {"seed", key.seed},
      {"ok", ok},
      {"error", error},
      {"valid_f1", valid_f1},
      {"test_f1", test_f1},
      {"test_report", test_report.to_json()},
      {"declarative_scores", std::move(decl)},
      {"seconds", seconds},
      {"model_file", model_file},
      {"content_hash", content_hash},
  };
}

CellResult CellResult::from_json(const nlohmann::json& j) {
  CellResult r;
  r.key.row = j.at("row").get<std::string>();
  r.key.cell = cell_from_string(j.at("cell").get<std::string>());
  r.key.reg = regularizer_from_string(j.at("regularizer").get<std::string>());
  r.key.seed = j.at("seed").get<uint64_t>();
  r.ok = j.at("ok").get<bool>();
  r.error = j.value("error", "");
  r.valid_f1 = j.at("valid_f1").get<double>();
  r.test_f1 = j.at("test_f1").get<double>();
  const auto& tr = j.at("test_report");
  r.test_report = metrics_from_counts(tr.at("tp").get<int64_t>(), tr.at("fp").get<int64_t>(),
                                      tr.at("fn").get<int64_t>(), tr.at("tn").get<int64_t>());
  if (tr.contains("buckets")) {
    for (const auto& [name, sub] : tr.at("buckets").items()) {
      r.test_report.buckets[name] =
          metrics_from_counts(sub.at("tp").get<int64_t>(), sub.at("fp").get<int64_t>(),
                              sub.at("fn").get<int64_t>(), sub.at("tn").get<int64_t>());
    }
  }
  for (const auto& d : j.value("declarative_scores", nlohmann::json::array())) {
    r.declarative_scores.emplace_back(d.at("id").get<std::string>(), d.at("score").get<double>());
  }
  r.seconds = j.value("seconds", 0.0);
  r.model_file = j.value("model_file", "");
  r.content_hash = j.value("content_hash", "");
  return r;
}

const CellResult* GridResult::find(const std::string& row, CellType cell, Regularizer reg,
                                   uint64_t seed) const {
  for (const CellResult& r : cells) {
    if (r.key.row == row && r.key.cell == cell && r.key.reg == reg && r.key.seed == seed) return &r;
  }
  return nullptr;
}

std::optional<double> GridResult::mean_test_f1(const std::string& row, CellType cell,
                                               Regularizer reg) const {
  double sum = 0.0;
  int64_t n = 0;
  for (uint64_t seed : spec.seeds) {
    const CellResult* r = find(row, cell, reg, seed);
    if (r == nullptr || !r->ok) return std::nullopt;
    sum += r->test_f1;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

namespace {

struct GridData {
  DatasetSplit split;
  Vocab vocab = Vocab::from_tokens({"<pad>", "<unk>"});
  std::unique_ptr<FeatureCache> features;
  std::string dataset_hash;
  bool any_audio = false;
};

GridData prepare_grid_data(const GridSpec& spec) {
  GridData data;
  const std::string dataset_file = (fs::path(spec.dataset_dir) / "dataset.jsonl").string();
  if (!fs::exists(dataset_file)) throw IoError("grid dataset missing: " + dataset_file);
  data.dataset_hash = file_content_hash(dataset_file);

  std::vector<Example> examples = filter_by_length(load_dataset(dataset_file));
  data.split = split_dataset(examples, spec.split_fractions, spec.split_seed);

  std::vector<std::string> train_texts;
  train_texts.reserve(data.split.train.size());
  for (const Example& e : data.split.train) train_texts.push_back(e.text);
  data.vocab = Vocab::build(train_texts);

  for (const std::string& row : spec.rows) {
    if (model_row_by_name(row).input_mode != InputMode::kText) data.any_audio = true;
  }
  data.features = std::make_unique<FeatureCache>(spec.mfcc, spec.dataset_dir);
  if (data.any_audio) {
    // Warm the cache up front so workers only read it.
    for (const auto* subset : {&data.split.train, &data.split.valid, &data.split.test}) {
      for (const Example& e : *subset) data.features->features(e);
    }
  }
  return data;
}

std::string cell_hash(const GridSpec& spec, const GridData& data, const ModelConfig& model_config,
                      const TrainConfig& train_config, uint64_t seed) {
  nlohmann::json key{
      {"model", model_config.to_json()},
      {"train", train_config.to_json()},
      {"mfcc", spec.mfcc.to_json()},
      {"split", {{"fractions", spec.split_fractions}, {"seed", spec.split_seed}}},
      {"dataset", data.dataset_hash},
      {"seed", seed},
  };
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a64(key.dump())));
  return out;
}

std::vector<Example> declarative_test_examples(const GridData& data) {
  std::vector<Example> out;
  for (const Example& e : data.split.test) {
    auto it = e.meta.find("type");
    if (it != e.meta.end() && it->second == "declarative_question") out.push_back(e);
  }
  return out;
}

CellResult train_cell(const GridSpec& spec, const GridData& data, const CellKey& key,
                      const std::string& out_dir) {
  CellResult result;
  result.key = key;
  const auto started = std::chrono::steady_clock::now();

  const ModelRow& row = model_row_by_name(key.row);
  ModelConfig base;
  base.hidden = spec.hidden;
  base.embed_dim = spec.embed_dim;
  base.attention_dim = spec.attention_dim;
  base.dropout_rate = spec.dropout_rate;
  base.orthogonal_recurrent = spec.orthogonal_recurrent;
  base.seed = key.seed;
  base.vocab_size = data.vocab.size();
  base.audio_feat_dim = spec.mfcc.feature_dim();
  base.input_mode = row.input_mode;
  base.fusion = row.fusion;
  base.context_fn = row.context_fn;
  base.cell = key.cell;
  base.regularizer = key.reg;

  TrainConfig train_config = spec.train;
  train_config.seed = key.seed;

  result.content_hash = cell_hash(spec, data, base, train_config, key.seed);
  try {
    base.validate();
    QuestionDetector model(base);
    TrainLog log = fit(model, data.split, data.vocab, data.features.get(), train_config);
    result.valid_f1 = log.best_valid_f1;
    result.test_report =
        evaluate_f1(model, data.split.test, data.vocab, data.features.get(), 0.5, true);
    result.test_f1 = result.test_report.f1;

    if (row.context_fn == ContextFn::kC2) {
      const std::vector<Example> decl = declarative_test_examples(data);
      if (!decl.empty()) {
        const std::vector<double> scores =
            score_examples(model, decl, data.vocab, data.features.get());
        for (size_t i = 0; i < decl.size(); ++i) {
          result.declarative_scores.emplace_back(decl[i].id, scores[i]);
        }
      }
    }

    const std::string model_file =
        (fs::path(out_dir) / "models" / (key.name() + ".qdm")).string();
    nlohmann::json meta{{"vocab", data.vocab.tokens()},
                        {"mfcc", spec.mfcc.to_json()},
                        {"train", train_config.to_json()}};
    save_model(model, model_file, meta);
    result.model_file = model_file;

    TrainLog saved_log = log;
    saved_log.model_path = model_file;
    saved_log.save((fs::path(out_dir) / "models" / (key.name() + ".trainlog.jsonl")).string());
    result.ok = true;
  } catch (const std::exception& e) {
    result.ok = false;
    result.error = e.what();
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void write_tables(const GridResult& result, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "tables");
  const std::vector<std::pair<TableKind, std::string>> kinds = {
      {TableKind::kMain, "main"}, {TableKind::kLength, "length"}, {TableKind::kDeclarative, "declarative"}};
  const std::vector<std::pair<TableFormat, std::string>> formats = {
      {TableFormat::kText, "txt"}, {TableFormat::kCsv, "csv"}, {TableFormat::kLatex, "tex"}};
  for (const auto& [kind, kind_name] : kinds) {
    for (const auto& [format, ext] : formats) {
      std::ofstream os(fs::path(out_dir) / "tables" / (kind_name + "." + ext));
      os << emit_table(result, kind, format);
    }
  }
}

}  // namespace

GridResult run_grid(const GridSpec& spec, const std::string& out_dir, int jobs, bool resume) {
  spec.validate();
  fs::create_directories(fs::path(out_dir) / "cells");
  fs::create_directories(fs::path(out_dir) / "models");

  GridData data = prepare_grid_data(spec);

  std::vector<CellKey> keys;
  for (const std::string& row : spec.rows) {
    for (CellType cell : spec.cells) {
      for (Regularizer reg : spec.regularizers) {
        for (uint64_t seed : spec.seeds) keys.push_back({row, cell, reg, seed});
      }
    }
  }

  GridResult result;
  result.spec = spec;
  result.cells.resize(keys.size());

  std::atomic<size_t> next{0};
  std::atomic<int> trained{0};
  std::mutex log_mutex;
  const int workers = std::max(1, jobs);

  auto worker = [&]() {
    if (workers > 1) kernels::set_thread_cap(1);
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= keys.size()) break;
      const CellKey& key = keys[i];
      const std::string cell_file = (fs::path(out_dir) / "cells" / (key.name() + ".json")).string();

      if (resume && fs::exists(cell_file)) {
        std::ifstream is(cell_file);
        nlohmann::json j;
        is >> j;
        CellResult cached = CellResult::from_json(j);
        // Only reuse results produced from the same config + dataset.
        ModelConfig probe;  // hash inputs rebuilt exactly as train_cell does
        const ModelRow& row = model_row_by_name(key.row);
        probe.hidden = spec.hidden;
        probe.embed_dim = spec.embed_dim;
        probe.attention_dim = spec.attention_dim;
        probe.dropout_rate = spec.dropout_rate;
        probe.orthogonal_recurrent = spec.orthogonal_recurrent;
        probe.seed = key.seed;
        probe.vocab_size = data.vocab.size();
        probe.audio_feat_dim = spec.mfcc.feature_dim();
        probe.input_mode = row.input_mode;
        probe.fusion = row.fusion;
        probe.context_fn = row.context_fn;
        probe.cell = key.cell;
        probe.regularizer = key.reg;
        TrainConfig tc = spec.train;
        tc.seed = key.seed;
        if (cached.ok && cached.content_hash == cell_hash(spec, data, probe, tc, key.seed)) {
          result.cells[i] = std::move(cached);
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cout << "[grid] " << key.name() << ": cached (F1 " << result.cells[i].test_f1
                    << ")\n";
          continue;
        }
      }

      CellResult r = train_cell(spec, data, key, out_dir);
      {
        std::ofstream os(cell_file, std::ios::trunc);
        os << r.to_json().dump(2) << '\n';
      }
      trained.fetch_add(1);
      {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (r.ok) {
          std::cout << "[grid] " << key.name() << ": test F1 " << r.test_f1 << " ("
                    << r.seconds << "s)\n";
        } else {
          std::cout << "[grid] " << key.name() << ": FAILED: " << r.error << "\n";
        }
      }
      result.cells[i] = std::move(r);
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  result.trained = trained.load();
  write_tables(result, out_dir);
  return result;
}

namespace {

struct TableGrid {
  std::string title;
  std::vector<std::string> col_names;
  std::vector<std::string> row_names;
  std::vector<std::vector<std::string>> cells;  // [row][col]
  bool has_missing = false;
};

std::string format_f1_pct(double f1) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.1f", f1 * 100.0);
  return buf;
}

std::string format_score(double s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", s);
  return buf;
}

std::string render(const TableGrid& table, TableFormat format) {
  std::ostringstream os;
  if (format == TableFormat::kCsv) {
    os << table.title;
    for (const std::string& c : table.col_names) os << "," << c;
    os << "\n";
    for (size_t r = 0; r < table.row_names.size(); ++r) {
      os << table.row_names[r];
      for (const std::string& cell : table.cells[r]) os << "," << cell;
      os << "\n";
    }
  } else if (format == TableFormat::kLatex) {
    os << "\\begin{tabular}{|l|";
    for (size_t c = 0; c < table.col_names.size(); ++c) os << "c|";
    os << "}\n\\hline\n" << table.title;
    for (const std::string& c : table.col_names) os << " & " << c;
    os << " \\\\\n\\hline\n";
    for (size_t r = 0; r < table.row_names.size(); ++r) {
      os << table.row_names[r];
      for (const std::string& cell : table.cells[r]) {
        os << " & " << (cell == "\u2014" ? "--" : cell);
      }
      os << " \\\\\n";
    }
    os << "\\hline\n\\end{tabular}\n";
  } else {
    size_t w0 = table.title.size();
    for (const std::string& r : table.row_names) w0 = std::max(w0, r.size());
    std::vector<size_t> widths;
    for (size_t c = 0; c < table.col_names.size(); ++c) {
      size_t w = table.col_names[c].size();
      for (size_t r = 0; r < table.row_names.size(); ++r) w = std::max(w, table.cells[r][c].size());
      widths.push_back(w);
    }
    auto pad = [](const std::string& s, size_t w) {
      return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };
    os << pad(table.title, w0);
    for (size_t c = 0; c < table.col_names.size(); ++c) os << "  " << pad(table.col_names[c], widths[c]);
    os << "\n";
    for (size_t r = 0; r < table.row_names.size(); ++r) {
      os << pad(table.row_names[r], w0);
      for (size_t c = 0; c < table.col_names.size(); ++c) os << "  " << pad(table.cells[r][c], widths[c]);
      os << "\n";
    }
  }
  if (table.has_missing) os << (format == TableFormat::kCsv ? "# " : "") << "\u2014 = cell missing or failed\n";
  return os.str();
}

const std::vector<std::string> kAttentionRows = {"text_c2", "audio_c2", "combination_c2",
                                                 "condition_c2"};

}  // namespace

std::string emit_table(const GridResult& result, TableKind kind, TableFormat format) {
  TableGrid table;
  if (kind == TableKind::kMain) {
    table.title = "model";
    table.col_names = {"GRU", "LSTM", "GRU, D", "LSTM, D", "GRU, BN", "LSTM, BN"};
    const std::vector<std::pair<CellType, Regularizer>> cols = {
        {CellType::kGru, Regularizer::kNone},      {CellType::kLstm, Regularizer::kNone},
        {CellType::kGru, Regularizer::kDropout},   {CellType::kLstm, Regularizer::kDropout},
        {CellType::kGru, Regularizer::kBatchNorm}, {CellType::kLstm, Regularizer::kBatchNorm},
    };
    for (const std::string& row : result.spec.rows) {
      table.row_names.push_back(row);
      std::vector<std::string> line;
      for (const auto& [cell, reg] : cols) {
        const auto mean = result.mean_test_f1(row, cell, reg);
        if (mean.has_value()) {
          line.push_back(format_f1_pct(*mean));
        } else {
          line.push_back("\u2014");
          table.has_missing = true;
        }
      }
      table.cells.push_back(std::move(line));
    }
  } else if (kind == TableKind::kLength) {
    const CellType cell = cell_from_string(result.spec.analysis_cell);
    table.title = "bucket";
    table.col_names = kAttentionRows;
    for (const char* bucket : {"short", "intermediate", "long"}) {
      table.row_names.push_back(bucket);
      std::vector<std::string> line;
      for (const std::string& row : kAttentionRows) {
        double sum = 0.0;
        int64_t n = 0;
        for (uint64_t seed : result.spec.seeds) {
          const CellResult* r = result.find(row, cell, Regularizer::kNone, seed);
          if (r == nullptr || !r->ok) continue;
          auto it = r->test_report.buckets.find(bucket);
          if (it == r->test_report.buckets.end()) continue;
          sum += it->second.f1;
          ++n;
        }
        if (n > 0) {
          line.push_back(format_f1_pct(sum / static_cast<double>(n)));
        } else {
          line.push_back("\u2014");
          table.has_missing = true;
        }
      }
      table.cells.push_back(std::move(line));
    }
  } else {
    const CellType cell = cell_from_string(result.spec.analysis_cell);
    const uint64_t seed = result.spec.seeds.front();
    table.title = "example";
    table.col_names = kAttentionRows;

    // Row ids from the first family that carries scores.
    std::vector<std::string> ids;
    for (const std::string& row : kAttentionRows) {
      const CellResult* r = result.find(row, cell, Regularizer::kNone, seed);
      if (r != nullptr && r->ok && !r->declarative_scores.empty()) {
        for (const auto& [id, score] : r->declarative_scores) ids.push_back(id);
        break;
      }
    }
    if (static_cast<int>(ids.size()) > result.spec.declarative_examples) {
      ids.resize(static_cast<size_t>(result.spec.declarative_examples));
    }

    std::vector<double> totals(kAttentionRows.size(), 0.0);
    std::vector<int64_t> counts(kAttentionRows.size(), 0);
    for (const std::string& id : ids) {
      table.row_names.push_back(id);
      std::vector<std::string> line;
      for (size_t fi = 0; fi < kAttentionRows.size(); ++fi) {
        const CellResult* r = result.find(kAttentionRows[fi], cell, Regularizer::kNone, seed);
        bool found = false;
        if (r != nullptr && r->ok) {
          for (const auto& [rid, score] : r->declarative_scores) {
            if (rid == id) {
              line.push_back(format_score(score));
              totals[fi] += score;
              counts[fi] += 1;
              found = true;
              break;
            }
          }
        }
        if (!found) {
          line.push_back("\u2014");
          table.has_missing = true;
        }
      }
      table.cells.push_back(std::move(line));
    }
    table.row_names.push_back("mean");
    std::vector<std::string> mean_line;
    for (size_t fi = 0; fi < kAttentionRows.size(); ++fi) {
      if (counts[fi] > 0) {
        mean_line.push_back(format_score(totals[fi] / static_cast<double>(counts[fi])));
      } else {
        mean_line.push_back("\u2014");
        table.has_missing = true;
      }
    }
    table.cells.push_back(std::move(mean_line));
  }
  return render(table, format);
}

DeclarativeAnalysis declarative_analysis(std::vector<QuestionDetector*> models,
                                         const std::vector<std::string>& names,
                                         const std::vector<Example>& examples, const Vocab& vocab,
                                         FeatureCache* features) {
  if (models.size() != names.size() || models.empty()) {
    throw ContractError("declarative_analysis: models/names mismatch");
  }
  bool any_declarative = false;
  for (const Example& e : examples) {
    auto it = e.meta.find("type");
    if (it != e.meta.end() && it->second == "declarative_question") any_declarative = true;
  }
  if (!any_declarative) {
    throw ContractError("declarative_analysis: no declarative-question examples");
  }

  DeclarativeAnalysis out;
  out.family_names = names;
  for (const Example& e : examples) {
    out.example_ids.push_back(e.id);
    out.texts.push_back(e.text);
  }
  out.scores.assign(examples.size(), std::vector<double>(models.size(), 0.0));
  out.aggregate_mean.assign(models.size(), 0.0);
  for (size_t mi = 0; mi < models.size(); ++mi) {
    const std::vector<double> scores = score_examples(*models[mi], examples, vocab, features);
    double sum = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
      out.scores[i][mi] = scores[i];
      auto it = examples[i].meta.find("type");
      if (it != examples[i].meta.end() && it->second == "declarative_question") {
        sum += scores[i];
        ++n;
      }
    }
    out.aggregate_mean[mi] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  return out;
}

}  // namespace qdet
