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

#include "qdet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qdet/rng.hpp"

namespace qdet {

namespace {

using nlohmann::json;

Example parse_record(const json& j, int64_t line_no) {
  Example e;
  if (!j.contains("id") || !j.at("id").is_string()) {
    throw IoError("dataset line " + std::to_string(line_no) + ": missing string field 'id'");
  }
  if (!j.contains("text") || !j.at("text").is_string()) {
    throw IoError("dataset line " + std::to_string(line_no) + ": missing string field 'text'");
  }
  if (!j.contains("label") || !j.at("label").is_number_integer()) {
    throw IoError("dataset line " + std::to_string(line_no) + ": missing integer field 'label'");
  }
  e.id = j.at("id").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.label = j.at("label").get<int>();
  if (e.label != 0 && e.label != 1) {
    throw IoError("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
  }
  const bool has_wav = j.contains("wav");
  const bool has_features = j.contains("features");
  if (has_wav == has_features) {
    throw IoError("dataset line " + std::to_string(line_no) +
                  ": need exactly one of 'wav' or 'features'");
  }
  if (has_wav) {
    e.wav = j.at("wav").get<std::string>();
  } else {
    const auto& rows = j.at("features");
    if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
      throw IoError("dataset line " + std::to_string(line_no) + ": 'features' must be [T x d]");
    }
    const int64_t t_count = static_cast<int64_t>(rows.size());
    const int64_t d = static_cast<int64_t>(rows[0].size());
    Tensor feat({t_count, d});
    for (int64_t t = 0; t < t_count; ++t) {
      const auto& row = rows[static_cast<size_t>(t)];
      if (static_cast<int64_t>(row.size()) != d) {
        throw IoError("dataset line " + std::to_string(line_no) + ": ragged 'features' rows");
      }
      for (int64_t k = 0; k < d; ++k) feat.at(t, k) = row[static_cast<size_t>(k)].get<double>();
    }
    e.features = std::move(feat);
  }
  if (j.contains("meta")) {
    for (const auto& [key, value] : j.at("meta").items()) {
      e.meta[key] = value.get<std::string>();
    }
  }
  return e;
}

json record_to_json(const Example& e) {
  json j{{"id", e.id}, {"text", e.text}, {"label", e.label}};
  if (e.wav.has_value()) {
    j["wav"] = *e.wav;
  } else if (e.features.has_value()) {
    const Tensor& f = *e.features;
    json rows = json::array();
    for (int64_t t = 0; t < f.dim(0); ++t) {
      json row = json::array();
      for (int64_t k = 0; k < f.dim(1); ++k) row.push_back(f.at(t, k));
      rows.push_back(std::move(row));
    }
    j["features"] = std::move(rows);
  }
  if (!e.meta.empty()) j["meta"] = e.meta;
  return j;
}

}  // namespace

std::vector<Example> load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset file: " + path);
  std::vector<Example> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("dataset line " + std::to_string(line_no) + ": parse error: " + e.what());
    }
    out.push_back(parse_record(j, line_no));
  }
  return out;
}

void save_dataset(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write dataset file: " + path);
  for (const Example& e : examples) os << record_to_json(e).dump() << '\n';
}

std::vector<Example> filter_by_length(const std::vector<Example>& examples, int min_words,
                                      int max_words) {
  std::vector<Example> out;
  out.reserve(examples.size());
  for (const Example& e : examples) {
    const int words = static_cast<int>(clean_and_tokenize(e.text).size());
    if (words >= min_words && words <= max_words) out.push_back(e);
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<Example>& examples,
                           const std::array<double, 3>& fractions, uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) total += f;
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  // Stratify: shuffle each class, then cut with largest-remainder rounding.
  std::array<std::vector<const Example*>, 2> by_label;
  for (const Example& e : examples) by_label[static_cast<size_t>(e.label)].push_back(&e);

  std::array<std::vector<const Example*>, 3> splits;
  for (int label = 0; label < 2; ++label) {
    auto& group = by_label[static_cast<size_t>(label)];
    RandomStream rng(RandomStream::derive(seed, label == 0 ? "split.neg" : "split.pos"));
    rng.shuffle(group.begin(), group.end());

    const int64_t n = static_cast<int64_t>(group.size());
    std::array<int64_t, 3> counts{};
    std::array<double, 3> remainders{};
    int64_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = fractions[static_cast<size_t>(s)] * static_cast<double>(n);
      counts[static_cast<size_t>(s)] = static_cast<int64_t>(std::floor(exact));
      remainders[static_cast<size_t>(s)] = exact - std::floor(exact);
      assigned += counts[static_cast<size_t>(s)];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s) {
        if (remainders[static_cast<size_t>(s)] > remainders[static_cast<size_t>(best)]) best = s;
      }
      counts[static_cast<size_t>(best)] += 1;
      remainders[static_cast<size_t>(best)] = -1.0;
      ++assigned;
    }
    int64_t offset = 0;
    for (int s = 0; s < 3; ++s) {
      for (int64_t i = 0; i < counts[static_cast<size_t>(s)]; ++i) {
        splits[static_cast<size_t>(s)].push_back(group[static_cast<size_t>(offset + i)]);
      }
      offset += counts[static_cast<size_t>(s)];
    }
  }

  DatasetSplit out;
  std::array<std::vector<Example>*, 3> dests{&out.train, &out.valid, &out.test};
  for (int s = 0; s < 3; ++s) {
    auto& split = splits[static_cast<size_t>(s)];
    RandomStream rng(RandomStream::derive(seed, "split.mix" + std::to_string(s)));
    rng.shuffle(split.begin(), split.end());
    for (const Example* e : split) dests[static_cast<size_t>(s)]->push_back(*e);
  }
  if (out.train.empty() || out.valid.empty() || out.test.empty()) {
    throw ConfigError("split produced an empty subset (train " + std::to_string(out.train.size()) +
                      ", valid " + std::to_string(out.valid.size()) + ", test " +
                      std::to_string(out.test.size()) + ")");
  }
  return out;
}

LengthBucket length_bucket(const Example& example) {
  const int words = static_cast<int>(clean_and_tokenize(example.text).size());
  if (words < 5) return LengthBucket::kShort;
  if (words <= 20) return LengthBucket::kIntermediate;
  return LengthBucket::kLong;
}

std::string to_string(LengthBucket b) {
  switch (b) {
    case LengthBucket::kShort: return "short";
    case LengthBucket::kIntermediate: return "intermediate";
    case LengthBucket::kLong: return "long";
  }
  return "?";
}

const Tensor& FeatureCache::features(const Example& example) {
  auto it = cache_.find(example.id);
  if (it != cache_.end()) return it->second;
  Tensor feat;
  if (example.features.has_value()) {
    feat = *example.features;
  } else if (example.wav.has_value()) {
    const std::filesystem::path p = std::filesystem::path(dataset_dir_) / *example.wav;
    feat = audio_features(read_wav(p.string()), config_);
  } else {
    throw InputError("example '" + example.id + "' has no audio modality");
  }
  if (feat.dim(1) != config_.feature_dim()) {
    throw DimensionError("example '" + example.id + "' features are " + feat.shape_str() +
                         ", expected width " + std::to_string(config_.feature_dim()));
  }
  return cache_.emplace(example.id, std::move(feat)).first->second;
}

std::vector<SequenceBatch> make_batches(const std::vector<Example>& examples, const Vocab& vocab,
                                        FeatureCache* features, const BatchOptions& options) {
  std::vector<const Example*> order;
  order.reserve(examples.size());
  for (const Example& e : examples) order.push_back(&e);

  if (options.shuffle) {
    RandomStream rng(options.shuffle_seed);
    rng.shuffle(order.begin(), order.end());
  }
  if (options.sort_by_length) {
    std::stable_sort(order.begin(), order.end(), [](const Example* a, const Example* b) {
      return clean_and_tokenize(a->text).size() < clean_and_tokenize(b->text).size();
    });
  }

  std::vector<std::pair<int64_t, int64_t>> ranges;  // [begin, end)
  const int64_t n = static_cast<int64_t>(order.size());
  for (int64_t begin = 0; begin < n; begin += options.batch_size) {
    ranges.emplace_back(begin, std::min<int64_t>(begin + options.batch_size, n));
  }
  // Fold a trailing singleton into the previous batch.
  if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }
  if (options.sort_by_length && options.shuffle && ranges.size() > 1) {
    RandomStream rng(RandomStream::derive(options.shuffle_seed, "batch.order"));
    rng.shuffle(ranges.begin(), ranges.end());
  }

  std::vector<SequenceBatch> batches;
  batches.reserve(ranges.size());
  for (const auto& [begin, end] : ranges) {
    SequenceBatch batch;
    batch.n = static_cast<int>(end - begin);

    if (options.need_text) {
      std::vector<std::vector<int>> ids;
      ids.reserve(static_cast<size_t>(batch.n));
      int max_len = 1;
      for (int64_t i = begin; i < end; ++i) {
        ids.push_back(vocab.encode(clean_and_tokenize(order[static_cast<size_t>(i)]->text)));
        max_len = std::max(max_len, static_cast<int>(ids.back().size()));
      }
      batch.text_max = max_len;
      batch.token_ids.assign(static_cast<size_t>(batch.n) * max_len, kPadId);
      for (int b = 0; b < batch.n; ++b) {
        const auto& row = ids[static_cast<size_t>(b)];
        batch.text_lengths.push_back(static_cast<int>(row.size()));
        for (size_t t = 0; t < row.size(); ++t) {
          batch.token_ids[static_cast<size_t>(b) * max_len + t] = row[t];
        }
      }
    }

    if (options.need_audio) {
      if (features == nullptr) throw ContractError("make_batches: audio requested without features");
      std::vector<const Tensor*> feats;
      feats.reserve(static_cast<size_t>(batch.n));
      int max_len = 1;
      for (int64_t i = begin; i < end; ++i) {
        const Tensor& f = features->features(*order[static_cast<size_t>(i)]);
        feats.push_back(&f);
        max_len = std::max(max_len, static_cast<int>(f.dim(0)));
      }
      batch.audio_max = max_len;
      batch.audio_feat_dim = features->config().feature_dim();
      batch.audio_features = Tensor::zeros({batch.n, max_len, batch.audio_feat_dim});
      for (int b = 0; b < batch.n; ++b) {
        const Tensor& f = *feats[static_cast<size_t>(b)];
        batch.audio_lengths.push_back(static_cast<int>(f.dim(0)));
        for (int64_t t = 0; t < f.dim(0); ++t) {
          for (int64_t k = 0; k < batch.audio_feat_dim; ++k) {
            batch.audio_features.at(b, t, k) = f.at(t, k);
          }
        }
      }
    }

    for (int64_t i = begin; i < end; ++i) {
      batch.labels.push_back(static_cast<double>(order[static_cast<size_t>(i)]->label));
      batch.example_ids.push_back(order[static_cast<size_t>(i)]->id);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace qdet
