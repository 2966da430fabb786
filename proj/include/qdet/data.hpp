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

#ifndef QDET_DATA_HPP_
#define QDET_DATA_HPP_

#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdet/batch.hpp"
#include "qdet/mfcc.hpp"
#include "qdet/text.hpp"

namespace qdet {

// One utterance. Audio is either a WAV path (relative to the dataset
// directory) or an inline feature matrix [T x feat].
struct Example {
  std::string id;
  std::string text;
  int label = 0;  // 1 = question
  std::optional<std::string> wav;
  std::optional<Tensor> features;
  std::map<std::string, std::string> meta;

  bool has_audio() const { return wav.has_value() || features.has_value(); }
};

// Line-delimited records: one JSON object per line with fields `id`,
// `text`, `label`, exactly one of `wav` | `features`, optional `meta`.
std::vector<Example> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<Example>& examples);

// Keep examples whose cleaned token count lies in [min_words, max_words].
std::vector<Example> filter_by_length(const std::vector<Example>& examples, int min_words = 3,
                                      int max_words = 25);

struct DatasetSplit {
  std::vector<Example> train, valid, test;
};

// Stratified by label: deterministic shuffle per class, then partition by
// the fractions (largest remainder). Throws if any split is empty.
DatasetSplit split_dataset(const std::vector<Example>& examples,
                           const std::array<double, 3>& fractions, uint64_t seed);

enum class LengthBucket { kShort, kIntermediate, kLong };

// <5 words short, 5..20 intermediate, >20 long.
LengthBucket length_bucket(const Example& example);
std::string to_string(LengthBucket b);

// Precomputed audio features per example id, so epochs don't re-run the
// MFCC pipeline. `dataset_dir` anchors relative WAV paths.
class FeatureCache {
 public:
  FeatureCache(const MfccConfig& config, std::string dataset_dir)
      : config_(config), dataset_dir_(std::move(dataset_dir)) {}

  const Tensor& features(const Example& example);
  const MfccConfig& config() const { return config_; }

 private:
  MfccConfig config_;
  std::string dataset_dir_;
  std::unordered_map<std::string, Tensor> cache_;
};

struct BatchOptions {
  int batch_size = 32;
  uint64_t shuffle_seed = 0;
  bool shuffle = true;
  // Sort into length-similar groups before batching to limit padding.
  bool sort_by_length = false;
  bool need_text = true;
  bool need_audio = true;
};

// Padded minibatches. A trailing singleton batch is folded into its
// predecessor so batch statistics stay well-defined.
std::vector<SequenceBatch> make_batches(const std::vector<Example>& examples, const Vocab& vocab,
                                        FeatureCache* features, const BatchOptions& options);

}  // namespace qdet

#endif  // QDET_DATA_HPP_
