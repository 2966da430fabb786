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

#ifndef QDET_BATCH_HPP_
#define QDET_BATCH_HPP_

#include <string>
#include <vector>

#include "qdet/tensor.hpp"

namespace qdet {

// One padded minibatch. Both modalities are optional; masks are prefix
// masks derived from the per-example lengths.
struct SequenceBatch {
  int n = 0;

  std::vector<int> token_ids;  // row-major [n x text_max]; empty if no text
  std::vector<int> text_lengths;
  int text_max = 0;

  Tensor audio_features;  // [n x audio_max x feat]; empty if no audio
  std::vector<int> audio_lengths;
  int audio_max = 0;
  int64_t audio_feat_dim = 0;

  std::vector<double> labels;
  std::vector<std::string> example_ids;

  bool has_text() const { return text_max > 0; }
  bool has_audio() const { return audio_max > 0; }

  // Token column for timestep t.
  std::vector<int> token_column(int t) const {
    std::vector<int> col(static_cast<size_t>(n));
    for (int b = 0; b < n; ++b) col[static_cast<size_t>(b)] = token_ids[static_cast<size_t>(b) * text_max + t];
    return col;
  }

  // Audio frame slab [n x feat] for timestep t.
  Tensor audio_step(int t) const {
    Tensor out({n, audio_feat_dim});
    for (int b = 0; b < n; ++b) {
      for (int64_t j = 0; j < audio_feat_dim; ++j) {
        out.at(b, j) = audio_features.at(b, t, j);
      }
    }
    return out;
  }
};

}  // namespace qdet

#endif  // QDET_BATCH_HPP_
