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

#ifndef QDET_SYNTH_HPP_
#define QDET_SYNTH_HPP_

#include <json.hpp>
#include <string>
#include <vector>

#include "qdet/data.hpp"

namespace qdet {

// Synthetic multimodal corpus. Four utterance families: yes-no questions,
// wh-questions, declarative questions and statements. Declarative
// questions and statements draw from the SAME text templates -- their only
// separating signal is the pitch contour: questions rise over the final
// quarter of the clip, statements fall.
struct SynthConfig {
  int n_examples = 2000;
  double p_yesno = 0.20;
  double p_wh = 0.15;
  double p_declarative_question = 0.15;
  double p_statement = 0.50;
  int sample_rate = 16000;
  uint64_t seed = 1;
  double f0_base = 120.0;
  double f0_jitter = 0.10;          // per-example relative pitch spread
  double question_rise = 0.30;      // relative f0 rise over the final quarter
  double statement_fall = 0.15;     // relative f0 fall over the final quarter
  double noise_level = 0.01;
  double seconds_per_word = 0.25;
  double min_duration_s = 0.80;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

// Generates examples and writes one WAV per example under out_dir/wav/.
// Returns the examples with relative wav paths; the caller persists the
// records file. Output is a pure function of the config.
std::vector<Example> generate_synthetic(const SynthConfig& config, const std::string& out_dir);

// Writes the records file + WAVs: the `synth` CLI entry point.
void write_synthetic_corpus(const SynthConfig& config, const std::string& out_dir);

}  // namespace qdet

#endif  // QDET_SYNTH_HPP_
