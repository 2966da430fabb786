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

#ifndef QDET_WAV_HPP_
#define QDET_WAV_HPP_

#include <string>
#include <vector>

namespace qdet {

// Mono audio in [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// 16-bit PCM mono RIFF/WAVE only. int16 samples are scaled by 1/32768.
AudioSignal read_wav(const std::string& path);

// Quantizes to int16 (clamping to [-1, 1)) and writes a canonical header.
void write_wav(const std::string& path, const AudioSignal& signal);

}  // namespace qdet

#endif  // QDET_WAV_HPP_
