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

#ifndef QDET_MFCC_HPP_
#define QDET_MFCC_HPP_

#include <json.hpp>
#include <vector>

#include "qdet/tensor.hpp"
#include "qdet/wav.hpp"

namespace qdet {

// 40 ms frames with 15 ms overlap (25 ms hop), 26 mel filters, 13
// cepstral coefficients, 4 frames concatenated per model step.
struct MfccConfig {
  double frame_ms = 40.0;
  double overlap_ms = 15.0;
  int n_mels = 26;
  int n_coeffs = 13;
  double pre_emphasis = 0.97;
  double log_floor = 1e-10;
  int chunk = 4;

  double hop_ms() const { return frame_ms - overlap_ms; }
  int64_t feature_dim() const { return static_cast<int64_t>(chunk) * n_coeffs; }

  void validate() const;
  nlohmann::json to_json() const;
  static MfccConfig from_json(const nlohmann::json& j);
};

int64_t frame_length_samples(const MfccConfig& config, int sample_rate);
int64_t hop_length_samples(const MfccConfig& config, int sample_rate);
int64_t frame_count(const MfccConfig& config, int sample_rate, int64_t n_samples);

// Hz positions of the triangular filter peaks.
std::vector<double> mel_filter_centers(const MfccConfig& config, int sample_rate);

// Raw (not logged) mel filterbank energies of the power spectrum,
// [frames x n_mels].
Tensor mel_spectrogram(const AudioSignal& signal, const MfccConfig& config);

// Orthonormal type-II DCT matrix [n_coeffs x n_mels].
Tensor dct_matrix(int n_coeffs, int n_mels);

// Pre-emphasis -> Hamming frames -> power spectrum -> mel filterbank ->
// log (floored) -> DCT. [frames x n_coeffs].
Tensor mfcc(const AudioSignal& signal, const MfccConfig& config);

// Concatenates groups of `chunk` consecutive frames; a trailing partial
// group is padded by repeating the last frame. [ceil(F/chunk) x chunk*d].
Tensor chunk_frames(const Tensor& frames, int chunk);

// Full audio featurization: mfcc + chunking.
Tensor audio_features(const AudioSignal& signal, const MfccConfig& config);

}  // namespace qdet

#endif  // QDET_MFCC_HPP_
