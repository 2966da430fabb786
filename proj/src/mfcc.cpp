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

#include "qdet/mfcc.hpp"

#include <cmath>
#include <complex>

#include "qdet/errors.hpp"

namespace qdet {

void MfccConfig::validate() const {
  if (hop_ms() <= 0.0) {
    throw ConfigError("mfcc: overlap " + std::to_string(overlap_ms) + "ms must be below frame " +
                      std::to_string(frame_ms) + "ms");
  }
  if (n_coeffs > n_mels) throw ConfigError("mfcc: n_coeffs must not exceed n_mels");
  if (n_mels < 1 || n_coeffs < 1 || chunk < 1) throw ConfigError("mfcc: counts must be positive");
}

nlohmann::json MfccConfig::to_json() const {
  return nlohmann::json{
      {"frame_ms", frame_ms},   {"overlap_ms", overlap_ms}, {"n_mels", n_mels},
      {"n_coeffs", n_coeffs},   {"pre_emphasis", pre_emphasis},
      {"log_floor", log_floor}, {"chunk", chunk},
  };
}

MfccConfig MfccConfig::from_json(const nlohmann::json& j) {
  MfccConfig c;
  c.frame_ms = j.value("frame_ms", c.frame_ms);
  c.overlap_ms = j.value("overlap_ms", c.overlap_ms);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.n_coeffs = j.value("n_coeffs", c.n_coeffs);
  c.pre_emphasis = j.value("pre_emphasis", c.pre_emphasis);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.chunk = j.value("chunk", c.chunk);
  c.validate();
  return c;
}

int64_t frame_length_samples(const MfccConfig& config, int sample_rate) {
  return std::llround(config.frame_ms * sample_rate / 1000.0);
}

int64_t hop_length_samples(const MfccConfig& config, int sample_rate) {
  return std::llround(config.hop_ms() * sample_rate / 1000.0);
}

int64_t frame_count(const MfccConfig& config, int sample_rate, int64_t n_samples) {
  const int64_t frame = frame_length_samples(config, sample_rate);
  const int64_t hop = hop_length_samples(config, sample_rate);
  if (n_samples < frame) return 0;
  return (n_samples - frame) / hop + 1;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 FFT.
void fft(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Triangular filterbank evaluated at the FFT bin frequencies,
// [n_mels x (nfft/2 + 1)].
std::vector<std::vector<double>> build_filterbank(const MfccConfig& config, int sample_rate,
                                                  int64_t nfft) {
  const int64_t bins = nfft / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> mel_pts(static_cast<size_t>(config.n_mels) + 2);
  for (size_t i = 0; i < mel_pts.size(); ++i) {
    mel_pts[i] = mel_hi * static_cast<double>(i) / static_cast<double>(config.n_mels + 1);
  }
  std::vector<double> hz_pts(mel_pts.size());
  for (size_t i = 0; i < mel_pts.size(); ++i) hz_pts[i] = mel_to_hz(mel_pts[i]);

  std::vector<std::vector<double>> fb(static_cast<size_t>(config.n_mels),
                                      std::vector<double>(static_cast<size_t>(bins), 0.0));
  for (int m = 0; m < config.n_mels; ++m) {
    const double lo = hz_pts[static_cast<size_t>(m)];
    const double mid = hz_pts[static_cast<size_t>(m) + 1];
    const double hi = hz_pts[static_cast<size_t>(m) + 2];
    for (int64_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f >= lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi) {
        w = (hi - f) / (hi - mid);
      }
      fb[static_cast<size_t>(m)][static_cast<size_t>(k)] = w;
    }
  }
  return fb;
}

}  // namespace

std::vector<double> mel_filter_centers(const MfccConfig& config, int sample_rate) {
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(static_cast<size_t>(config.n_mels));
  for (int m = 0; m < config.n_mels; ++m) {
    centers[static_cast<size_t>(m)] =
        mel_to_hz(mel_hi * static_cast<double>(m + 1) / static_cast<double>(config.n_mels + 1));
  }
  return centers;
}

Tensor mel_spectrogram(const AudioSignal& signal, const MfccConfig& config) {
  config.validate();
  if (signal.sample_rate <= 0) throw ContractError("mfcc: sample rate must be positive");
  const int64_t frame = frame_length_samples(config, signal.sample_rate);
  const int64_t hop = hop_length_samples(config, signal.sample_rate);
  const int64_t n = static_cast<int64_t>(signal.samples.size());
  const int64_t frames = frame_count(config, signal.sample_rate, n);
  if (frames == 0) {
    throw InputError("mfcc: signal of " + std::to_string(n) + " samples is shorter than one frame (" +
                     std::to_string(frame) + " samples)");
  }

  // Pre-emphasis over the whole signal; y[0] = x[0].
  std::vector<double> emphasized(static_cast<size_t>(n));
  emphasized[0] = signal.samples[0];
  for (int64_t i = 1; i < n; ++i) {
    emphasized[static_cast<size_t>(i)] =
        signal.samples[static_cast<size_t>(i)] - config.pre_emphasis * signal.samples[static_cast<size_t>(i - 1)];
  }

  std::vector<double> window(static_cast<size_t>(frame));
  for (int64_t i = 0; i < frame; ++i) {
    window[static_cast<size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(frame - 1));
  }

  const int64_t nfft = next_pow2(frame);
  const int64_t bins = nfft / 2 + 1;
  const auto fb = build_filterbank(config, signal.sample_rate, nfft);

  Tensor out({frames, config.n_mels});
  std::vector<std::complex<double>> buf(static_cast<size_t>(nfft));
  for (int64_t f = 0; f < frames; ++f) {
    const int64_t start = f * hop;
    for (int64_t i = 0; i < frame; ++i) {
      buf[static_cast<size_t>(i)] = emphasized[static_cast<size_t>(start + i)] * window[static_cast<size_t>(i)];
    }
    std::fill(buf.begin() + frame, buf.end(), std::complex<double>(0.0, 0.0));
    fft(buf);
    for (int m = 0; m < config.n_mels; ++m) {
      double e = 0.0;
      const auto& w = fb[static_cast<size_t>(m)];
      for (int64_t k = 0; k < bins; ++k) {
        e += w[static_cast<size_t>(k)] * std::norm(buf[static_cast<size_t>(k)]);
      }
      out.at(f, m) = e;
    }
  }
  return out;
}

Tensor dct_matrix(int n_coeffs, int n_mels) {
  Tensor d({n_coeffs, n_mels});
  const double scale0 = std::sqrt(1.0 / n_mels);
  const double scale = std::sqrt(2.0 / n_mels);
  for (int k = 0; k < n_coeffs; ++k) {
    for (int j = 0; j < n_mels; ++j) {
      d.at(k, j) = (k == 0 ? scale0 : scale) *
                   std::cos(M_PI * k * (2.0 * j + 1.0) / (2.0 * n_mels));
    }
  }
  return d;
}

Tensor mfcc(const AudioSignal& signal, const MfccConfig& config) {
  const Tensor energies = mel_spectrogram(signal, config);
  const int64_t frames = energies.dim(0);
  const Tensor d = dct_matrix(config.n_coeffs, config.n_mels);
  Tensor out({frames, config.n_coeffs});
  std::vector<double> logs(static_cast<size_t>(config.n_mels));
  for (int64_t f = 0; f < frames; ++f) {
    for (int m = 0; m < config.n_mels; ++m) {
      logs[static_cast<size_t>(m)] = std::log(std::max(energies.at(f, m), config.log_floor));
    }
    for (int k = 0; k < config.n_coeffs; ++k) {
      double acc = 0.0;
      for (int m = 0; m < config.n_mels; ++m) acc += d.at(k, m) * logs[static_cast<size_t>(m)];
      out.at(f, k) = acc;
    }
  }
  return out;
}

Tensor chunk_frames(const Tensor& frames, int chunk) {
  if (frames.rank() != 2 || frames.dim(0) < 1) {
    throw ContractError("chunk_frames: need at least one frame");
  }
  const int64_t f_count = frames.dim(0);
  const int64_t d = frames.dim(1);
  const int64_t chunks = (f_count + chunk - 1) / chunk;
  Tensor out({chunks, static_cast<int64_t>(chunk) * d});
  for (int64_t c = 0; c < chunks; ++c) {
    for (int k = 0; k < chunk; ++k) {
      const int64_t src = std::min(c * chunk + k, f_count - 1);  // repeat last frame
      for (int64_t j = 0; j < d; ++j) {
        out.at(c, static_cast<int64_t>(k) * d + j) = frames.at(src, j);
      }
    }
  }
  return out;
}

Tensor audio_features(const AudioSignal& signal, const MfccConfig& config) {
  return chunk_frames(mfcc(signal, config), config.chunk);
}

}  // namespace qdet
