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

#include "qdet/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "qdet/errors.hpp"

namespace qdet {

namespace {

template <typename T>
T read_pod(std::istream& is, const char* field) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(std::string("WAV: truncated while reading ") + field);
  return v;
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("WAV: cannot open " + path);

  char riff[4];
  is.read(riff, 4);
  if (!is || std::memcmp(riff, "RIFF", 4) != 0) throw IoError("WAV: missing RIFF tag in " + path);
  read_pod<uint32_t>(is, "riff size");
  char wave[4];
  is.read(wave, 4);
  if (!is || std::memcmp(wave, "WAVE", 4) != 0) throw IoError("WAV: missing WAVE tag in " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  AudioSignal out;

  // Chunk walk; unknown chunks are skipped.
  while (true) {
    char id[4];
    is.read(id, 4);
    if (!is) break;
    const uint32_t size = read_pod<uint32_t>(is, "chunk size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = read_pod<uint16_t>(is, "format tag");
      channels = read_pod<uint16_t>(is, "channel count");
      sample_rate = read_pod<uint32_t>(is, "sample rate");
      read_pod<uint32_t>(is, "byte rate");
      read_pod<uint16_t>(is, "block align");
      bits = read_pod<uint16_t>(is, "bits per sample");
      if (size > 16) is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw IoError("WAV: data chunk before fmt chunk in " + path);
      if (format != 1) throw IoError("WAV: format tag " + std::to_string(format) + " is not PCM in " + path);
      if (channels != 1) {
        throw IoError("WAV: channel count " + std::to_string(channels) + " is not mono in " + path);
      }
      if (bits != 16) throw IoError("WAV: bits per sample " + std::to_string(bits) + " != 16 in " + path);
      const uint32_t n = size / 2;
      out.samples.resize(n);
      std::vector<int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
      if (!is) throw IoError("WAV: truncated data chunk in " + path);
      for (uint32_t i = 0; i < n; ++i) out.samples[i] = raw[i] / 32768.0;
      out.sample_rate = static_cast<int>(sample_rate);
      return out;
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
      if (!is) throw IoError("WAV: truncated chunk in " + path);
    }
  }
  throw IoError("WAV: no data chunk in " + path);
}

void write_wav(const std::string& path, const AudioSignal& signal) {
  if (signal.sample_rate <= 0) throw ContractError("write_wav: sample rate must be positive");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("WAV: cannot open for writing " + path);

  const uint32_t n = static_cast<uint32_t>(signal.samples.size());
  const uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  write_pod<uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_pod<uint32_t>(os, 16);
  write_pod<uint16_t>(os, 1);  // PCM
  write_pod<uint16_t>(os, 1);  // mono
  write_pod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate));
  write_pod<uint32_t>(os, static_cast<uint32_t>(signal.sample_rate) * 2);
  write_pod<uint16_t>(os, 2);
  write_pod<uint16_t>(os, 16);
  os.write("data", 4);
  write_pod<uint32_t>(os, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    const double clamped = std::clamp(signal.samples[i], -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<int16_t>(std::lrint(clamped * 32768.0));
    write_pod<int16_t>(os, q);
  }
  if (!os) throw IoError("WAV: write failed for " + path);
}

}  // namespace qdet
