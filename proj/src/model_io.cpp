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

#include <cstring>
#include <fstream>

#include "qdet/model.hpp"

namespace qdet {

namespace {

constexpr char kMagic[8] = {'Q', 'D', 'E', 'T', 'M', 'D', 'L', '1'};
constexpr uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T* v, const char* what) {
  is.read(reinterpret_cast<char*>(v), sizeof(T));
  if (!is) throw IoError(std::string("model archive truncated while reading ") + what);
}

}  // namespace

void save_model(QuestionDetector& model, const std::string& path, const nlohmann::json& extra_meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open model file for writing: " + path);

  nlohmann::json header{
      {"format_version", kFormatVersion},
      {"model", model.config().to_json()},
      {"meta", extra_meta},
  };
  const std::string header_str = header.dump();

  os.write(kMagic, sizeof(kMagic));
  write_pod(os, static_cast<uint64_t>(header_str.size()));
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto state = model.state_tensors();
  write_pod(os, static_cast<uint32_t>(state.size()));
  for (auto& [name, tensor] : state) {
    write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<uint32_t>(tensor->rank()));
    for (int i = 0; i < tensor->rank(); ++i) write_pod(os, static_cast<uint64_t>(tensor->dim(i)));
    os.write(reinterpret_cast<const char*>(tensor->data()),
             static_cast<std::streamsize>(tensor->size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed for model file: " + path);
}

LoadedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path);

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a model archive (bad magic): " + path);
  }
  uint64_t header_len = 0;
  read_pod(is, &header_len, "header length");
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw IoError("model archive truncated while reading header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model archive header is not valid JSON: ") + e.what());
  }
  const uint32_t version = header.at("format_version").get<uint32_t>();
  if (version != kFormatVersion) {
    throw IoError("unsupported model format version " + std::to_string(version));
  }

  LoadedModel out;
  ModelConfig config = ModelConfig::from_json(header.at("model"));
  out.model = std::make_unique<QuestionDetector>(config);
  out.extra_meta = header.value("meta", nlohmann::json::object());

  auto state = out.model->state_tensors();
  std::vector<bool> filled(state.size(), false);

  uint32_t n_tensors = 0;
  read_pod(is, &n_tensors, "tensor count");
  if (n_tensors != state.size()) {
    throw ConfigError("model archive has " + std::to_string(n_tensors) + " tensors, config expects " +
                      std::to_string(state.size()));
  }
  for (uint32_t k = 0; k < n_tensors; ++k) {
    uint32_t name_len = 0;
    read_pod(is, &name_len, "tensor name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw IoError("model archive truncated while reading tensor name");
    uint32_t rank = 0;
    read_pod(is, &rank, "tensor rank");
    std::vector<int64_t> dims(rank);
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t d = 0;
      read_pod(is, &d, "tensor dims");
      dims[i] = static_cast<int64_t>(d);
    }

    size_t slot = state.size();
    for (size_t i = 0; i < state.size(); ++i) {
      if (!filled[i] && state[i].first == name) {
        slot = i;
        break;
      }
    }
    if (slot == state.size()) {
      throw ConfigError("model archive tensor '" + name + "' does not exist in the declared config");
    }
    Tensor* dst = state[slot].second;
    if (dst->shape() != dims) {
      throw ConfigError("model archive tensor '" + name + "' has shape " + Tensor::shape_str(dims) +
                        " but the declared config expects " + dst->shape_str());
    }
    is.read(reinterpret_cast<char*>(dst->data()),
            static_cast<std::streamsize>(dst->size() * sizeof(double)));
    if (!is) throw IoError("model archive truncated in tensor '" + name + "'");
    filled[slot] = true;
  }
  return out;
}

}  // namespace qdet
