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

#include "qdet/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "qdet/errors.hpp"

namespace qdet {

std::vector<std::string> clean_and_tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    // UTF-8 em-dash (U+2014).
    if (c == 0xE2 && i + 2 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x94) {
      cleaned.push_back(' ');
      i += 2;
      continue;
    }
    switch (c) {
      case '.': case ',': case '?': case '!': case ';': case ':':
      case '"': case '\'': case '(': case ')':
        continue;
      default:
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  std::vector<std::string> tokens;
  std::string current;
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocab Vocab::build(const std::vector<std::string>& texts, int min_count) {
  if (texts.empty()) throw ContractError("Vocab::build: empty corpus");
  std::unordered_map<std::string, int64_t> counts;
  for (const std::string& text : texts) {
    for (std::string& tok : clean_and_tokenize(text)) counts[std::move(tok)] += 1;
  }
  std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.id_to_token_ = {"<pad>", "<unk>"};
  for (auto& [tok, cnt] : items) {
    if (cnt < min_count) continue;
    v.id_to_token_.push_back(tok);
  }
  for (size_t i = 0; i < v.id_to_token_.size(); ++i) {
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int>(i);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < 2) throw ContractError("Vocab::from_tokens: missing reserved entries");
  Vocab v;
  v.id_to_token_ = std::move(id_to_token);
  for (size_t i = 0; i < v.id_to_token_.size(); ++i) {
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int>(i);
  }
  return v;
}

int Vocab::encode_token(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(encode_token(t));
  return ids;
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write vocabulary file: " + path);
  for (size_t i = 0; i < id_to_token_.size(); ++i) {
    os << id_to_token_[i] << '\t' << i << '\n';
  }
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open vocabulary file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError("vocabulary file " + path + ": no tab on line " + std::to_string(line_no));
    }
    const int64_t id = std::stoll(line.substr(tab + 1));
    if (id != static_cast<int64_t>(tokens.size())) {
      throw IoError("vocabulary file " + path + ": ids out of order at line " + std::to_string(line_no));
    }
    tokens.push_back(line.substr(0, tab));
  }
  return from_tokens(std::move(tokens));
}

}  // namespace qdet
