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

#ifndef QDET_TEXT_HPP_
#define QDET_TEXT_HPP_

#include <string>
#include <unordered_map>
#include <vector>

namespace qdet {

// Reserved token ids.
constexpr int kPadId = 0;
constexpr int kUnkId = 1;

// Lowercases and strips . , ? ! ; : " ' ( ) and em-dashes, then splits on
// whitespace. Contractions collapse to one token ("don't" -> "dont").
std::vector<std::string> clean_and_tokenize(const std::string& text);

// Token ids. 0 and 1 are reserved; real tokens are ordered by descending
// frequency with ties broken lexicographically, so builds are stable.
class Vocab {
 public:
  static Vocab build(const std::vector<std::string>& texts, int min_count = 1);

  int encode_token(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  int64_t size() const { return static_cast<int64_t>(id_to_token_.size()); }
  const std::string& token(int id) const { return id_to_token_[static_cast<size_t>(id)]; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // Line format "token<TAB>id", ordered by id.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);
  static Vocab from_tokens(std::vector<std::string> id_to_token);

 private:
  Vocab() = default;
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace qdet

#endif  // QDET_TEXT_HPP_
