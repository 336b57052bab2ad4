// tracenlu/vocab.hpp

// Copyright 2026  The tracenlu Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TRACENLU_VOCAB_HPP_
#define TRACENLU_VOCAB_HPP_

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tracenlu/dataset.hpp"

namespace tracenlu {

/// Token <-> id map. Ids 0-3 are reserved; ordinary tokens follow in the
/// order they were added.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kOov = 3;
  static constexpr int kReserved = 4;

  Vocab();

  /// Adds the token if new and bumps its count. Reserved strings are rejected.
  int add(const std::string& token, std::size_t count = 1);

  bool contains(const std::string& token) const;
  /// kOov when the token is unknown.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t count(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }

  /// Ordinary tokens in id order.
  std::vector<std::string> words() const;

  std::vector<int> encode(const Tokens& tokens) const;
  Tokens decode(const std::vector<int>& ids) const;

  bool operator==(const Vocab& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, int> ids_;
};

/// Strings of the reserved ids: "<pad>", "<s>", "</s>", "<oov>".
const std::string& reserved_token(int id);
bool is_reserved_token(const std::string& token);

/// Input vocab keeps tokens seen at least min_count times; the output vocab
/// keeps every target token. Tokens are added in sorted order; reserved
/// strings in the data are skipped.
std::pair<Vocab, Vocab> build_vocab(const std::vector<UtteranceTracePair>& pairs,
                                    std::size_t min_count);

}  // namespace tracenlu

#endif  // TRACENLU_VOCAB_HPP_
