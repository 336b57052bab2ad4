// vocab.cpp

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

#include "tracenlu/vocab.hpp"

#include <map>

namespace tracenlu {

namespace {
const std::vector<std::string> kReservedTokens = {"<pad>", "<s>", "</s>", "<oov>"};
}  // namespace

bool is_reserved_token(const std::string& token) {
  for (const auto& r : kReservedTokens)
    if (token == r) return true;
  return false;
}

const std::string& reserved_token(int id) {
  if (id < 0 || id >= Vocab::kReserved) throw Error("not a reserved id");
  return kReservedTokens[id];
}

Vocab::Vocab() : tokens_(kReservedTokens), counts_(kReserved, 0) {}

int Vocab::add(const std::string& token, std::size_t count) {
  if (is_reserved_token(token)) throw Error("vocab: reserved token '" + token + "'");
  if (token.empty()) throw Error("vocab: empty token");
  auto it = ids_.find(token);
  if (it != ids_.end()) {
    counts_[it->second] += count;
    return it->second;
  }
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  counts_.push_back(count);
  ids_.emplace(token, id);
  return id;
}

bool Vocab::contains(const std::string& token) const { return ids_.count(token) != 0; }

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kOov : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw Error("vocab: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::size_t Vocab::count(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : counts_[it->second];
}

std::vector<std::string> Vocab::words() const {
  return {tokens_.begin() + kReserved, tokens_.end()};
}

std::vector<int> Vocab::encode(const Tokens& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Tokens Vocab::decode(const std::vector<int>& ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::pair<Vocab, Vocab> build_vocab(const std::vector<UtteranceTracePair>& pairs,
                                    std::size_t min_count) {
  if (pairs.empty()) throw DatasetError("build_vocab: no pairs");
  std::map<std::string, std::size_t> in_counts, out_counts;
  for (const auto& p : pairs) {
    for (const auto& t : p.input)
      if (!is_reserved_token(t)) ++in_counts[t];
    for (const auto& t : p.target)
      if (!is_reserved_token(t)) ++out_counts[t];
  }
  Vocab in, out;
  for (const auto& [t, n] : in_counts)
    if (n >= min_count) in.add(t, n);
  for (const auto& [t, n] : out_counts) out.add(t, n);
  return {std::move(in), std::move(out)};
}

}  // namespace tracenlu
