// tracenlu/dataset.hpp

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

#ifndef TRACENLU_DATASET_HPP_
#define TRACENLU_DATASET_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tracenlu/common.hpp"
#include "tracenlu/grammar.hpp"

namespace tracenlu {

using Tokens = std::vector<std::string>;

class DatasetError : public Error {
 public:
  using Error::Error;
};

enum class Variant { kOriginal, kCorrupted, kPunctStripped };

std::string_view variant_label(Variant v);
Variant parse_variant(std::string_view label);

struct UtteranceTracePair {
  Tokens input;
  Tokens target;
  Variant variant = Variant::kOriginal;
  std::string group_key;

  bool operator==(const UtteranceTracePair&) const = default;
};

/// Lowercases, splits on whitespace and splits punctuation marks into their
/// own tokens. Apostrophes and hyphens between letters stay inside the word
/// ("i'm", "so-so"), and placeholders such as "<speaker>" stay whole.
Tokens tokenize(std::string_view utterance);

Tokens strip_punctuation(const Tokens& tokens);

/// Drops floor(n/3) tokens chosen uniformly without replacement; survivors
/// keep their order.
Tokens corrupt_utterance(const Tokens& tokens, Rng& rng);

/// Canonical balancing key: the sorted distinct symbol tokens of a
/// linearized trace, space-joined.
std::string group_key_of(const Tokens& target);

UtteranceTracePair make_pair(const Derivation& d);

struct BalanceConfig {
  std::size_t cap = 5000;
  std::uint64_t seed = 0;
};

struct GroupStats {
  std::size_t population = 0;
  std::size_t sampled = 0;
  bool operator==(const GroupStats&) const = default;
};

struct DatasetManifest {
  std::map<std::string, GroupStats> groups;
  std::map<std::string, std::size_t> totals;  // keyed by variant label
  std::size_t cap = 0;
  std::uint64_t seed = 0;
  std::string grammar_digest;

  std::size_t balanced_size() const;
  std::string to_json() const;
  static DatasetManifest from_json(std::string_view text);
  bool operator==(const DatasetManifest&) const = default;
};

struct BalancedSet {
  std::vector<UtteranceTracePair> pairs;
  DatasetManifest manifest;
};

/// Streaming per-group reservoir sampler. Each group draws from its own
/// child seed, so results do not depend on how groups interleave.
class Balancer {
 public:
  explicit Balancer(BalanceConfig config) : config_(config) {}
  void add(const Derivation& d);
  /// Groups in key order, pairs within a group in arrival order.
  BalancedSet finish(std::string grammar_digest = {}) const;

 private:
  struct Group {
    std::size_t seen = 0;
    std::vector<std::pair<std::size_t, UtteranceTracePair>> reservoir;
    Rng rng{0};
  };
  BalanceConfig config_;
  std::map<std::string, Group> groups_;
  std::size_t arrivals_ = 0;
};

BalancedSet build_balanced(const std::vector<Derivation>& derivations,
                           BalanceConfig config);

/// Enumerates every top-level symbol of the grammar and balances the stream.
BalancedSet build_balanced(const Grammar& grammar, BalanceConfig config);

/// originals + one corrupted + one punctuation-stripped variant per pair,
/// interleaved per original.
std::vector<UtteranceTracePair> augment(const std::vector<UtteranceTracePair>& pairs,
                                        Rng& rng);

/// Balance, then augment with a seed derived from config.seed. Manifest
/// totals cover all three variants.
BalancedSet build_dataset(const Grammar& grammar, BalanceConfig config);

struct SplitSpec {
  std::size_t pieces = 11;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

/// Index partition of a shuffled dataset. The last piece is held out; fold i
/// validates on piece i and trains on the other non-held-out pieces.
struct EvalSplit {
  std::vector<std::vector<std::size_t>> pieces;

  std::size_t folds() const { return pieces.size() - 1; }
  const std::vector<std::size_t>& held_out() const { return pieces.back(); }
  const std::vector<std::size_t>& validation(std::size_t fold) const;
  std::vector<std::size_t> training(std::size_t fold) const;
};

EvalSplit split_for_eval(std::size_t count, const SplitSpec& spec);

std::vector<UtteranceTracePair> select(const std::vector<UtteranceTracePair>& pairs,
                                       const std::vector<std::size_t>& indices);

/// Line format: variant \t input tokens \t target tokens.
std::string format_dataset(const std::vector<UtteranceTracePair>& pairs);
std::vector<UtteranceTracePair> parse_dataset(std::string_view text);
void write_dataset(const std::vector<UtteranceTracePair>& pairs,
                   const std::string& path);
std::vector<UtteranceTracePair> read_dataset(const std::string& path);

}  // namespace tracenlu

#endif  // TRACENLU_DATASET_HPP_
