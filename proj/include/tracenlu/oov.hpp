// tracenlu/oov.hpp

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

#ifndef TRACENLU_OOV_HPP_
#define TRACENLU_OOV_HPP_

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tracenlu/dataset.hpp"
#include "tracenlu/vocab.hpp"

namespace tracenlu {

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

/// Word vectors, one unit-length column per word.
class EmbeddingTable {
 public:
  /// Text format: "count dim" header, then "word v1 ... v_dim" per line.
  /// Vectors are normalized on load; zero vectors are rejected.
  static EmbeddingTable parse(std::string_view text);
  static EmbeddingTable load(const std::string& path);

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  /// -1 when absent.
  long find(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }
  Eigen::VectorXd vector(const std::string& word) const;
  /// Digest of words and vectors.
  std::uint64_t digest() const;

 private:
  std::vector<std::string> words_;
  Eigen::MatrixXd vectors_;  // dim x count
  std::unordered_map<std::string, long> index_;
};

EmbeddingTable load_embeddings(const std::string& path);

struct NearestEntry {
  std::string word;
  double similarity = 0;
  bool operator==(const NearestEntry&) const = default;
};

/// Embedding word -> most cosine-similar vocabulary word.
struct NearestMap {
  std::map<std::string, NearestEntry> entries;
  std::string digest;

  const NearestEntry* find(const std::string& word) const;
  std::size_t size() const { return entries.size(); }
  bool operator==(const NearestMap&) const = default;

  /// Header line "# nearest-map <digest>", then sorted
  /// "word \t vocab word \t similarity" rows.
  std::string format() const;
  static NearestMap parse(std::string_view text);
};

/// Digest identifying the inputs of precompute_nearest.
std::string nearest_digest(const EmbeddingTable& embeddings, const Vocab& vocab);

/// Vocabulary words map to themselves with similarity 1; every other word
/// maps to the vocabulary word of highest cosine similarity, ties to the
/// lexicographically smallest.
NearestMap precompute_nearest(const EmbeddingTable& embeddings, const Vocab& vocab);

void save_nearest(const NearestMap& map, const std::string& path);
/// Throws EmbeddingError when expected_digest is given and differs.
NearestMap load_nearest(const std::string& path, const std::string& expected_digest = {});

/// Standard insert/delete/substitute distance.
std::size_t edit_distance(std::string_view a, std::string_view b);

struct SpellCandidate {
  std::string word;
  std::size_t distance = 0;
  std::size_t frequency = 0;
  bool operator==(const SpellCandidate&) const = default;
};

struct SpellCheckerConfig {
  std::size_t max_distance = 2;
  std::size_t max_candidates = 10;
};

/// Lexicon is the vocabulary plus the embedding words; frequencies come from
/// the vocabulary counts.
class SpellChecker {
 public:
  SpellChecker(const Vocab& vocab, const EmbeddingTable* embeddings,
               SpellCheckerConfig config = {});

  /// Words within max_distance, sorted by distance, then frequency
  /// descending, then spelling; at most max_candidates.
  std::vector<SpellCandidate> candidates(const std::string& token) const;
  std::size_t lexicon_size() const { return lexicon_.size(); }

 private:
  SpellCheckerConfig config_;
  std::vector<std::pair<std::string, std::size_t>> lexicon_;
};

std::vector<SpellCandidate> spell_candidates(const std::string& token,
                                             const SpellChecker& checker);

/// Ranked candidates: the first one in the vocabulary is returned, or the
/// first one with an embedding is replaced by its nearest vocabulary word.
/// Otherwise the OOV marker.
std::string repair_token(const std::string& token, const Vocab& vocab,
                         const SpellChecker& checker, const NearestMap& nearest);

Tokens repair_utterance(const Tokens& tokens, const Vocab& vocab, const SpellChecker& checker,
                        const NearestMap& nearest);

/// The OOV marker, "<oov>".
const std::string& oov_marker();

}  // namespace tracenlu

#endif  // TRACENLU_OOV_HPP_
