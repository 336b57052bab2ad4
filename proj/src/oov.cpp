// oov.cpp

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

#include "tracenlu/oov.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

namespace tracenlu {

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(' ', start);
    if (end == std::string_view::npos) end = line.size();
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

constexpr double kTieTolerance = 1e-12;

}  // namespace

EmbeddingTable EmbeddingTable::parse(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw EmbeddingError("embeddings: missing \"count dim\" header");
  const auto header = fields_of(lines[0]);
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
      dim == 0)
    throw EmbeddingError("embeddings: bad header \"" + std::string(lines[0]) + "\"");
  if (lines.size() - 1 != count)
    throw EmbeddingError("embeddings: header declares " + std::to_string(count) +
                         " words, file has " + std::to_string(lines.size() - 1));
  EmbeddingTable table;
  table.vectors_.resize(dim, count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto fields = fields_of(lines[i + 1]);
    const std::string word(fields[0]);
    if (word.empty()) throw EmbeddingError("embeddings: empty word on line " + std::to_string(i + 2));
    if (fields.size() - 1 != dim)
      throw EmbeddingError("embeddings: word '" + word + "' has " +
                           std::to_string(fields.size() - 1) + " components, expected " +
                           std::to_string(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      double v;
      if (!parse_number(fields[d + 1], v) || !std::isfinite(v))
        throw EmbeddingError("embeddings: non-numeric component for word '" + word + "'");
      table.vectors_(d, i) = v;
    }
    const double norm = table.vectors_.col(i).norm();
    if (norm == 0) throw EmbeddingError("embeddings: zero vector for word '" + word + "'");
    table.vectors_.col(i) /= norm;
    if (!table.index_.emplace(word, static_cast<long>(i)).second)
      throw EmbeddingError("embeddings: duplicate word '" + word + "'");
    table.words_.push_back(word);
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) { return parse(read_file(path)); }

EmbeddingTable load_embeddings(const std::string& path) { return EmbeddingTable::load(path); }

long EmbeddingTable::find(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? -1 : it->second;
}

Eigen::VectorXd EmbeddingTable::vector(const std::string& word) const {
  const long i = find(word);
  if (i < 0) throw EmbeddingError("embeddings: no vector for '" + word + "'");
  return vectors_.col(i);
}

std::uint64_t EmbeddingTable::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& w : words_) h = fnv1a64(w + '\n', h);
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(vectors_.data()),
                               sizeof(double) * vectors_.size()),
              h);
  return h;
}

const NearestEntry* NearestMap::find(const std::string& word) const {
  auto it = entries.find(word);
  return it == entries.end() ? nullptr : &it->second;
}

std::string NearestMap::format() const {
  std::string out = "# nearest-map " + digest + "\n";
  for (const auto& [word, e] : entries)
    out += word + "\t" + e.word + "\t" + format_double(e.similarity) + "\n";
  return out;
}

NearestMap NearestMap::parse(std::string_view text) {
  const auto lines = lines_of(text);
  const std::string_view prefix = "# nearest-map ";
  if (lines.empty() || lines[0].substr(0, prefix.size()) != prefix)
    throw EmbeddingError("nearest map: missing header");
  NearestMap map;
  map.digest = std::string(lines[0].substr(prefix.size()));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i], '\t');
    double sim;
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        !parse_number(std::string_view(fields[2]), sim))
      throw EmbeddingError("nearest map: bad line " + std::to_string(i + 1));
    map.entries[fields[0]] = {fields[1], sim};
  }
  return map;
}

std::string nearest_digest(const EmbeddingTable& embeddings, const Vocab& vocab) {
  std::uint64_t h = embeddings.digest();
  auto words = vocab.words();
  std::sort(words.begin(), words.end());
  for (const auto& w : words) h = fnv1a64(w + '\n', h);
  return hex64(h);
}

NearestMap precompute_nearest(const EmbeddingTable& embeddings, const Vocab& vocab) {
  std::vector<std::string> targets;
  for (const auto& w : vocab.words())
    if (embeddings.contains(w)) targets.push_back(w);
  if (targets.empty()) throw EmbeddingError("nearest map: no vocabulary word has an embedding");
  std::sort(targets.begin(), targets.end());
  Eigen::MatrixXd candidates(embeddings.dim(), targets.size());
  for (std::size_t k = 0; k < targets.size(); ++k)
    candidates.col(k) = embeddings.vectors().col(embeddings.find(targets[k]));
  const Eigen::MatrixXd sims = candidates.transpose() * embeddings.vectors();

  NearestMap map;
  map.digest = nearest_digest(embeddings, vocab);
  const auto& words = embeddings.words();
  for (std::size_t j = 0; j < words.size(); ++j) {
    if (vocab.contains(words[j])) {
      map.entries[words[j]] = {words[j], 1.0};
      continue;
    }
    // Targets are sorted, so keeping the first of near-equal scores breaks
    // ties lexicographically despite rounding in the normalization.
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < sims.rows(); ++k)
      if (sims(k, j) > sims(best, j) + kTieTolerance) best = k;
    map.entries[words[j]] = {targets[best], std::clamp(sims(best, j), -1.0, 1.0)};
  }
  return map;
}

void save_nearest(const NearestMap& map, const std::string& path) {
  write_file(path, map.format());
}

NearestMap load_nearest(const std::string& path, const std::string& expected_digest) {
  NearestMap map = NearestMap::parse(read_file(path));
  if (!expected_digest.empty() && map.digest != expected_digest)
    throw EmbeddingError("nearest map: cache " + path + " is stale (digest " + map.digest +
                         ", expected " + expected_digest + ")");
  return map;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

SpellChecker::SpellChecker(const Vocab& vocab, const EmbeddingTable* embeddings,
                           SpellCheckerConfig config)
    : config_(config) {
  std::map<std::string, std::size_t> freq;
  for (const auto& w : vocab.words()) freq[w] = vocab.count(w);
  if (embeddings)
    for (const auto& w : embeddings->words())
      if (!is_reserved_token(w)) freq.emplace(w, 0);
  lexicon_.assign(freq.begin(), freq.end());
}

std::vector<SpellCandidate> SpellChecker::candidates(const std::string& token) const {
  std::vector<SpellCandidate> out;
  for (const auto& [word, frequency] : lexicon_) {
    const std::size_t gap =
        word.size() > token.size() ? word.size() - token.size() : token.size() - word.size();
    if (gap > config_.max_distance) continue;
    const std::size_t d = edit_distance(token, word);
    if (d <= config_.max_distance) out.push_back({word, d, frequency});
  }
  std::sort(out.begin(), out.end(), [](const SpellCandidate& a, const SpellCandidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.word < b.word;
  });
  if (out.size() > config_.max_candidates) out.resize(config_.max_candidates);
  return out;
}

std::vector<SpellCandidate> spell_candidates(const std::string& token,
                                             const SpellChecker& checker) {
  return checker.candidates(token);
}

const std::string& oov_marker() { return reserved_token(Vocab::kOov); }

std::string repair_token(const std::string& token, const Vocab& vocab,
                         const SpellChecker& checker, const NearestMap& nearest) {
  if (token == oov_marker()) return token;
  for (const auto& c : checker.candidates(token)) {
    if (vocab.contains(c.word)) return c.word;
    if (const NearestEntry* e = nearest.find(c.word)) return e->word;
  }
  return oov_marker();
}

Tokens repair_utterance(const Tokens& tokens, const Vocab& vocab, const SpellChecker& checker,
                        const NearestMap& nearest) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(repair_token(t, vocab, checker, nearest));
  return out;
}

}  // namespace tracenlu
