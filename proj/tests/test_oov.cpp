// tests/test_oov.cpp

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

#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "tracenlu/oov.hpp"

using namespace tracenlu;
using namespace tracenlu::testing;

namespace {

Vocab vocab_of(const std::vector<std::pair<std::string, std::size_t>>& words) {
  Vocab v;
  for (const auto& [w, c] : words) v.add(w, c);
  return v;
}

Vocab vocab_from_lines(const std::string& path) {
  Vocab v;
  for (const auto& w : split(read_file(path), '\n'))
    if (!w.empty()) v.add(w);
  return v;
}

// Exhaustive scan straight from the definition, independent of the matrix
// product in precompute_nearest.
std::map<std::string, NearestEntry> brute_force_nearest(const EmbeddingTable& emb,
                                                        const Vocab& vocab) {
  std::map<std::string, NearestEntry> out;
  for (const auto& w : emb.words()) {
    if (vocab.contains(w)) {
      out[w] = {w, 1.0};
      continue;
    }
    const Eigen::VectorXd a = emb.vector(w);
    NearestEntry best{"", -2.0};
    for (const auto& v : vocab.words()) {
      if (!emb.contains(v)) continue;
      const Eigen::VectorXd b = emb.vector(v);
      double dot = 0, na = 0, nb = 0;
      for (Eigen::Index d = 0; d < a.size(); ++d) {
        dot += a[d] * b[d];
        na += a[d] * a[d];
        nb += b[d] * b[d];
      }
      const double cos = dot / std::sqrt(na * nb);
      if (cos > best.similarity + 1e-12 ||
          (std::abs(cos - best.similarity) <= 1e-12 && v < best.word))
        best = {v, cos};
    }
    out[w] = best;
  }
  return out;
}

void check_against_oracle(const EmbeddingTable& emb, const Vocab& vocab) {
  const NearestMap map = precompute_nearest(emb, vocab);
  const auto oracle = brute_force_nearest(emb, vocab);
  REQUIRE(map.size() == oracle.size());
  for (const auto& [word, expected] : oracle) {
    const NearestEntry* got = map.find(word);
    REQUIRE(got != nullptr);
    CHECK(got->word == expected.word);
    CHECK(got->similarity == doctest::Approx(expected.similarity).epsilon(1e-9));
    CHECK(vocab.contains(got->word));
    CHECK(got->similarity >= -1.0);
    CHECK(got->similarity <= 1.0);
  }
}

std::string temp_path(const char* name) { return std::string("/tmp/tracenlu_oov_") + name; }

const char* kSmallVec =
    "3 4\n"
    "cat 1 0 0 0\n"
    "dog 0.9 0.1 0 0\n"
    "car 0 0 1 -2.5\n";

}  // namespace

TEST_CASE("embedding file parsing") {
  EmbeddingTable t = EmbeddingTable::parse(kSmallVec);
  CHECK(t.size() == 3);
  CHECK(t.dim() == 4);
  CHECK(t.contains("dog"));
  CHECK(t.find("bird") == -1);
  for (const auto& w : t.words()) CHECK(t.vector(w).norm() == doctest::Approx(1.0));
  CHECK(t.vector("car")[3] == doctest::Approx(-2.5 / std::sqrt(7.25)));
  CHECK(EmbeddingTable::parse(std::string(kSmallVec) + "\n\n").size() == 3);
  CHECK(EmbeddingTable::parse("1 2\r\nx 1 2\r\n").size() == 1);
}

TEST_CASE("embedding file errors") {
  auto message = [](const std::string& text) {
    try {
      EmbeddingTable::parse(text);
    } catch (const EmbeddingError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("").find("header") != std::string::npos);
  CHECK(message("three 4\n").find("header") != std::string::npos);
  CHECK(message("2 4\ncat 1 0 0 0\n").find("declares 2") != std::string::npos);
  const std::string dim = message("2 4\ncat 1 0 0 0\ndog 1 2 3\n");
  CHECK(dim.find("'dog'") != std::string::npos);
  CHECK(dim.find("3 components") != std::string::npos);
  CHECK(message("1 2\ncat 1 x\n").find("non-numeric") != std::string::npos);
  CHECK(message("1 2\ncat 1 nan\n").find("non-numeric") != std::string::npos);
  CHECK(message("1 2\ncat 0 0\n").find("zero vector") != std::string::npos);
  CHECK(message("2 1\ncat 1\ncat 2\n").find("duplicate") != std::string::npos);
  CHECK_THROWS(load_embeddings(temp_path("missing.vec")));
}

TEST_CASE("nearest map on the colour fixture") {
  const EmbeddingTable emb = load_embeddings(data_path("fixtures/colors.vec"));
  const Vocab vocab = vocab_of({{"brown", 3}, {"red", 2}, {"blue", 1}});
  const NearestMap map = precompute_nearest(emb, vocab);
  CHECK(map.size() == emb.size());
  CHECK(map.find("auburn")->word == "brown");
  CHECK(map.find("crimson")->word == "red");
  CHECK(map.find("navy")->word == "blue");
  for (const auto& w : vocab.words()) CHECK(*map.find(w) == NearestEntry{w, 1.0});
  CHECK(map.digest == nearest_digest(emb, vocab));
  check_against_oracle(emb, vocab);

  CHECK_THROWS_AS(precompute_nearest(emb, vocab_of({{"green", 1}})), EmbeddingError);
}

TEST_CASE("nearest map matches the brute-force scan") {
  SUBCASE("50-word fixture") {
    check_against_oracle(load_embeddings(data_path("fixtures/random50.vec")),
                         vocab_from_lines(data_path("fixtures/random50.vocab")));
  }
  SUBCASE("random tables up to 1000 words with exact ties") {
    Rng rng(31);
    for (int trial = 0; trial < 4; ++trial) {
      const std::size_t n = 50 + rng.uniform_index(951);
      const std::size_t dim = 2 + rng.uniform_index(10);
      std::string text = std::to_string(n) + " " + std::to_string(dim) + "\n";
      std::vector<std::string> rows;
      Vocab vocab;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string word = "w" + std::to_string(i);
        std::string row = word;
        // Every fifth word copies its predecessor, forcing cosine ties.
        if (i % 5 == 4) {
          row += rows.back().substr(rows.back().find(' '));
        } else {
          // Integer components give frequent exact ties; the first is
          // kept nonzero so no row is a zero vector.
          row += " " + std::to_string(1 + rng.uniform_index(3));
          for (std::size_t d = 1; d < dim; ++d)
            row += " " + std::to_string(static_cast<int>(rng.uniform_index(7)) - 3);
        }
        rows.push_back(row);
        if (rng.uniform_index(4) == 0 || i % 5 >= 3) vocab.add(word);
      }
      for (const auto& row : rows) text += row + "\n";
      check_against_oracle(EmbeddingTable::parse(text), vocab);
    }
  }
}

TEST_CASE("nearest map cache") {
  const EmbeddingTable emb = load_embeddings(data_path("fixtures/random50.vec"));
  const Vocab vocab = vocab_from_lines(data_path("fixtures/random50.vocab"));
  const NearestMap map = precompute_nearest(emb, vocab);
  const std::string path = temp_path("nearest.tsv");
  save_nearest(map, path);
  const NearestMap back = load_nearest(path, nearest_digest(emb, vocab));
  CHECK(back == map);
  CHECK(back.format() == read_file(path));
  CHECK(back.format().rfind("# nearest-map " + map.digest + "\n", 0) == 0);

  Vocab other = vocab;
  other.add("zzzz");
  CHECK_THROWS_AS(load_nearest(path, nearest_digest(emb, other)), EmbeddingError);
  CHECK_NOTHROW(load_nearest(path));
  CHECK_THROWS_AS(NearestMap::parse("word\tother\t0.5\n"), EmbeddingError);
  CHECK_THROWS_AS(NearestMap::parse("# nearest-map x\nword\tother\n"), EmbeddingError);
  std::remove(path.c_str());
}

TEST_CASE("edit distance") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("kitten", "sitting") == 3);
  CHECK(edit_distance("helo", "hello") == 1);
  CHECK(edit_distance("helo", "help") == 1);
  CHECK(edit_distance("helo", "hero") == 1);
  CHECK(edit_distance("ab", "ba") == 2);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    std::string a, b, c;
    for (std::size_t k = rng.uniform_index(6); k > 0; --k) a += char('a' + rng.uniform_index(3));
    for (std::size_t k = rng.uniform_index(6); k > 0; --k) b += char('a' + rng.uniform_index(3));
    for (std::size_t k = rng.uniform_index(6); k > 0; --k) c += char('a' + rng.uniform_index(3));
    CHECK(edit_distance(a, b) == edit_distance(b, a));
    CHECK(edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c));
    CHECK((edit_distance(a, b) == 0) == (a == b));
  }
}

TEST_CASE("spell candidates") {
  const Vocab vocab = vocab_of({{"hello", 5}, {"help", 9}, {"hero", 2}, {"world", 4}});
  const SpellChecker checker(vocab, nullptr);
  CHECK(checker.lexicon_size() == 4);

  const auto helo = spell_candidates("helo", checker);
  REQUIRE(helo.size() == 3);
  CHECK(helo[0] == SpellCandidate{"help", 1, 9});
  CHECK(helo[1] == SpellCandidate{"hello", 1, 5});
  CHECK(helo[2] == SpellCandidate{"hero", 1, 2});

  const auto self = spell_candidates("world", checker);
  REQUIRE(!self.empty());
  CHECK(self[0] == SpellCandidate{"world", 0, 4});
  CHECK(spell_candidates("zzqk", checker).empty());

  SpellCheckerConfig narrow;
  narrow.max_candidates = 2;
  CHECK(SpellChecker(vocab, nullptr, narrow).candidates("helo").size() == 2);
  narrow.max_distance = 0;
  CHECK(SpellChecker(vocab, nullptr, narrow).candidates("helo").empty());

  // Ranking invariant over random tokens.
  Rng rng(4);
  const Vocab big = vocab_from_lines(data_path("fixtures/random50.vocab"));
  const SpellChecker wide(big, nullptr, {3, 100});
  for (int i = 0; i < 200; ++i) {
    std::string token;
    for (std::size_t k = 3 + rng.uniform_index(4); k > 0; --k)
      token += char('a' + rng.uniform_index(26));
    const auto c = wide.candidates(token);
    std::size_t expected = 0;
    for (const auto& w : big.words()) expected += edit_distance(token, w) <= 3;
    CHECK(c.size() == expected);
    for (std::size_t k = 1; k < c.size(); ++k) {
      CHECK(c[k - 1].distance <= c[k].distance);
      if (c[k - 1].distance == c[k].distance) CHECK(c[k - 1].word < c[k].word);
    }
  }
}

TEST_CASE("repair follows the three branches") {
  const EmbeddingTable emb = load_embeddings(data_path("fixtures/colors.vec"));
  const Vocab vocab = vocab_of({{"brown", 3}, {"red", 2}, {"blue", 1}, {"hello", 4}});
  const SpellChecker checker(vocab, &emb);
  const NearestMap nearest = precompute_nearest(emb, vocab);
  CHECK(checker.lexicon_size() == 7);

  struct Case {
    const char* token;
    const char* expected;
    const char* branch;
  };
  const Case cases[] = {
      {"brown", "brown", "vocab hit at distance 0"},
      {"hello", "hello", "vocab hit at distance 0"},
      {"helo", "hello", "vocab hit after spelling fix"},
      {"bleu", "blue", "vocab hit after spelling fix"},
      {"auburn", "brown", "embedding hit, nearest vocab word"},
      {"auburm", "brown", "misspelt embedding word"},
      {"crimson", "red", "embedding hit, nearest vocab word"},
      {"navy", "blue", "embedding hit, nearest vocab word"},
      {"zzqk", "<oov>", "no candidates"},
      {"qqqqqqqq", "<oov>", "no candidates"},
  };
  for (const auto& c : cases) {
    CAPTURE(std::string(c.token));
    CHECK(repair_token(c.token, vocab, checker, nearest) == c.expected);
  }
  CHECK(oov_marker() == "<oov>");
  CHECK(repair_token(oov_marker(), vocab, checker, nearest) == oov_marker());

  // A candidate that is neither in the vocabulary nor embedded is skipped.
  const Vocab tiny = vocab_of({{"brown", 1}});
  const EmbeddingTable only_brown = EmbeddingTable::parse("1 2\nbrown 1 0\n");
  const NearestMap tiny_map = precompute_nearest(only_brown, tiny);
  const SpellChecker tiny_checker(tiny, &only_brown);
  CHECK(repair_token("browm", tiny, tiny_checker, tiny_map) == "brown");
  CHECK(repair_token("red", tiny, tiny_checker, tiny_map) == "<oov>");
}

TEST_CASE("repair properties") {
  const EmbeddingTable emb = load_embeddings(data_path("desk_embeddings.vec"));
  Vocab vocab;
  for (const auto& w : {"hi", "hello", "bye", "goodbye", "great", "wonderful", "dreary", "awful",
                        "yes", "no", "the", "weather", "is", "i'm", "joe", "."})
    vocab.add(w);
  const SpellChecker checker(vocab, &emb);
  const NearestMap nearest = precompute_nearest(emb, vocab);

  CHECK(repair_token("splendid", vocab, checker, nearest) == "wonderful");
  CHECK(repair_token("hiya", vocab, checker, nearest) == "hi");
  CHECK(repair_token("cya", vocab, checker, nearest) == "bye");

  Tokens in_vocab = {"hello", "the", "weather", "is", "great", "."};
  CHECK(repair_utterance(in_vocab, vocab, checker, nearest) == in_vocab);
  Tokens one = in_vocab;
  one[4] = "excellent";
  const Tokens fixed = repair_utterance(one, vocab, checker, nearest);
  REQUIRE(fixed.size() == one.size());
  for (std::size_t i = 0; i < fixed.size(); ++i)
    if (i != 4) CHECK(fixed[i] == in_vocab[i]);
  CHECK(fixed[4] != "excellent");

  Rng rng(17);
  const auto words = vocab.words();
  const auto lexicon = emb.words();
  for (int trial = 0; trial < 300; ++trial) {
    Tokens tokens;
    for (std::size_t k = 1 + rng.uniform_index(6); k > 0; --k) {
      std::string w = rng.uniform_index(2) ? words[rng.uniform_index(words.size())]
                                           : lexicon[rng.uniform_index(lexicon.size())];
      for (std::size_t e = rng.uniform_index(4); e > 0 && !w.empty(); --e) {
        const std::size_t pos = rng.uniform_index(w.size());
        switch (rng.uniform_index(3)) {
          case 0: w[pos] = char('a' + rng.uniform_index(26)); break;
          case 1: w.erase(pos, 1); break;
          default: w.insert(pos, 1, char('a' + rng.uniform_index(26))); break;
        }
      }
      if (!w.empty()) tokens.push_back(w);
    }
    const Tokens out = repair_utterance(tokens, vocab, checker, nearest);
    REQUIRE(out.size() == tokens.size());
    for (const auto& t : out) {
      CHECK((vocab.contains(t) || t == oov_marker()));
      CHECK(repair_token(t, vocab, checker, nearest) == t);
    }
  }
}
