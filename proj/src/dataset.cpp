// src/dataset.cpp

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

#include "tracenlu/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "json.hpp"

namespace tracenlu {

std::string_view variant_label(Variant v) {
  switch (v) {
    case Variant::kOriginal: return "original";
    case Variant::kCorrupted: return "corrupted";
    case Variant::kPunctStripped: return "punct_stripped";
  }
  return "original";
}

Variant parse_variant(std::string_view label) {
  if (label == "original") return Variant::kOriginal;
  if (label == "corrupted") return Variant::kCorrupted;
  if (label == "punct_stripped") return Variant::kPunctStripped;
  throw DatasetError("unknown variant label '" + std::string(label) + "'");
}

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

}  // namespace

Tokens tokenize(std::string_view utterance) {
  Tokens out;
  std::string text(utterance);
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '<') {
      std::size_t j = i + 1;
      while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        ++j;
      if (j < n && text[j] == '>' && j > i + 1) {
        out.push_back(text.substr(i, j + 1 - i));
        i = j + 1;
        continue;
      }
    }
    if (word_char(c)) {
      std::size_t j = i;
      while (j < n) {
        unsigned char d = text[j];
        if (word_char(d)) {
          ++j;
        } else if ((d == '\'' || d == '-') && j + 1 < n &&
                   word_char(static_cast<unsigned char>(text[j + 1]))) {
          j += 2;
        } else {
          break;
        }
      }
      out.push_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    out.push_back(std::string(1, text[i]));
    ++i;
  }
  return out;
}

Tokens strip_punctuation(const Tokens& tokens) {
  Tokens out;
  for (const auto& t : tokens)
    if (!is_punctuation_only(t)) out.push_back(t);
  return out;
}

Tokens corrupt_utterance(const Tokens& tokens, Rng& rng) {
  const std::size_t n = tokens.size();
  const std::size_t drop = n / 3;
  if (drop == 0) return tokens;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // partial Fisher-Yates: the first `drop` slots are the removed positions
  for (std::size_t i = 0; i < drop; ++i) {
    std::size_t j = i + rng.uniform_index(n - i);
    std::swap(order[i], order[j]);
  }
  std::vector<bool> removed(n, false);
  for (std::size_t i = 0; i < drop; ++i) removed[order[i]] = true;
  Tokens out;
  out.reserve(n - drop);
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) out.push_back(tokens[i]);
  return out;
}

std::string group_key_of(const Tokens& target) {
  std::set<std::string> symbols;
  for (const auto& t : target)
    if (t != kOpenToken && t != kCloseToken) symbols.insert(t);
  return join(std::vector<std::string>(symbols.begin(), symbols.end()), " ");
}

UtteranceTracePair make_pair(const Derivation& d) {
  UtteranceTracePair p;
  p.input = tokenize(d.utterance);
  p.target = linearize_trace(d.trace);
  p.variant = Variant::kOriginal;
  p.group_key = group_key_of(p.target);
  return p;
}

// ---------------------------------------------------------------------------
// Manifest

std::size_t DatasetManifest::balanced_size() const {
  std::size_t n = 0;
  for (const auto& [key, g] : groups) n += g.sampled;
  return n;
}

std::string DatasetManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["seed"] = seed;
  doc["cap"] = cap;
  doc["grammar_digest"] = grammar_digest;
  doc["balanced_size"] = balanced_size();
  doc["totals"] = nlohmann::ordered_json::object();
  for (const auto& [label, n] : totals) doc["totals"][label] = n;
  doc["groups"] = nlohmann::ordered_json::object();
  for (const auto& [key, g] : groups)
    doc["groups"][key] = {{"population", g.population}, {"sampled", g.sampled}};
  return doc.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(std::string_view text) {
  DatasetManifest m;
  try {
    auto doc = nlohmann::json::parse(text.begin(), text.end());
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.cap = doc.at("cap").get<std::size_t>();
    m.grammar_digest = doc.at("grammar_digest").get<std::string>();
    for (const auto& [label, n] : doc.at("totals").items())
      m.totals[label] = n.get<std::size_t>();
    for (const auto& [key, g] : doc.at("groups").items())
      m.groups[key] = {g.at("population").get<std::size_t>(),
                       g.at("sampled").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Balancing

void Balancer::add(const Derivation& d) {
  UtteranceTracePair pair = make_pair(d);
  auto [it, fresh] = groups_.try_emplace(pair.group_key);
  Group& g = it->second;
  if (fresh) g.rng = Rng(derive_seed(config_.seed, pair.group_key));
  const std::size_t arrival = arrivals_++;
  if (g.reservoir.size() < config_.cap) {
    g.reservoir.emplace_back(arrival, std::move(pair));
  } else {
    std::size_t j = g.rng.uniform_index(g.seen + 1);
    if (j < config_.cap) g.reservoir[j] = {arrival, std::move(pair)};
  }
  ++g.seen;
}

BalancedSet Balancer::finish(std::string grammar_digest) const {
  if (arrivals_ == 0) throw DatasetError("empty derivation stream");
  BalancedSet out;
  out.manifest.cap = config_.cap;
  out.manifest.seed = config_.seed;
  out.manifest.grammar_digest = std::move(grammar_digest);
  for (const auto& [key, g] : groups_) {
    auto picked = g.reservoir;
    std::sort(picked.begin(), picked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [arrival, pair] : picked) out.pairs.push_back(std::move(pair));
    out.manifest.groups[key] = {g.seen, picked.size()};
  }
  out.manifest.totals[std::string(variant_label(Variant::kOriginal))] = out.pairs.size();
  return out;
}

BalancedSet build_balanced(const std::vector<Derivation>& derivations,
                           BalanceConfig config) {
  if (config.cap == 0) throw DatasetError("balance cap must be at least 1");
  Balancer b(config);
  for (const auto& d : derivations) b.add(d);
  return b.finish();
}

BalancedSet build_balanced(const Grammar& grammar, BalanceConfig config) {
  if (config.cap == 0) throw DatasetError("balance cap must be at least 1");
  Balancer b(config);
  for (const auto& root : grammar.top_level())
    for_each_derivation(grammar, root, [&](const Derivation& d) { b.add(d); });
  return b.finish(grammar.digest());
}

std::vector<UtteranceTracePair> augment(const std::vector<UtteranceTracePair>& pairs,
                                        Rng& rng) {
  std::vector<UtteranceTracePair> out;
  out.reserve(pairs.size() * 3);
  for (const auto& p : pairs) {
    if (p.variant != Variant::kOriginal)
      throw DatasetError("augment expects original-variant pairs");
    out.push_back(p);
    UtteranceTracePair corrupted = p;
    corrupted.variant = Variant::kCorrupted;
    corrupted.input = corrupt_utterance(p.input, rng);
    out.push_back(std::move(corrupted));
    UtteranceTracePair stripped = p;
    stripped.variant = Variant::kPunctStripped;
    stripped.input = strip_punctuation(p.input);
    // an all-punctuation utterance keeps its tokens so inputs stay non-empty
    if (stripped.input.empty()) stripped.input = p.input;
    out.push_back(std::move(stripped));
  }
  return out;
}

BalancedSet build_dataset(const Grammar& grammar, BalanceConfig config) {
  BalancedSet set = build_balanced(grammar, config);
  Rng rng(derive_seed(config.seed, "augment"));
  set.pairs = augment(set.pairs, rng);
  for (Variant v : {Variant::kOriginal, Variant::kCorrupted, Variant::kPunctStripped})
    set.manifest.totals[std::string(variant_label(v))] = set.manifest.balanced_size();
  return set;
}

// ---------------------------------------------------------------------------
// Splitting

const std::vector<std::size_t>& EvalSplit::validation(std::size_t fold) const {
  if (fold >= folds()) throw DatasetError("fold index out of range");
  return pieces[fold];
}

std::vector<std::size_t> EvalSplit::training(std::size_t fold) const {
  if (fold >= folds()) throw DatasetError("fold index out of range");
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < folds(); ++p)
    if (p != fold) out.insert(out.end(), pieces[p].begin(), pieces[p].end());
  return out;
}

EvalSplit split_for_eval(std::size_t count, const SplitSpec& spec) {
  if (spec.pieces < 2) throw DatasetError("need at least two pieces");
  if (spec.folds + 1 != spec.pieces)
    throw DatasetError("folds must equal pieces - 1");
  if (count < spec.pieces)
    throw DatasetError("too few pairs (" + std::to_string(count) + ") for " +
                       std::to_string(spec.pieces) + " pieces");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(spec.seed);
  shuffle(order, rng);
  EvalSplit split;
  const std::size_t base = count / spec.pieces;
  const std::size_t extra = count % spec.pieces;
  std::size_t at = 0;
  for (std::size_t p = 0; p < spec.pieces; ++p) {
    std::size_t size = base + (p < extra ? 1 : 0);
    split.pieces.emplace_back(order.begin() + at, order.begin() + at + size);
    at += size;
  }
  return split;
}

std::vector<UtteranceTracePair> select(const std::vector<UtteranceTracePair>& pairs,
                                       const std::vector<std::size_t>& indices) {
  std::vector<UtteranceTracePair> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(pairs.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// Files

std::string format_dataset(const std::vector<UtteranceTracePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += variant_label(p.variant);
    out += '\t';
    out += join(p.input, " ");
    out += '\t';
    out += join(p.target, " ");
    out += '\n';
  }
  return out;
}

std::vector<UtteranceTracePair> parse_dataset(std::string_view text) {
  std::vector<UtteranceTracePair> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto where = [&] { return "dataset line " + std::to_string(line_no) + ": "; };
    auto fields = split(line, '\t');
    if (fields.size() != 3)
      throw DatasetError(where() + "expected 3 tab-separated fields, found " +
                         std::to_string(fields.size()));
    UtteranceTracePair p;
    try {
      p.variant = parse_variant(fields[0]);
    } catch (const DatasetError& e) {
      throw DatasetError(where() + e.what());
    }
    for (auto* dst : {&p.input, &p.target}) {
      const auto& field = dst == &p.input ? fields[1] : fields[2];
      for (auto& tok : split(field, ' '))
        if (!tok.empty()) dst->push_back(std::move(tok));
    }
    if (p.input.empty()) throw DatasetError(where() + "empty input");
    if (p.target.empty()) throw DatasetError(where() + "empty target");
    p.group_key = group_key_of(p.target);
    out.push_back(std::move(p));
  }
  return out;
}

void write_dataset(const std::vector<UtteranceTracePair>& pairs,
                   const std::string& path) {
  write_file(path, format_dataset(pairs));
}

std::vector<UtteranceTracePair> read_dataset(const std::string& path) {
  return parse_dataset(read_file(path));
}

}  // namespace tracenlu
