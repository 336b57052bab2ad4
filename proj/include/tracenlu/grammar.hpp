// tracenlu/grammar.hpp

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

#ifndef TRACENLU_GRAMMAR_HPP_
#define TRACENLU_GRAMMAR_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tracenlu/common.hpp"
#include "tracenlu/trace.hpp"

namespace tracenlu {

class GrammarError : public Error {
 public:
  using Error::Error;
};

class GrammarSyntaxError : public GrammarError {
 public:
  GrammarSyntaxError(const std::string& what, std::size_t position)
      : GrammarError(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UndefinedSymbolError : public GrammarError {
 public:
  explicit UndefinedSymbolError(std::string symbol)
      : GrammarError("undefined symbol '" + symbol + "'"),
        symbol_(std::move(symbol)) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

/// Raised when a grammar (or the part reachable from a symbol) is recursive,
/// or when sampling exceeds its depth guard.
class RecursionError : public GrammarError {
 public:
  using GrammarError::GrammarError;
};

struct NonterminalSymbol {
  std::string name;
  TagSet annotations;
  bool top_level = false;
};

struct RuleElement {
  enum class Kind { kNonterminal, kTerminal };
  Kind kind = Kind::kTerminal;
  std::string text;

  static RuleElement nonterminal(std::string name) {
    return {Kind::kNonterminal, std::move(name)};
  }
  static RuleElement terminal(std::string text) {
    return {Kind::kTerminal, std::move(text)};
  }
  bool is_nonterminal() const { return kind == Kind::kNonterminal; }
};

struct ProductionRule {
  std::string lhs;
  std::vector<RuleElement> rhs;
  double weight = 1.0;
};

struct GrammarOptions {
  // Recursive grammars can still be sampled (depth-guarded) but never
  // enumerated or counted.
  bool allow_recursion = false;
};

/// Annotated probabilistic CFG. Immutable once built; all constructors
/// validate.
class Grammar {
 public:
  /// Parses the JSON grammar document.
  static Grammar parse(std::string_view source, GrammarOptions options = {});
  static Grammar load(const std::string& path, GrammarOptions options = {});
  static Grammar build(std::vector<NonterminalSymbol> symbols,
                       std::vector<ProductionRule> rules,
                       GrammarOptions options = {});

  std::string to_json() const;

  const NonterminalSymbol& symbol(std::string_view name) const;
  const NonterminalSymbol* find_symbol(std::string_view name) const;
  bool has_symbol(std::string_view name) const { return find_symbol(name); }
  /// Lookup by output-vocabulary token (underscore form).
  const NonterminalSymbol* find_by_token(std::string_view token) const;

  const std::vector<ProductionRule>& rules_for(std::string_view name) const;
  const std::vector<std::string>& symbol_names() const { return order_; }
  std::vector<std::string> top_level() const;
  std::size_t symbol_count() const { return order_.size(); }
  std::size_t rule_count() const;

  /// True when some cycle is reachable from `name`.
  bool recursive_from(std::string_view name) const;

  /// Digest of the canonical JSON form.
  std::string digest() const;

 private:
  Grammar() = default;
  void validate(const GrammarOptions& options);

  std::vector<std::string> order_;
  std::map<std::string, NonterminalSymbol, std::less<>> symbols_;
  std::map<std::string, std::vector<ProductionRule>, std::less<>> rules_;
  std::map<std::string, std::string, std::less<>> by_token_;
  std::map<std::string, bool, std::less<>> recursive_;
};

struct Derivation {
  std::string utterance;
  TraceNode trace;
  TagSet markup;
};

inline constexpr int kMaxSampleDepth = 50;

/// Joins terminal spans with single spaces, attaching punctuation-only spans
/// to the preceding word.
std::string assemble_utterance(const std::vector<std::string>& spans);

/// Number of distinct terminal derivations of `symbol`, by dynamic
/// programming. Throws GrammarError on 64-bit overflow.
std::uint64_t derivation_count(const Grammar& grammar, std::string_view symbol);

/// Streams every derivation of `symbol` in rule order, leftmost element
/// varying slowest.
void for_each_derivation(const Grammar& grammar, std::string_view symbol,
                         const std::function<void(const Derivation&)>& sink);

std::vector<Derivation> enumerate_derivations(const Grammar& grammar,
                                              std::string_view symbol);

/// Top-down sampling, each rule chosen with probability weight / sum.
Derivation sample_derivation(const Grammar& grammar, std::string_view symbol,
                             Rng& rng, int max_depth = kMaxSampleDepth);

}  // namespace tracenlu

#endif  // TRACENLU_GRAMMAR_HPP_
