// src/grammar.cpp

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

#include "tracenlu/grammar.hpp"

#include <cmath>
#include <deque>
#include <set>

#include "json.hpp"

namespace tracenlu {

using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw GrammarSyntaxError("grammar schema: " + what, 0);
}

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (auto key : allowed) ok = ok || item.key() == key;
    if (!ok) schema_error("unexpected key '" + item.key() + "' in " + where);
  }
}

}  // namespace

Grammar Grammar::parse(std::string_view source, GrammarOptions options) {
  Json doc;
  try {
    doc = Json::parse(source.begin(), source.end());
  } catch (const Json::parse_error& e) {
    throw GrammarSyntaxError(
        "grammar syntax error at byte " + std::to_string(e.byte) + ": " + e.what(),
        e.byte);
  }
  if (!doc.is_object()) schema_error("document must be an object");
  check_keys(doc, {"symbols", "rules"}, "document");
  if (!doc.contains("symbols") || !doc["symbols"].is_object())
    schema_error("'symbols' must be an object");
  if (!doc.contains("rules") || !doc["rules"].is_array())
    schema_error("'rules' must be an array");

  std::vector<NonterminalSymbol> symbols;
  for (const auto& [name, body] : doc["symbols"].items()) {
    if (!body.is_object()) schema_error("symbol '" + name + "' must be an object");
    check_keys(body, {"annotations", "top_level"}, "symbol '" + name + "'");
    NonterminalSymbol sym;
    sym.name = name;
    if (body.contains("annotations")) {
      if (!body["annotations"].is_array())
        schema_error("annotations of '" + name + "' must be a list");
      for (const auto& tag : body["annotations"]) {
        if (!tag.is_string())
          schema_error("annotation of '" + name + "' must be a string");
        try {
          sym.annotations.insert(Tag::parse(tag.get<std::string>()));
        } catch (const Error& e) {
          schema_error("symbol '" + name + "': " + e.what());
        }
      }
    }
    if (body.contains("top_level")) {
      if (!body["top_level"].is_boolean())
        schema_error("top_level of '" + name + "' must be a boolean");
      sym.top_level = body["top_level"].get<bool>();
    }
    symbols.push_back(std::move(sym));
  }

  std::vector<ProductionRule> rules;
  std::size_t index = 0;
  for (const auto& body : doc["rules"]) {
    const std::string where = "rule " + std::to_string(index++);
    if (!body.is_object()) schema_error(where + " must be an object");
    check_keys(body, {"lhs", "rhs", "weight"}, where);
    if (!body.contains("lhs") || !body["lhs"].is_string())
      schema_error(where + ": 'lhs' must be a string");
    if (!body.contains("rhs") || !body["rhs"].is_array())
      schema_error(where + ": 'rhs' must be a list");
    ProductionRule rule;
    rule.lhs = body["lhs"].get<std::string>();
    for (const auto& elem : body["rhs"]) {
      if (!elem.is_object() || elem.size() != 1)
        schema_error(where + ": rhs element must be {\"t\": ...} or {\"nt\": ...}");
      if (elem.contains("t") && elem["t"].is_string()) {
        rule.rhs.push_back(RuleElement::terminal(elem["t"].get<std::string>()));
      } else if (elem.contains("nt") && elem["nt"].is_string()) {
        rule.rhs.push_back(RuleElement::nonterminal(elem["nt"].get<std::string>()));
      } else {
        schema_error(where + ": rhs element must be {\"t\": ...} or {\"nt\": ...}");
      }
    }
    if (body.contains("weight")) {
      if (!body["weight"].is_number()) schema_error(where + ": weight must be a number");
      rule.weight = body["weight"].get<double>();
    }
    rules.push_back(std::move(rule));
  }
  return build(std::move(symbols), std::move(rules), options);
}

Grammar Grammar::load(const std::string& path, GrammarOptions options) {
  return parse(read_file(path), options);
}

Grammar Grammar::build(std::vector<NonterminalSymbol> symbols,
                       std::vector<ProductionRule> rules, GrammarOptions options) {
  Grammar g;
  for (auto& sym : symbols) {
    if (g.symbols_.count(sym.name))
      throw GrammarError("duplicate symbol '" + sym.name + "'");
    g.order_.push_back(sym.name);
    g.symbols_.emplace(sym.name, std::move(sym));
  }
  for (auto& rule : rules) {
    for (auto& elem : rule.rhs)
      if (!elem.is_nonterminal()) elem.text = trim(elem.text);
    g.rules_[rule.lhs].push_back(std::move(rule));
  }
  g.validate(options);
  return g;
}

void Grammar::validate(const GrammarOptions& options) {
  for (const auto& name : order_) {
    if (name.empty() || trim(name) != name)
      throw GrammarError("symbol name '" + name + "' is empty or padded");
    if (name.find_first_of("()|\t\n\r") != std::string::npos)
      throw GrammarError("symbol name '" + name +
                         "' contains a reserved character");
    if (name.front() == '<')
      throw GrammarError("symbol name '" + name + "' may not start with '<'");
    auto [it, fresh] = by_token_.emplace(symbol_token(name), name);
    if (!fresh)
      throw GrammarError("symbols '" + it->second + "' and '" + name +
                         "' share the token '" + it->first + "'");
  }
  for (const auto& [lhs, list] : rules_) {
    if (!symbols_.count(lhs)) throw UndefinedSymbolError(lhs);
    for (const auto& rule : list) {
      if (!(rule.weight > 0.0) || !std::isfinite(rule.weight))
        throw GrammarError("rule for '" + lhs + "' has non-positive weight " +
                           std::to_string(rule.weight));
      if (rule.rhs.empty())
        throw GrammarError("rule for '" + lhs + "' has an empty right-hand side");
      for (const auto& elem : rule.rhs) {
        if (elem.is_nonterminal()) {
          if (!symbols_.count(elem.text)) throw UndefinedSymbolError(elem.text);
        } else if (elem.text.empty()) {
          throw GrammarError("rule for '" + lhs + "' has an empty terminal");
        } else if (elem.text.find_first_of("\t\n\r") != std::string::npos) {
          throw GrammarError("rule for '" + lhs +
                             "' has a terminal with tab or newline");
        }
      }
    }
  }
  for (const auto& name : order_)
    if (!rules_.count(name))
      throw GrammarError("symbol '" + name + "' has no rules");

  // Symbol graph reachability; a symbol is recursive when it reaches a cycle.
  std::map<std::string, std::set<std::string>, std::less<>> edges;
  for (const auto& [lhs, list] : rules_)
    for (const auto& rule : list)
      for (const auto& elem : rule.rhs)
        if (elem.is_nonterminal()) edges[lhs].insert(elem.text);
  auto reachable = [&](const std::string& from) {
    std::set<std::string> seen;
    std::deque<std::string> queue(edges[from].begin(), edges[from].end());
    while (!queue.empty()) {
      std::string cur = queue.front();
      queue.pop_front();
      if (!seen.insert(cur).second) continue;
      for (const auto& next : edges[cur]) queue.push_back(next);
    }
    return seen;
  };
  std::set<std::string> cyclic;
  std::map<std::string, std::set<std::string>> reach;
  for (const auto& name : order_) {
    reach[name] = reachable(name);
    if (reach[name].count(name)) cyclic.insert(name);
  }
  for (const auto& name : order_) {
    bool rec = cyclic.count(name) > 0;
    for (const auto& other : reach[name]) rec = rec || cyclic.count(other);
    recursive_[name] = rec;
  }
  if (!options.allow_recursion && !cyclic.empty())
    throw RecursionError("unbounded recursion through symbol '" +
                         *cyclic.begin() + "'");
}

const NonterminalSymbol* Grammar::find_symbol(std::string_view name) const {
  auto it = symbols_.find(name);
  return it == symbols_.end() ? nullptr : &it->second;
}

const NonterminalSymbol& Grammar::symbol(std::string_view name) const {
  auto* sym = find_symbol(name);
  if (!sym) throw UndefinedSymbolError(std::string(name));
  return *sym;
}

const NonterminalSymbol* Grammar::find_by_token(std::string_view token) const {
  auto it = by_token_.find(token);
  return it == by_token_.end() ? nullptr : find_symbol(it->second);
}

const std::vector<ProductionRule>& Grammar::rules_for(std::string_view name) const {
  auto it = rules_.find(name);
  if (it == rules_.end()) throw UndefinedSymbolError(std::string(name));
  return it->second;
}

std::vector<std::string> Grammar::top_level() const {
  std::vector<std::string> out;
  for (const auto& name : order_)
    if (symbols_.at(name).top_level) out.push_back(name);
  return out;
}

std::size_t Grammar::rule_count() const {
  std::size_t n = 0;
  for (const auto& [lhs, list] : rules_) n += list.size();
  return n;
}

bool Grammar::recursive_from(std::string_view name) const {
  auto it = recursive_.find(name);
  if (it == recursive_.end()) throw UndefinedSymbolError(std::string(name));
  return it->second;
}

std::string Grammar::to_json() const {
  Json doc;
  doc["symbols"] = Json::object();
  for (const auto& name : order_) {
    const auto& sym = symbols_.at(name);
    Json body;
    body["annotations"] = tag_strings(sym.annotations);
    body["top_level"] = sym.top_level;
    doc["symbols"][name] = body;
  }
  doc["rules"] = Json::array();
  for (const auto& name : order_) {
    for (const auto& rule : rules_.at(name)) {
      Json body;
      body["lhs"] = rule.lhs;
      body["rhs"] = Json::array();
      for (const auto& elem : rule.rhs)
        body["rhs"].push_back(
            Json{{elem.is_nonterminal() ? "nt" : "t", elem.text}});
      body["weight"] = rule.weight;
      doc["rules"].push_back(body);
    }
  }
  return doc.dump(2);
}

std::string Grammar::digest() const { return hex64(fnv1a64(to_json())); }

// ---------------------------------------------------------------------------
// Derivations

std::string assemble_utterance(const std::vector<std::string>& spans) {
  std::string out;
  for (const auto& span : spans) {
    if (!out.empty() && !is_punctuation_only(span)) out += ' ';
    out += span;
  }
  return out;
}

namespace {

std::uint64_t count_symbol(const Grammar& g, const std::string& name,
                           std::map<std::string, std::uint64_t>& memo) {
  if (auto it = memo.find(name); it != memo.end()) return it->second;
  std::uint64_t total = 0;
  for (const auto& rule : g.rules_for(name)) {
    std::uint64_t product = 1;
    for (const auto& elem : rule.rhs) {
      if (!elem.is_nonterminal()) continue;
      std::uint64_t sub = count_symbol(g, elem.text, memo);
      if (sub != 0 && product > UINT64_MAX / sub)
        throw GrammarError("derivation count of '" + name + "' overflows");
      product *= sub;
    }
    if (total > UINT64_MAX - product)
      throw GrammarError("derivation count of '" + name + "' overflows");
    total += product;
  }
  memo[name] = total;
  return total;
}

void require_enumerable(const Grammar& g, std::string_view symbol) {
  if (g.recursive_from(symbol))
    throw RecursionError("derivations of '" + std::string(symbol) +
                         "' are unbounded");
}

// Continuation-passing enumeration: each level hands its partial spans and
// subtree to the continuation, so nothing beyond the current path is stored.
class Enumerator {
 public:
  using Done = std::function<void(const TraceNode&)>;

  Enumerator(const Grammar& g) : g_(g) {}

  void symbol(const std::string& name, const Done& done) {
    for (const auto& rule : g_.rules_for(name)) {
      TraceNode node{name, {}};
      sequence(rule, 0, node, done);
    }
  }

  std::vector<std::string> spans;

 private:
  void sequence(const ProductionRule& rule, std::size_t index, TraceNode& node,
                const Done& done) {
    if (index == rule.rhs.size()) {
      done(node);
      return;
    }
    const auto& elem = rule.rhs[index];
    if (!elem.is_nonterminal()) {
      spans.push_back(elem.text);
      sequence(rule, index + 1, node, done);
      spans.pop_back();
      return;
    }
    symbol(elem.text, [&](const TraceNode& child) {
      node.children.push_back(child);
      sequence(rule, index + 1, node, done);
      node.children.pop_back();
    });
  }

  const Grammar& g_;
};

}  // namespace

std::uint64_t derivation_count(const Grammar& grammar, std::string_view symbol) {
  grammar.symbol(symbol);
  require_enumerable(grammar, symbol);
  std::map<std::string, std::uint64_t> memo;
  return count_symbol(grammar, std::string(symbol), memo);
}

void for_each_derivation(const Grammar& grammar, std::string_view symbol,
                         const std::function<void(const Derivation&)>& sink) {
  grammar.symbol(symbol);
  require_enumerable(grammar, symbol);
  Enumerator e(grammar);
  e.symbol(std::string(symbol), [&](const TraceNode& trace) {
    Derivation d;
    d.utterance = assemble_utterance(e.spans);
    d.trace = trace;
    d.markup = collect_markup(trace, grammar);
    sink(d);
  });
}

std::vector<Derivation> enumerate_derivations(const Grammar& grammar,
                                              std::string_view symbol) {
  std::vector<Derivation> out;
  for_each_derivation(grammar, symbol,
                      [&](const Derivation& d) { out.push_back(d); });
  return out;
}

namespace {

TraceNode sample_node(const Grammar& g, const std::string& name, Rng& rng,
                      int depth, int max_depth, std::vector<std::string>& spans) {
  if (depth > max_depth)
    throw RecursionError("sampling '" + name + "' exceeded depth " +
                         std::to_string(max_depth));
  const auto& rules = g.rules_for(name);
  double total = 0.0;
  for (const auto& r : rules) total += r.weight;
  double pick = rng.uniform01() * total;
  std::size_t chosen = rules.size() - 1;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    if (pick < rules[i].weight) {
      chosen = i;
      break;
    }
    pick -= rules[i].weight;
  }
  TraceNode node{name, {}};
  for (const auto& elem : rules[chosen].rhs) {
    if (elem.is_nonterminal())
      node.children.push_back(
          sample_node(g, elem.text, rng, depth + 1, max_depth, spans));
    else
      spans.push_back(elem.text);
  }
  return node;
}

}  // namespace

Derivation sample_derivation(const Grammar& grammar, std::string_view symbol,
                             Rng& rng, int max_depth) {
  grammar.symbol(symbol);
  std::vector<std::string> spans;
  Derivation d;
  d.trace = sample_node(grammar, std::string(symbol), rng, 1, max_depth, spans);
  d.utterance = assemble_utterance(spans);
  d.markup = collect_markup(d.trace, grammar);
  return d;
}

}  // namespace tracenlu
