// src/trace.cpp

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

#include "tracenlu/trace.hpp"

#include <cctype>

#include "tracenlu/grammar.hpp"

namespace tracenlu {

Tag Tag::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw Error("tag '" + std::string(text) + "' is not of the form tagset:value");
  Tag tag{trim(text.substr(0, colon)), trim(text.substr(colon + 1))};
  if (tag.tagset.empty() || tag.value.empty())
    throw Error("tag '" + std::string(text) + "' has an empty part");
  return tag;
}

std::vector<std::string> tag_strings(const TagSet& tags) {
  std::vector<std::string> out;
  for (const auto& t : tags) out.push_back(t.str());
  return out;
}

std::string serialize_trace(const TraceNode& trace) {
  std::string out = trace.symbol;
  for (std::size_t i = 0; i < trace.children.size(); ++i) {
    out += i == 0 ? "( " : " ( ";
    out += serialize_trace(trace.children[i]);
    out += " )";
  }
  return out;
}

namespace {

class TraceReader {
 public:
  explicit TraceReader(std::string_view text) : text_(text) {}

  TraceNode read() {
    TraceNode node = node_();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing text");
    return node;
  }

 private:
  TraceNode node_() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')') ++pos_;
    TraceNode node{trim(text_.substr(start, pos_ - start)), {}};
    if (node.symbol.empty()) fail("expected a symbol name");
    while (true) {
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != '(') break;
      ++pos_;
      node.children.push_back(node_());
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
    }
    return node;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("malformed trace at offset " + std::to_string(pos_) + ": " + what);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

TraceNode parse_trace(std::string_view text) { return TraceReader(text).read(); }

std::string symbol_token(std::string_view name) {
  std::string token(name);
  for (char& c : token)
    if (c == ' ') c = '_';
  return token;
}

namespace {

void linearize_into(const TraceNode& node, std::vector<std::string>& out) {
  out.push_back(symbol_token(node.symbol));
  if (node.children.empty()) return;
  out.emplace_back(kOpenToken);
  for (const auto& child : node.children) linearize_into(child, out);
  out.emplace_back(kCloseToken);
}

void collect_symbols(const TraceNode& node, std::set<std::string>& out) {
  out.insert(node.symbol);
  for (const auto& child : node.children) collect_symbols(child, out);
}

// Recursive descent over decoder tokens. On failure `node` keeps whatever was
// recognised before the fault, which becomes the malformed prefix.
class LinearReader {
 public:
  LinearReader(const std::vector<std::string>& tokens, const Grammar& g)
      : tokens_(tokens), g_(g) {}

  bool node(TraceNode& out) {
    if (pos_ >= tokens_.size()) return fail("unexpected end of sequence");
    const auto* sym = g_.find_by_token(tokens_[pos_]);
    if (!sym) return fail("unknown symbol token '" + tokens_[pos_] + "'");
    out.symbol = sym->name;
    ++pos_;
    if (pos_ >= tokens_.size() || tokens_[pos_] != kOpenToken) return true;
    ++pos_;
    while (true) {
      if (pos_ >= tokens_.size()) return fail("unclosed child list");
      if (tokens_[pos_] == kCloseToken) {
        if (out.children.empty()) return fail("empty child list");
        ++pos_;
        return true;
      }
      TraceNode child;
      bool ok = node(child);
      if (!child.symbol.empty()) out.children.push_back(std::move(child));
      if (!ok) return false;
    }
  }

  std::size_t pos() const { return pos_; }
  const std::string& reason() const { return reason_; }

 private:
  bool fail(std::string why) {
    if (reason_.empty()) reason_ = std::move(why);
    return false;
  }

  const std::vector<std::string>& tokens_;
  const Grammar& g_;
  std::size_t pos_ = 0;
  std::string reason_;
};

// Returns the symbol of the first node whose children match no production.
const TraceNode* first_rule_violation(const TraceNode& node, const Grammar& g) {
  bool matched = false;
  for (const auto& rule : g.rules_for(node.symbol)) {
    std::size_t k = 0;
    bool ok = true;
    for (const auto& elem : rule.rhs) {
      if (!elem.is_nonterminal()) continue;
      if (k >= node.children.size() || node.children[k].symbol != elem.text) {
        ok = false;
        break;
      }
      ++k;
    }
    if (ok && k == node.children.size()) {
      matched = true;
      break;
    }
  }
  if (!matched) return &node;
  for (const auto& child : node.children)
    if (const auto* bad = first_rule_violation(child, g)) return bad;
  return nullptr;
}

}  // namespace

std::vector<std::string> linearize_trace(const TraceNode& trace) {
  std::vector<std::string> out;
  linearize_into(trace, out);
  return out;
}

std::set<std::string> symbol_set(const TraceNode& trace) {
  std::set<std::string> out;
  collect_symbols(trace, out);
  return out;
}

LinearizedParse parse_linearized(const std::vector<std::string>& tokens,
                                 const Grammar& grammar, bool strict) {
  LinearizedParse result;
  LinearReader reader(tokens, grammar);
  TraceNode root;
  bool ok = reader.node(root);
  if (!root.symbol.empty()) result.prefix = root;
  if (!ok) {
    result.reason = reader.reason();
    return result;
  }
  if (reader.pos() != tokens.size()) {
    result.reason = "trailing tokens after the root";
    return result;
  }
  if (strict) {
    if (const auto* bad = first_rule_violation(root, grammar)) {
      result.reason = "no production of '" + bad->symbol + "' matches its children";
      return result;
    }
  }
  result.wellformed = true;
  result.trace = std::move(root);
  return result;
}

namespace {

void collect_tags(const TraceNode& node, const Grammar& g, TagSet& out) {
  const auto& sym = g.symbol(node.symbol);
  out.insert(sym.annotations.begin(), sym.annotations.end());
  for (const auto& child : node.children) collect_tags(child, g, out);
}

}  // namespace

TagSet collect_markup(const TraceNode& trace, const Grammar& grammar) {
  TagSet out;
  collect_tags(trace, grammar, out);
  return out;
}

}  // namespace tracenlu
