// tracenlu/trace.hpp

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

#ifndef TRACENLU_TRACE_HPP_
#define TRACENLU_TRACE_HPP_

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tracenlu {

class Grammar;

/// One piece of mark-up, rendered "tagset:value".
struct Tag {
  std::string tagset;
  std::string value;

  /// Parses "tagset:value" (split at the first colon). Throws on empty parts.
  static Tag parse(std::string_view text);
  std::string str() const { return tagset + ":" + value; }

  auto operator<=>(const Tag&) const = default;
};

using TagSet = std::set<Tag>;

std::vector<std::string> tag_strings(const TagSet& tags);

/// A grammatical trace: the tree of nonterminal expansions behind one
/// utterance. Terminals never appear in a trace.
struct TraceNode {
  std::string symbol;
  std::vector<TraceNode> children;

  bool operator==(const TraceNode&) const = default;
};

inline constexpr std::string_view kOpenToken = "(";
inline constexpr std::string_view kCloseToken = ")";

/// Human-readable form, e.g. "greet( greet back( use interlocutor first name ) )".
/// Every child is wrapped in its own parentheses: `name( a ) ( b )`.
std::string serialize_trace(const TraceNode& trace);

/// Inverse of serialize_trace. Whitespace around parentheses is not
/// significant. Throws Error on malformed text.
TraceNode parse_trace(std::string_view text);

/// Output-vocabulary token for a symbol name: spaces become underscores.
std::string symbol_token(std::string_view name);

/// `name ( child ... child )` with one token per symbol occurrence.
std::vector<std::string> linearize_trace(const TraceNode& trace);

std::set<std::string> symbol_set(const TraceNode& trace);

/// Result of reading decoder output back into a trace. Malformation is a
/// value: `prefix` holds the longest valid prefix parse (absent when not even
/// the root token was a known symbol).
struct LinearizedParse {
  bool wellformed = false;
  std::optional<TraceNode> trace;
  std::optional<TraceNode> prefix;
  std::string reason;
};

/// When `strict` is set, every child list must also match the nonterminal
/// sequence of some production of its parent.
LinearizedParse parse_linearized(const std::vector<std::string>& tokens,
                                 const Grammar& grammar, bool strict = false);

/// Union of annotations over all trace nodes. Throws UndefinedSymbolError.
TagSet collect_markup(const TraceNode& trace, const Grammar& grammar);

}  // namespace tracenlu

#endif  // TRACENLU_TRACE_HPP_
