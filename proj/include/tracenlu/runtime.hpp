// tracenlu/runtime.hpp

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

#ifndef TRACENLU_RUNTIME_HPP_
#define TRACENLU_RUNTIME_HPP_

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tracenlu/grammar.hpp"
#include "tracenlu/model.hpp"
#include "tracenlu/oov.hpp"

namespace tracenlu {

class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Placeholder terminal replaced by the speaking character's name.
inline constexpr std::string_view kSpeakerPlaceholder = "<SPEAKER>";

/// Longest input accepted by understand(); longer text is cut.
inline constexpr std::size_t kMaxUtteranceChars = 10000;

struct PipelineOptions {
  /// Require every decoded child list to match a production.
  bool strict_trace = false;
  SpellCheckerConfig spelling;
};

/// Everything needed to turn text into mark-up. Immutable once built, so
/// one instance can serve any number of conversations.
class NluPipeline {
 public:
  /// Without embeddings, repair uses the spell checker over the training
  /// vocabulary alone. Throws Error when an output token of the model is
  /// neither a grammar symbol nor a bracket.
  NluPipeline(Grammar grammar, Model model, const EmbeddingTable* embeddings = nullptr,
              PipelineOptions options = {});
  /// Uses a precomputed nearest map instead of building one.
  NluPipeline(Grammar grammar, Model model, const EmbeddingTable* embeddings,
              NearestMap nearest, PipelineOptions options = {});

  const Grammar& grammar() const { return grammar_; }
  const Model& model() const { return model_; }
  const SpellChecker& spell_checker() const { return checker_; }
  const NearestMap& nearest() const { return nearest_; }
  const PipelineOptions& options() const { return options_; }

 private:
  void check_output_vocab() const;

  Grammar grammar_;
  Model model_;
  SpellChecker checker_;
  NearestMap nearest_;
  PipelineOptions options_;
};

struct UnderstandingResult {
  std::string utterance;
  Tokens tokens;
  Tokens repaired;
  Tokens decoded;
  /// The full trace when wellformed, otherwise the longest valid prefix.
  std::optional<TraceNode> trace;
  bool wellformed = false;
  std::string reason;
  std::set<std::string> symbols;
  TagSet markup;
};

/// Tokenize, repair, decode, parse and collect mark-up. Never throws;
/// failures come back as wellformed = false with a reason.
UnderstandingResult understand(const NluPipeline& pipeline, std::string_view utterance);

/// A tag that obliges the other party to reply, and the tags that count as
/// the reply.
struct ObligationRule {
  std::string name;
  Tag raised_by;
  TagSet cleared_by;
  bool operator==(const ObligationRule&) const = default;
};

struct Obligation {
  std::string name;
  Tag tag;
  std::string raised_by;  // speaker
  auto operator<=>(const Obligation&) const = default;
};

struct Turn {
  std::string speaker;
  std::string utterance;
  bool wellformed = false;
  std::optional<TraceNode> trace;
  TagSet markup;
  Tokens repaired;
  bool operator==(const Turn&) const = default;
};

struct ConversationState {
  std::vector<Turn> history;
  std::set<Obligation> obligations;
  std::string player;
  std::string npc;
  bool operator==(const ConversationState&) const = default;
};

struct PolicyRule {
  TagSet required_tags;
  std::string response_symbol;
  bool operator==(const PolicyRule&) const = default;
};

/// Response selection read from a JSON document:
///   {"rules": [{"required_tags": ["tagset:value", ...],
///               "response_symbol": "greet"}, ...],
///    "fallback_symbol": "...", "farewell_tag": "speech_act:farewell",
///    "obligations": [{"name": "greeting", "raised_by": "speech_act:greeting",
///                     "cleared_by": ["speech_act:greeting"]}, ...]}
struct ResponsePolicy {
  std::vector<PolicyRule> rules;
  std::string fallback_symbol;
  std::optional<Tag> farewell_tag;
  std::vector<ObligationRule> obligations;

  static ResponsePolicy parse(std::string_view json);
  static ResponsePolicy load(const std::string& path);
  /// Throws PolicyError unless every named symbol is top-level.
  void validate(const Grammar& grammar) const;
  bool operator==(const ResponsePolicy&) const = default;
};

/// Pure state transition. Appends the turn; a wellformed turn first clears
/// obligations raised by the other speaker that its mark-up satisfies, then
/// raises obligations for its own tags unless one of the same name is
/// already pending. Malformed turns leave obligations alone.
ConversationState apply_understanding(const ConversationState& state, const std::string& speaker,
                                      const UnderstandingResult& result,
                                      const std::vector<ObligationRule>& rules);

struct Response {
  std::string symbol;
  std::string utterance;
  TraceNode trace;
  TagSet markup;
};

/// Picks the first rule whose tags are all in the other speaker's last
/// mark-up, then the first whose tags are covered by obligations owed by
/// `speaker`, then the fallback; generates from the chosen symbol and puts
/// the speaker's name in place of the placeholder.
Response respond(const ConversationState& state, const std::string& speaker,
                 const ResponsePolicy& policy, const Grammar& grammar, Rng& rng);

/// Wraps a generated response so it can go through apply_understanding.
UnderstandingResult understanding_of(const Response& response);

/// Replaces every whole-token occurrence of the placeholder.
std::string substitute_speaker(std::string_view utterance, std::string_view name);

struct ChatOptions {
  std::string player = "Player";
  std::string npc = "Susan";
  std::uint64_t seed = 0;
  /// Printed before each player line when reading interactively.
  std::string prompt;
};

struct Transcript {
  std::vector<Turn> turns;
  ConversationState final_state;

  /// "Speaker: utterance" lines.
  std::string text() const;
  /// Per-turn mark-up, traces and repairs as a JSON array.
  std::string json() const;
};

/// Reads one player utterance per line until end of stream or a farewell
/// exchange, answering each with a generated NPC turn. Blank lines are
/// skipped. Each turn is echoed to `out` as it happens.
Transcript chat_loop(const NluPipeline& pipeline, const ResponsePolicy& policy, std::istream& in,
                     std::ostream& out, const ChatOptions& options = {});

}  // namespace tracenlu

#endif  // TRACENLU_RUNTIME_HPP_
