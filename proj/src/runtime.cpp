// runtime.cpp

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

#include "tracenlu/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace tracenlu {

namespace {

NearestMap nearest_for(const EmbeddingTable* embeddings, const Vocab& vocab) {
  if (!embeddings) return {};
  return precompute_nearest(*embeddings, vocab);
}

bool includes(const TagSet& have, const TagSet& want) {
  return std::includes(have.begin(), have.end(), want.begin(), want.end());
}

TagSet parse_tags(const nlohmann::json& list, const std::string& where) {
  if (!list.is_array()) throw PolicyError("policy: " + where + " must be a list of tags");
  TagSet out;
  for (const auto& t : list) {
    if (!t.is_string()) throw PolicyError("policy: " + where + " must hold strings");
    out.insert(Tag::parse(t.get<std::string>()));
  }
  return out;
}

std::string string_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string() || it->get<std::string>().empty())
    throw PolicyError("policy: " + where + " needs a non-empty \"" + key + "\"");
  return it->get<std::string>();
}

bool word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '_' || u >= 0x80;
}

}  // namespace

NluPipeline::NluPipeline(Grammar grammar, Model model, const EmbeddingTable* embeddings,
                         PipelineOptions options)
    : NluPipeline(std::move(grammar), model, embeddings,
                  nearest_for(embeddings, model.source_vocab), options) {}

NluPipeline::NluPipeline(Grammar grammar, Model model, const EmbeddingTable* embeddings,
                         NearestMap nearest, PipelineOptions options)
    : grammar_(std::move(grammar)),
      model_(std::move(model)),
      checker_(model_.source_vocab, embeddings, options.spelling),
      nearest_(std::move(nearest)),
      options_(options) {
  check_output_vocab();
}

void NluPipeline::check_output_vocab() const {
  for (const auto& w : model_.target_vocab.words())
    if (w != kOpenToken && w != kCloseToken && !grammar_.find_by_token(w))
      throw Error("pipeline: model output token '" + w + "' is not a grammar symbol");
}

UnderstandingResult understand(const NluPipeline& pipeline, std::string_view utterance) {
  UnderstandingResult r;
  try {
    r.utterance = std::string(utterance.substr(0, kMaxUtteranceChars));
    r.tokens = tokenize(r.utterance);
    if (r.tokens.empty()) {
      r.reason = "empty utterance";
      return r;
    }
    const Model& model = pipeline.model();
    Tokens input = r.tokens;
    if (input.size() > model.config().max_input_len) input.resize(model.config().max_input_len);
    r.repaired = repair_utterance(input, model.source_vocab, pipeline.spell_checker(),
                                  pipeline.nearest());
    r.decoded = translate(model, r.repaired);
    LinearizedParse parse =
        parse_linearized(r.decoded, pipeline.grammar(), pipeline.options().strict_trace);
    r.wellformed = parse.wellformed;
    r.reason = parse.reason;
    r.trace = parse.wellformed ? parse.trace : parse.prefix;
    if (r.trace) {
      r.symbols = symbol_set(*r.trace);
      r.markup = collect_markup(*r.trace, pipeline.grammar());
    }
  } catch (const std::exception& e) {
    r.wellformed = false;
    r.reason = e.what();
  }
  return r;
}

ResponsePolicy ResponsePolicy::parse(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw PolicyError(std::string("policy: ") + e.what());
  }
  if (!doc.is_object()) throw PolicyError("policy: document must be an object");
  try {
    ResponsePolicy p;
    p.fallback_symbol = string_field(doc, "fallback_symbol", "document");
    if (doc.contains("farewell_tag"))
      p.farewell_tag = Tag::parse(string_field(doc, "farewell_tag", "document"));
    const auto& rules = doc.value("rules", nlohmann::json::array());
    if (!rules.is_array()) throw PolicyError("policy: \"rules\" must be a list");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const std::string where = "rule " + std::to_string(i + 1);
      if (!rules[i].is_object()) throw PolicyError("policy: " + where + " must be an object");
      p.rules.push_back({parse_tags(rules[i].value("required_tags", nlohmann::json::array()),
                                    where + " required_tags"),
                         string_field(rules[i], "response_symbol", where)});
    }
    const auto& obligations = doc.value("obligations", nlohmann::json::array());
    if (!obligations.is_array()) throw PolicyError("policy: \"obligations\" must be a list");
    for (std::size_t i = 0; i < obligations.size(); ++i) {
      const std::string where = "obligation " + std::to_string(i + 1);
      const auto& o = obligations[i];
      if (!o.is_object()) throw PolicyError("policy: " + where + " must be an object");
      ObligationRule rule;
      rule.name = string_field(o, "name", where);
      rule.raised_by = Tag::parse(string_field(o, "raised_by", where));
      rule.cleared_by = parse_tags(o.value("cleared_by", nlohmann::json::array()),
                                   where + " cleared_by");
      if (rule.cleared_by.empty()) throw PolicyError("policy: " + where + " clears nothing");
      p.obligations.push_back(std::move(rule));
    }
    return p;
  } catch (const PolicyError&) {
    throw;
  } catch (const std::exception& e) {
    throw PolicyError(std::string("policy: ") + e.what());
  }
}

ResponsePolicy ResponsePolicy::load(const std::string& path) { return parse(read_file(path)); }

void ResponsePolicy::validate(const Grammar& grammar) const {
  auto check = [&](const std::string& name) {
    const NonterminalSymbol* s = grammar.find_symbol(name);
    if (!s) throw PolicyError("policy: unknown symbol '" + name + "'");
    if (!s->top_level) throw PolicyError("policy: symbol '" + name + "' is not top-level");
  };
  for (const auto& r : rules) check(r.response_symbol);
  check(fallback_symbol);
}

ConversationState apply_understanding(const ConversationState& state, const std::string& speaker,
                                      const UnderstandingResult& result,
                                      const std::vector<ObligationRule>& rules) {
  ConversationState next = state;
  next.history.push_back(
      {speaker, result.utterance, result.wellformed, result.trace, result.markup, result.repaired});
  if (!result.wellformed) return next;

  std::set<std::string> cleared;
  for (auto it = next.obligations.begin(); it != next.obligations.end();) {
    const auto rule = std::find_if(rules.begin(), rules.end(),
                                   [&](const ObligationRule& r) { return r.name == it->name; });
    const bool met = rule != rules.end() && it->raised_by != speaker &&
                     std::any_of(rule->cleared_by.begin(), rule->cleared_by.end(),
                                 [&](const Tag& t) { return result.markup.count(t) != 0; });
    if (met) {
      cleared.insert(it->name);
      it = next.obligations.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& r : rules) {
    if (!result.markup.count(r.raised_by) || cleared.count(r.name)) continue;
    const bool pending = std::any_of(next.obligations.begin(), next.obligations.end(),
                                     [&](const Obligation& o) { return o.name == r.name; });
    if (!pending) next.obligations.insert({r.name, r.raised_by, speaker});
  }
  return next;
}

Response respond(const ConversationState& state, const std::string& speaker,
                 const ResponsePolicy& policy, const Grammar& grammar, Rng& rng) {
  TagSet incoming;
  for (auto it = state.history.rbegin(); it != state.history.rend(); ++it)
    if (it->speaker != speaker) {
      incoming = it->markup;
      break;
    }
  TagSet owed;
  for (const auto& o : state.obligations)
    if (o.raised_by != speaker) owed.insert(o.tag);

  std::string symbol = policy.fallback_symbol;
  auto first_match = [&](const TagSet& have, bool need_tags) -> const PolicyRule* {
    for (const auto& r : policy.rules)
      if ((!need_tags || !r.required_tags.empty()) && includes(have, r.required_tags)) return &r;
    return nullptr;
  };
  if (const PolicyRule* r = first_match(incoming, false))
    symbol = r->response_symbol;
  else if (const PolicyRule* o = first_match(owed, true))
    symbol = o->response_symbol;

  Derivation d = sample_derivation(grammar, symbol, rng);
  return {symbol, substitute_speaker(d.utterance, speaker), std::move(d.trace),
          std::move(d.markup)};
}

UnderstandingResult understanding_of(const Response& response) {
  UnderstandingResult r;
  r.utterance = response.utterance;
  r.tokens = tokenize(response.utterance);
  r.decoded = linearize_trace(response.trace);
  r.trace = response.trace;
  r.wellformed = true;
  r.symbols = symbol_set(response.trace);
  r.markup = response.markup;
  return r;
}

std::string substitute_speaker(std::string_view utterance, std::string_view name) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = utterance.find(kSpeakerPlaceholder, pos);
    if (hit == std::string_view::npos) break;
    const std::size_t end = hit + kSpeakerPlaceholder.size();
    const bool whole = (hit == 0 || !word_byte(utterance[hit - 1])) &&
                       (end == utterance.size() || !word_byte(utterance[end]));
    out += utterance.substr(pos, hit - pos);
    out += whole ? name : kSpeakerPlaceholder;
    pos = end;
  }
  out += utterance.substr(pos);
  return out;
}

std::string Transcript::text() const {
  std::string out;
  for (const auto& t : turns) out += t.speaker + ": " + t.utterance + "\n";
  return out;
}

std::string Transcript::json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Turn& t = turns[i];
    nlohmann::ordered_json turn;
    turn["turn"] = i + 1;
    turn["speaker"] = t.speaker;
    turn["utterance"] = t.utterance;
    turn["wellformed"] = t.wellformed;
    turn["trace"] = t.trace ? nlohmann::ordered_json(serialize_trace(*t.trace)) : nullptr;
    turn["markup"] = tag_strings(t.markup);
    turn["repaired"] = t.repaired;
    doc.push_back(std::move(turn));
  }
  return doc.dump(2) + "\n";
}

Transcript chat_loop(const NluPipeline& pipeline, const ResponsePolicy& policy, std::istream& in,
                     std::ostream& out, const ChatOptions& options) {
  ConversationState state;
  state.player = options.player;
  state.npc = options.npc;
  Rng rng(options.seed);
  auto farewell = [&](const Turn& t) {
    return policy.farewell_tag && t.wellformed && t.markup.count(*policy.farewell_tag) != 0;
  };

  std::string line;
  while (true) {
    if (!options.prompt.empty()) out << options.prompt << std::flush;
    if (!std::getline(in, line)) break;
    const std::string utterance = trim(line);
    if (utterance.empty()) continue;
    if (options.prompt.empty()) out << options.player << ": " << utterance << "\n";

    state = apply_understanding(state, options.player, understand(pipeline, utterance),
                                policy.obligations);
    const bool player_farewell = farewell(state.history.back());

    const Response reply = respond(state, options.npc, policy, pipeline.grammar(), rng);
    state = apply_understanding(state, options.npc, understanding_of(reply), policy.obligations);
    out << options.npc << ": " << reply.utterance << "\n" << std::flush;
    if (player_farewell && farewell(state.history.back())) break;
  }
  if (!in.good() && !in.eof()) throw Error("chat: input stream failed");
  return {state.history, state};
}

}  // namespace tracenlu
