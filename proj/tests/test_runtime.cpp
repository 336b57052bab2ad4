// tests/test_runtime.cpp

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

#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "tracenlu/runtime.hpp"

using namespace tracenlu;
using namespace tracenlu::testing;

namespace {

const NluPipeline& desk_pipeline() {
  static const NluPipeline pipeline = [] {
    static const EmbeddingTable embeddings = load_embeddings(data_path("desk_embeddings.vec"));
    return NluPipeline(desk_grammar(), trained_desk_model(), &embeddings);
  }();
  return pipeline;
}

ResponsePolicy desk_policy() { return ResponsePolicy::load(data_path("desk_policy.json")); }

UnderstandingResult heard(TagSet markup, bool wellformed = true) {
  UnderstandingResult r;
  r.utterance = "x";
  r.wellformed = wellformed;
  r.markup = std::move(markup);
  return r;
}

Tag tag(const char* text) { return Tag::parse(text); }

}  // namespace

TEST_CASE("understand on the trained desk model") {
  const NluPipeline& p = desk_pipeline();

  const auto hello = understand(p, "hello .");
  CHECK(hello.wellformed);
  CHECK(hello.markup.count(tag("speech_act:greeting")));

  const auto andrew = understand(p, "Oh, greetings, Andrew.");
  REQUIRE(andrew.wellformed);
  CHECK(serialize_trace(*andrew.trace) ==
        "greet( greet back( use interlocutor first name ) )");

  const auto typo = understand(p, "helo");
  CHECK(typo.tokens == Tokens{"helo"});
  CHECK(typo.repaired == Tokens{"hello"});

  const auto synonym = understand(p, "It's splendid!");
  CHECK(synonym.repaired == Tokens{"it's", "wonderful", "!"});
  CHECK(synonym.markup.count(tag("speech_act:agreement")));

  for (const char* u : {"Hello.", "It's spectacular!", "I'm Joe.", "Bye.", "Where are you from?"}) {
    const auto r = understand(p, u);
    CAPTURE(std::string(u));
    REQUIRE(r.wellformed);
    CHECK(r.markup == collect_markup(*r.trace, p.grammar()));
    CHECK(r.symbols == symbol_set(*r.trace));
  }
}

TEST_CASE("understand never throws") {
  const NluPipeline& p = desk_pipeline();
  const auto empty = understand(p, "");
  CHECK_FALSE(empty.wellformed);
  CHECK(empty.markup.empty());
  CHECK(understand(p, "   \t ").markup.empty());

  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    std::string text;
    for (std::size_t k = rng.uniform_index(200); k > 0; --k)
      text += static_cast<char>(1 + rng.uniform_index(255));
    CHECK_NOTHROW(understand(p, text));
  }
  std::string huge;
  while (huge.size() < 30000) huge += "hello there , how are you ? ";
  UnderstandingResult r;
  CHECK_NOTHROW(r = understand(p, huge));
  CHECK(r.utterance.size() == kMaxUtteranceChars);
  CHECK(r.repaired.size() <= p.model().config().max_input_len);
}

TEST_CASE("pipeline rejects a model that does not match the grammar") {
  Model m = trained_desk_model();
  Grammar g0 = Grammar::parse(kG0Source);
  CHECK_THROWS_AS(NluPipeline(g0, m), Error);
}

TEST_CASE("apply_understanding") {
  const auto rules = desk_policy().obligations;
  ConversationState s;

  SUBCASE("greeting raises, greeting back clears") {
    auto a = apply_understanding(s, "Joe", heard({tag("speech_act:greeting")}), rules);
    REQUIRE(a.obligations.size() == 1);
    CHECK(a.obligations.begin()->name == "greeting");
    CHECK(a.obligations.begin()->raised_by == "Joe");
    auto b = apply_understanding(a, "Susan", heard({tag("speech_act:greeting")}), rules);
    CHECK(b.obligations.empty());
    CHECK(b.history.size() == 2);
  }
  SUBCASE("the raiser cannot clear its own obligation") {
    auto a = apply_understanding(s, "Joe", heard({tag("speech_act:greeting")}), rules);
    auto b = apply_understanding(a, "Joe", heard({tag("speech_act:greeting")}), rules);
    CHECK(b.obligations == a.obligations);
  }
  SUBCASE("question cleared by an answer") {
    auto a = apply_understanding(s, "Susan", heard({tag("speech_act:question")}), rules);
    auto b = apply_understanding(a, "Joe",
                                 heard({tag("speech_act:answer"), tag("topic:origin")}), rules);
    CHECK(b.obligations.empty());
  }
  SUBCASE("malformed turns only append") {
    auto a = apply_understanding(s, "Joe", heard({tag("speech_act:greeting")}), rules);
    auto b = apply_understanding(a, "Susan", heard({tag("speech_act:greeting")}, false), rules);
    CHECK(b.obligations == a.obligations);
    CHECK(b.history.size() == 2);
    CHECK_FALSE(b.history.back().wellformed);
  }
  SUBCASE("pure and replayable") {
    const auto r = heard({tag("speech_act:farewell")});
    const ConversationState before = s;
    auto a = apply_understanding(s, "Joe", r, rules);
    auto b = apply_understanding(s, "Joe", r, rules);
    CHECK(a == b);
    CHECK(s == before);
  }
  SUBCASE("obligations come from tags seen in history") {
    Rng rng(9);
    const std::vector<Tag> pool = {tag("speech_act:greeting"), tag("speech_act:question"),
                                   tag("speech_act:answer"), tag("speech_act:farewell"),
                                   tag("speech_act:introduction"), tag("topic:weather")};
    ConversationState st;
    for (int i = 0; i < 200; ++i) {
      TagSet m;
      for (const auto& t : pool)
        if (rng.uniform_index(3) == 0) m.insert(t);
      st = apply_understanding(st, i % 2 ? "Susan" : "Joe", heard(m, rng.uniform_index(5) != 0),
                               rules);
      std::set<Tag> seen;
      for (const auto& turn : st.history) seen.insert(turn.markup.begin(), turn.markup.end());
      for (const auto& o : st.obligations) CHECK(seen.count(o.tag));
    }
  }
}

TEST_CASE("response policy file") {
  const Grammar g = desk_grammar();
  const ResponsePolicy p = desk_policy();
  CHECK_NOTHROW(p.validate(g));
  CHECK(p.fallback_symbol == "ask how are you");
  REQUIRE(p.farewell_tag);
  CHECK(p.farewell_tag->str() == "speech_act:farewell");
  CHECK(p.obligations.size() == 4);

  CHECK_THROWS_AS(ResponsePolicy::parse("{"), PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse("[]"), PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse(R"({"rules": []})"), PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse(R"({"fallback_symbol": "greet",
      "rules": [{"required_tags": ["nocolon"], "response_symbol": "greet"}]})"),
                  PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse(R"({"fallback_symbol": "greet",
      "obligations": [{"name": "x", "raised_by": "a:b", "cleared_by": []}]})"),
                  PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse(R"({"fallback_symbol": "say hello"})").validate(g),
                  PolicyError);
  CHECK_THROWS_AS(ResponsePolicy::parse(R"({"fallback_symbol": "nothing"})").validate(g),
                  PolicyError);
}

TEST_CASE("respond") {
  const Grammar g = desk_grammar();
  const ResponsePolicy policy = desk_policy();
  const auto rules = policy.obligations;
  Rng rng(12);

  SUBCASE("greeting gets a greeting") {
    auto s = apply_understanding({}, "Joe", heard({tag("speech_act:greeting")}), rules);
    const Response r = respond(s, "Susan", policy, g, rng);
    CHECK(r.symbol == "greet");
    CHECK(r.trace.symbol == "greet");
    CHECK(r.markup.count(tag("speech_act:greeting")));
  }
  SUBCASE("no rule fires") {
    auto s = apply_understanding({}, "Joe", heard({tag("topic:nothing")}), rules);
    CHECK(respond(s, "Susan", policy, g, rng).symbol == policy.fallback_symbol);
    CHECK(respond({}, "Susan", policy, g, rng).symbol == policy.fallback_symbol);
  }
  SUBCASE("pending obligation steers the reply") {
    auto s = apply_understanding({}, "Joe", heard({tag("speech_act:greeting")}), rules);
    s = apply_understanding(s, "Joe", heard({}, false), rules);
    CHECK(respond(s, "Susan", policy, g, rng).symbol == "greet");
  }
  SUBCASE("introductions use the speaker's name") {
    auto s = apply_understanding({}, "Joe", heard({tag("speech_act:introduction")}), rules);
    bool saw_name = false;
    for (int i = 0; i < 20; ++i) {
      const Response r = respond(s, "Susan", policy, g, rng);
      CHECK(r.symbol == "introduce self");
      CHECK(r.utterance.find(kSpeakerPlaceholder) == std::string::npos);
      saw_name = saw_name || r.utterance.find("Susan") != std::string::npos;
    }
    CHECK(saw_name);
  }
  SUBCASE("generated mark-up agrees with its own trace") {
    for (const auto& symbol : g.top_level()) {
      ResponsePolicy only;
      only.fallback_symbol = symbol;
      for (int i = 0; i < 20; ++i) {
        const Response r = respond({}, "Susan", only, g, rng);
        const TagSet again = collect_markup(r.trace, g);
        CHECK(again == r.markup);
        const TagSet& own = g.symbol(symbol).annotations;
        CHECK(std::includes(again.begin(), again.end(), own.begin(), own.end()));
      }
    }
  }
}

TEST_CASE("speaker substitution") {
  CHECK(substitute_speaker("i'm <SPEAKER> , by the way", "Susan") == "i'm Susan , by the way");
  CHECK(substitute_speaker("<SPEAKER>.", "Susan") == "Susan.");
  CHECK(substitute_speaker("<SPEAKER> and <SPEAKER>", "Al") == "Al and Al");
  CHECK(substitute_speaker("x<SPEAKER>", "Al") == "x<SPEAKER>");
  CHECK(substitute_speaker("no placeholder", "Al") == "no placeholder");
}

TEST_CASE("chat loop") {
  const NluPipeline& p = desk_pipeline();
  const ResponsePolicy policy = desk_policy();
  ChatOptions o;
  o.player = "Joe";
  o.seed = 3;

  SUBCASE("scripted conversation") {
    std::istringstream in("Hello.\n\nIt's spectacular!\nI'm Joe.\nBye.\nNever read.\n");
    std::ostringstream out;
    const Transcript t = chat_loop(p, policy, in, out, o);
    REQUIRE(t.turns.size() == 8);
    const char* expected[] = {"speech_act:greeting", "speech_act:agreement",
                              "speech_act:introduction", "speech_act:farewell"};
    for (std::size_t i = 0; i < 4; ++i) {
      const Turn& player = t.turns[2 * i];
      CHECK(player.speaker == "Joe");
      CHECK(player.wellformed);
      CHECK(player.markup.count(tag(expected[i])));
      CHECK(t.turns[2 * i + 1].speaker == "Susan");
    }
    CHECK(t.turns.back().markup.count(tag("speech_act:farewell")));
    CHECK(out.str() == t.text());
    CHECK(t.json().find("\"speaker\": \"Susan\"") != std::string::npos);

    std::istringstream again_in("Hello.\n\nIt's spectacular!\nI'm Joe.\nBye.\n");
    std::ostringstream again_out;
    CHECK(chat_loop(p, policy, again_in, again_out, o).text() == t.text());
  }
  SUBCASE("empty stream") {
    std::istringstream in("");
    std::ostringstream out;
    const Transcript t = chat_loop(p, policy, in, out, o);
    CHECK(t.turns.empty());
    CHECK(out.str().empty());
    CHECK(t.json() == "[]\n");
  }
}
