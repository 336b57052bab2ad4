#!/usr/bin/env python3
# Copyright 2026  The tracenlu Authors
# Licensed under the Apache License, Version 2.0.
"""Authoring script for data/desk_grammar.json.

Rules are written as compact strings: `[symbol]` references a nonterminal,
everything else is terminal text. Punctuation words become their own terminal
span so surface assembly attaches them to the preceding word.

The script also brute-force enumerates the grammar (independently of the C++
library) and writes data/desk_grammar.stats.json, which the test suite uses
as a committed oracle.
"""

import itertools
import json
import re
import sys
from collections import Counter, defaultdict
from pathlib import Path

NAMES = ["Andrew", "Joe", "Susan", "Ben", "Barbara", "Sandra", "Louis", "Jack",
         "Maggie", "Frank", "Helen", "Walter", "Ruth"]

# name -> (annotations, top_level)
SYMBOLS = {
    # greetings
    "greet": (["speech_act:greeting"], True),
    "greet initially": (["move:greet_first"], False),
    "greet back": (["move:greet_back"], False),
    "say hello": ([], False),
    "use interlocutor first name": (["style:address_by_name"], False),
    # farewells
    "farewell": (["speech_act:farewell"], True),
    "say goodbye": (["move:goodbye"], False),
    "excuse self": (["move:apologize"], False),
    "announce departure": (["move:leave_taking"], False),
    # questions
    "ask": (["speech_act:question"], False),
    "ask how are you": (["speech_act:question", "topic:wellbeing"], True),
    "make small talk": (["move:small_talk"], False),
    "ask where from": (["speech_act:question", "topic:origin"], True),
    "ask about work": (["speech_act:question", "topic:work"], True),
    "ask about the weather": (["speech_act:question", "topic:weather"], True),
    # answers
    "answer": (["speech_act:answer"], True),
    "answer how are you": (["topic:wellbeing"], False),
    "answer how are you positively": (["sentiment:positive"], False),
    "answer how are you neutrally": (["sentiment:neutral"], False),
    "answer how are you negatively": (["sentiment:negative"], False),
    "answer where from": (["speech_act:answer", "topic:origin"], True),
    "say from here": (["origin:local"], False),
    "say from elsewhere": (["origin:elsewhere"], False),
    "name a place": ([], False),
    "answer about work": (["speech_act:answer", "topic:work"], True),
    "say workplace": (["employment:employed"], False),
    "say unemployed": (["employment:none"], False),
    "name a workplace": ([], False),
    # weather
    "agree": (["speech_act:agreement"], True),
    "agree about the weather": (["topic:weather"], False),
    "agree that the weather is good": (["weather:good"], False),
    "agree that the weather is bad": (["weather:bad"], False),
    "say something positive": (["sentiment:positive"], False),
    "say something negative": (["sentiment:negative"], False),
    "remark on the weather": (["speech_act:statement", "topic:weather"], True),
    "remark that the weather is good": (["weather:good"], False),
    "remark that the weather is bad": (["weather:bad"], False),
    "intensify": ([], False),
    # introductions
    "introduce self": (["speech_act:introduction", "move:self_introduction"], True),
    "state own name": ([], False),
    "respond to introduction": (["speech_act:pleasantry", "move:nice_to_meet"], True),
}

POSITIVE = ["wonderful", "amazing", "spectacular", "nice", "lovely", "great",
            "beautiful", "gorgeous", "fantastic", "perfect"]
NEGATIVE = ["awful", "terrible", "dreary", "miserable", "gloomy", "nasty",
            "dreadful", "horrible"]

RULES = [
    ("greet", "[greet initially]", 1),
    ("greet", "[greet back]", 3),
    ("greet initially", "[say hello] .", 1),
    ("greet initially", "[say hello] !", 1),
    ("greet initially", "[say hello] , [use interlocutor first name] .", 1),
    ("greet initially",
     "[say hello] , [use interlocutor first name] . [ask how are you]", 1),
    *[("say hello", w, 1) for w in
      ["Hello", "Hi", "Hey", "Hi there", "Good evening", "Howdy", "Hey there",
       "Good to see you"]],
    *[("greet back", r, 1) for r in [
        "Oh , greetings , [use interlocutor first name] .",
        "Oh , hi , [use interlocutor first name] .",
        "Oh , hey , [use interlocutor first name] .",
        "Well , hello , [use interlocutor first name] .",
        "Oh , hello there , [use interlocutor first name] .",
        "Oh , hi !",
        "Oh , hey !",
        "Well , hello there !",
        "Oh , greetings !",
    ]],
    *[("use interlocutor first name", n, 1) for n in NAMES],

    ("farewell", "[say goodbye] .", 1),
    ("farewell", "[say goodbye] , [use interlocutor first name] .", 1),
    ("farewell", "[excuse self] , [announce departure] .", 1),
    ("farewell", "[excuse self] , [announce departure] . "
     "[say goodbye] , [use interlocutor first name] .", 1),
    *[("say goodbye", w, 1) for w in
      ["Bye", "Goodbye", "See you later", "Take care", "So long", "Good night",
       "See you around", "Farewell"]],
    *[("excuse self", w, 1) for w in
      ["Sorry", "Excuse me", "Sorry , this is rude", "Pardon me", "Forgive me"]],
    *[("announce departure", w, 1) for w in
      ["but I have to go", "but I must be going", "but I should get going",
       "but I need to head out", "but I have to run"]],

    ("ask", "[ask how are you]", 1),
    ("ask", "[ask where from]", 1),
    ("ask", "[ask about work]", 1),
    ("ask", "[ask about the weather]", 1),
    ("ask how are you", "[make small talk]", 1),
    *[("make small talk", w, 1) for w in
      ["How are you ?", "How are you doing ?", "How's it going ?",
       "How have you been ?", "How are things ?", "Yourself ?",
       "And yourself ?", "How about you ?", "How's it going with you ?"]],
    *[("ask where from", w, 1) for w in
      ["Where are you from ?", "Are you from around here ?",
       "Are you from here ?", "Where did you grow up ?", "Were you born here ?",
       "You from here ?"]],
    *[("ask about work", w, 1) for w in
      ["What do you do ?", "Where do you work ?", "What do you do for work ?",
       "What's your job ?", "Do you work around here ?",
       "What do you do for a living ?"]],
    *[("ask about the weather", w, 1) for w in
      ["How about this weather ?", "How's the weather out there ?",
       "Do you like this weather ?", "What do you think of the weather ?",
       "Some weather we're having , huh ?"]],

    ("answer", "[answer how are you]", 1),
    ("answer how are you", "[answer how are you positively]", 1),
    ("answer how are you", "[answer how are you neutrally]", 1),
    ("answer how are you", "[answer how are you negatively]", 1),
    ("answer how are you", "[answer how are you positively] [ask]", 1),
    ("answer how are you", "[answer how are you neutrally] [ask]", 1),
    *[("answer how are you positively", w, 1) for w in
      ["I'm great .", "Fine , fine .", "Doing well , thanks .",
       "Never better !", "Pretty good .", "Really good , thanks ."]],
    *[("answer how are you neutrally", w, 1) for w in
      ["I'm alright .", "Not bad .", "Fine .", "Can't complain .",
       "I'm okay .", "So-so ."]],
    *[("answer how are you negatively", w, 1) for w in
      ["Not so good .", "I've been better .", "Pretty rough , honestly .",
       "I'm tired .", "Not great ."]],

    ("answer where from", "[say from here]", 1),
    ("answer where from", "[say from elsewhere]", 1),
    *[("say from here", w, 1) for w in
      ["I'm from here .", "Yes , I grew up here .", "Born and raised here .",
       "Yep , I was born here .", "I've always lived here ."]],
    ("say from elsewhere", "Nope , I wasn't born here .", 1),
    ("say from elsewhere", "No , I'm from [name a place] .", 1),
    ("say from elsewhere", "I grew up in [name a place] .", 1),
    ("say from elsewhere", "I moved here from [name a place] .", 1),
    ("say from elsewhere", "Originally [name a place] .", 1),
    *[("name a place", w, 1) for w in
      ["Chicago", "Boston", "Ohio", "the city", "out west", "Texas",
       "Pittsburgh", "Iowa"]],

    ("answer about work", "[say workplace]", 1),
    ("answer about work", "[say unemployed]", 1),
    ("say workplace", "I work at [name a workplace] .", 1),
    ("say workplace", "I'm employed at [name a workplace] .", 1),
    ("say workplace", "I have a job at [name a workplace] .", 1),
    ("say workplace", "Over at [name a workplace] .", 1),
    *[("say unemployed", w, 1) for w in
      ["I don't work .", "I'm not working right now .", "I'm between jobs .",
       "I'm retired .", "I don't have a job ."]],
    *[("name a workplace", w, 1) for w in
      ["8th Street Delicatessen", "Schmitz Diner", "the law offices",
       "Chez Maggie", "the hardware store", "the bank", "the school",
       "the post office", "the mill", "the newspaper"]],

    ("agree", "[agree about the weather]", 1),
    ("agree about the weather", "[agree that the weather is good]", 1),
    ("agree about the weather", "[agree that the weather is bad]", 1),
    ("agree that the weather is good",
     "[say something positive] , the weather is [say something positive] .", 1),
    ("agree that the weather is good", "It's [say something positive] !", 1),
    ("agree that the weather is good",
     "[say something positive] , it's [intensify] [say something positive] .", 1),
    ("agree that the weather is good", "It really is [say something positive] .", 1),
    ("agree that the weather is good",
     "Really , though : it's [say something positive] .", 1),
    ("agree that the weather is bad", "Yeah , it's [say something negative] .", 1),
    ("agree that the weather is bad", "It really is [say something negative] .", 1),
    ("agree that the weather is bad", "Ugh , it is [say something negative] .", 1),
    *[("say something positive", w, 1) for w in POSITIVE],
    ("say something positive", "Yes", 0.01),
    *[("say something negative", w, 1) for w in NEGATIVE],

    ("remark on the weather", "[remark that the weather is good]", 1),
    ("remark on the weather", "[remark that the weather is bad]", 1),
    ("remark that the weather is good", "This weather is [say something positive] .", 1),
    ("remark that the weather is good",
     "This weather is [intensify] [say something positive] .", 1),
    ("remark that the weather is good",
     "The weather is [say something positive] tonight .", 1),
    ("remark that the weather is bad", "This weather is [say something negative] .", 1),
    ("remark that the weather is bad",
     "This weather is [intensify] [say something negative] .", 1),
    ("remark that the weather is bad",
     "The weather is [say something negative] tonight .", 1),
    *[("intensify", w, 1) for w in ["really", "just", "so", "pretty", "truly"]],

    ("introduce self", "I'm [state own name] , by the way .", 1),
    ("introduce self", "My name is [state own name] .", 1),
    ("introduce self", "I'm [state own name] .", 1),
    ("introduce self", "Call me [state own name] .", 1),
    ("introduce self", "[state own name] .", 1),
    ("introduce self", "[say hello] , I'm [state own name] .", 1),
    ("state own name", "<SPEAKER>", 1000),
    *[("state own name", n, 1) for n in NAMES],
    *[("respond to introduction", w, 1) for w in
      ["Nice to meet you .", "Pleased to meet you .", "Good to meet you .",
       "A pleasure .", "Nice meeting you ."]],
    ("respond to introduction", "Nice to meet you , [use interlocutor first name] .", 1),
    ("respond to introduction", "Pleased to meet you , [use interlocutor first name] .", 1),
]


def rhs_of(text):
    out = []
    pending = []

    def flush():
        if pending:
            out.append({"t": " ".join(pending)})
            pending.clear()

    for word in text.split():
        if re.fullmatch(r"[^\w\s<>]+", word):
            flush()
            out.append({"t": word})
            continue
        pending.append(word)
    flush()
    # re-split on nonterminal references
    final = []
    for elem in out:
        parts = re.split(r"(\[[^\]]+\])", elem["t"])
        for p in parts:
            p = p.strip()
            if not p:
                continue
            if p.startswith("["):
                final.append({"nt": p[1:-1]})
            else:
                final.append({"t": p})
    return final


def grammar_doc():
    symbols = {name: {"annotations": tags, "top_level": top}
               for name, (tags, top) in SYMBOLS.items()}
    rules = []
    for lhs, text, weight in RULES:
        rule = {"lhs": lhs, "rhs": rhs_of(text)}
        if weight != 1:
            rule["weight"] = weight
        rules.append(rule)
    return {"symbols": symbols, "rules": rules}


# --- independent brute-force enumeration -----------------------------------

def enumerate_symbol(doc, name):
    """Yields (spans, trace) pairs; trace is (name, [children])."""
    for rule in [r for r in doc["rules"] if r["lhs"] == name]:
        options = []
        for elem in rule["rhs"]:
            if "t" in elem:
                options.append([("t", elem["t"])])
            else:
                options.append([("nt", d) for d in enumerate_symbol(doc, elem["nt"])])
        for combo in itertools.product(*options):
            spans, children = [], []
            for kind, value in combo:
                if kind == "t":
                    spans.append(value)
                else:
                    spans.extend(value[0])
                    children.append(value[1])
            yield spans, (name, children)


def symbols_in(trace, out):
    out.add(trace[0])
    for c in trace[1]:
        symbols_in(c, out)
    return out


def tokens_of(spans):
    text = " ".join(spans).lower()
    return tuple(re.findall(r"<\w+>|[\w]+(?:['-][\w]+)*|[^\w\s]", text))


def stats(doc):
    tops = [n for n, s in doc["symbols"].items() if s["top_level"]]
    per_top = {}
    groups = Counter()
    readings = defaultdict(set)
    for top in tops:
        n = 0
        for spans, trace in enumerate_symbol(doc, top):
            n += 1
            key = " ".join(sorted(s.replace(" ", "_") for s in symbols_in(trace, set())))
            groups[key] += 1
            readings[tokens_of(spans)].add(repr(trace))
        per_top[top] = n
    ambiguous = sorted(" ".join(k) for k, v in readings.items() if len(v) > 1)
    cap = 50
    return {
        "symbols": len(doc["symbols"]),
        "rules": len(doc["rules"]),
        "derivations": per_top,
        "total_derivations": sum(per_top.values()),
        "group_populations": dict(sorted(groups.items())),
        "cap50_balanced_size": sum(min(cap, v) for v in groups.values()),
        "ambiguous_utterances": ambiguous,
    }


def main():
    root = Path(__file__).resolve().parent.parent
    doc = grammar_doc()
    (root / "data" / "desk_grammar.json").write_text(json.dumps(doc, indent=2) + "\n")
    st = stats(doc)
    (root / "data" / "desk_grammar.stats.json").write_text(json.dumps(st, indent=2) + "\n")
    print(json.dumps({k: v for k, v in st.items() if k != "group_populations"}, indent=2))
    print("groups:", len(st["group_populations"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
