#!/usr/bin/env python3
# tools/make_embeddings.py

# Copyright 2026  The tracenlu Authors

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

"""Writes the small embedding files shipped in data/.

desk_embeddings.vec   clusters of grammar words plus out-of-vocabulary
                      synonyms placed next to one in-vocabulary word each
fixtures/colors.vec   'auburn' sits next to 'brown'
fixtures/random50.vec 50 random words; fixtures/random50.vocab lists the
                      20 of them treated as the training vocabulary
"""

import os
import random

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")

# cluster -> (in-vocab words, {oov synonym: in-vocab neighbour})
DESK_CLUSTERS = {
    "positive": (["beautiful", "wonderful", "great", "gorgeous", "lovely", "nice",
                  "fantastic", "amazing", "perfect", "spectacular"],
                 {"splendid": "wonderful", "marvelous": "wonderful", "superb": "fantastic",
                  "excellent": "great", "glorious": "gorgeous", "pleasant": "nice",
                  "sunny": "lovely", "stunning": "spectacular"}),
    "negative": (["awful", "terrible", "dreary", "gloomy", "horrible", "miserable",
                  "nasty", "dreadful"],
                 {"rainy": "dreary", "crummy": "awful", "lousy": "terrible",
                  "bleak": "gloomy", "atrocious": "horrible", "stormy": "nasty"}),
    "hello": (["hi", "hello", "hey", "howdy", "greetings"],
              {"hiya": "hi", "heya": "hey", "yo": "hey", "salutations": "greetings"}),
    "goodbye": (["bye", "goodbye", "farewell", "later"],
                {"cya": "bye", "adios": "goodbye", "cheerio": "goodbye", "ciao": "bye"}),
    "affirm": (["yes", "yeah", "yep"], {"yup": "yep", "aye": "yes", "sure": "yeah"}),
    "deny": (["no", "nope"], {"nah": "no"}),
}

DIM = 16


def unit(rng, dim):
    v = [rng.gauss(0, 1) for _ in range(dim)]
    n = sum(x * x for x in v) ** 0.5
    return [x / n for x in v]


def near(rng, base, noise):
    return [b + rng.gauss(0, noise) for b in base]


def write_vec(path, rows):
    with open(path, "w") as f:
        f.write("%d %d\n" % (len(rows), len(rows[0][1])))
        for word, vec in rows:
            f.write(word + " " + " ".join("%.6f" % x for x in vec) + "\n")


def desk(rng):
    rows = []
    for name, (anchors, synonyms) in DESK_CLUSTERS.items():
        centre = unit(rng, DIM)
        vectors = {w: near(rng, centre, 0.25) for w in anchors}
        rows += [(w, vectors[w]) for w in anchors]
        for syn, target in synonyms.items():
            rows.append((syn, near(rng, vectors[target], 0.03)))
    write_vec(os.path.join(DATA, "desk_embeddings.vec"), rows)


def colors(rng):
    warm, cool = unit(rng, 8), unit(rng, 8)
    brown = near(rng, warm, 0.3)
    red = near(rng, warm, 0.3)
    blue = near(rng, cool, 0.3)
    rows = [("brown", brown), ("red", red), ("blue", blue),
            ("auburn", near(rng, brown, 0.05)), ("crimson", near(rng, red, 0.05)),
            ("navy", near(rng, blue, 0.05))]
    write_vec(os.path.join(DATA, "fixtures", "colors.vec"), rows)


def random50(rng):
    letters = "abcdefghijklmnopqrstuvwxyz"
    words = set()
    while len(words) < 50:
        words.add("".join(rng.choice(letters) for _ in range(rng.randint(3, 7))))
    words = sorted(words)
    rows = [(w, [rng.uniform(-1, 1) for _ in range(12)]) for w in words]
    write_vec(os.path.join(DATA, "fixtures", "random50.vec"), rows)
    vocab = sorted(rng.sample(words, 20))
    with open(os.path.join(DATA, "fixtures", "random50.vocab"), "w") as f:
        f.write("\n".join(vocab) + "\n")


def main():
    os.makedirs(os.path.join(DATA, "fixtures"), exist_ok=True)
    desk(random.Random(11))
    colors(random.Random(12))
    random50(random.Random(13))


if __name__ == "__main__":
    main()
