// tests/test_cli.cpp

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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"
#include "tracenlu/oov.hpp"

using namespace tracenlu;
using namespace tracenlu::testing;

namespace {

const std::string kWork = "/tmp/tracenlu_cli_test";

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const std::string& stdin_path = "/dev/null") {
  std::filesystem::create_directories(kWork);
  const std::string out = kWork + "/stdout", err = kWork + "/stderr";
  const std::string cmd = std::string(TRACENLU_CLI) + " " + args + " < " + stdin_path + " > " +
                          out + " 2> " + err;
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::string work(const std::string& name) {
  std::filesystem::create_directories(kWork);
  return kWork + "/" + name;
}

std::string grammar_flag() { return " --grammar " + data_path("desk_grammar.json"); }

// Exit status is non-zero exactly when something went to stderr.
void check_contract(const Run& r) {
  CAPTURE(r.err);
  CHECK((r.status != 0) == !r.err.empty());
}

}  // namespace

TEST_CASE("grammar stats") {
  write_file(work("g0.json"), kG0Source);
  Run g0 = cli("grammar stats --grammar " + work("g0.json"));
  check_contract(g0);
  CHECK(g0.status == 0);
  CHECK(g0.out.rfind("symbols: 2, rules: 4\n", 0) == 0);

  Run desk = cli("grammar stats --json" + grammar_flag());
  check_contract(desk);
  const auto got = nlohmann::json::parse(desk.out);
  const auto oracle = nlohmann::json::parse(read_file(data_path("desk_grammar.stats.json")));
  CHECK(got["symbols"] == oracle["symbols"]);
  CHECK(got["rules"] == oracle["rules"]);
  CHECK(got["derivations"] == oracle["derivations"]);
  CHECK(got["total_derivations"] == oracle["total_derivations"]);

  write_file(work("bad.json"), R"({"symbols": {"a": {"top_level": true}},
      "rules": [{"lhs": "a", "rhs": [{"nt": "missing"}]}]})");
  Run bad = cli("grammar stats --grammar " + work("bad.json"));
  check_contract(bad);
  CHECK(bad.status != 0);
  CHECK(bad.err.find("missing") != std::string::npos);

  Run absent = cli("grammar stats --grammar " + work("nope.json"));
  check_contract(absent);
  CHECK(absent.status != 0);
}

TEST_CASE("grammar enumerate") {
  write_file(work("g0.json"), kG0Source);
  Run r = cli("grammar enumerate --grammar " + work("g0.json"));
  check_contract(r);
  CHECK(r.out ==
        "hello\tgreet\tspeech_act:greeting\n"
        "hi\tgreet\tspeech_act:greeting\n"
        "bye\tfarewell\tspeech_act:farewell\n"
        "goodbye\tfarewell\tspeech_act:farewell\n");
  Run one = cli("grammar enumerate --symbol farewell --grammar " + work("g0.json"));
  CHECK(std::count(one.out.begin(), one.out.end(), '\n') == 2);
  Run unknown = cli("grammar enumerate --symbol nothing --grammar " + work("g0.json"));
  check_contract(unknown);
  CHECK(unknown.status != 0);

  Run desk = cli("grammar enumerate" + grammar_flag());
  CHECK(std::count(desk.out.begin(), desk.out.end(), '\n') == 5429);
}

TEST_CASE("dataset build and split") {
  Run b = cli("dataset build --cap 50 --seed 7 --out " + work("data.tsv") + grammar_flag());
  check_contract(b);
  REQUIRE(b.status == 0);
  const auto manifest = DatasetManifest::from_json(read_file(work("data.tsv.manifest.json")));
  const auto oracle = nlohmann::json::parse(read_file(data_path("desk_grammar.stats.json")));
  CHECK(manifest.balanced_size() == oracle["cap50_balanced_size"].get<std::size_t>());
  REQUIRE(manifest.groups.size() == oracle["group_populations"].size());
  for (const auto& [key, stats] : manifest.groups) {
    CHECK(stats.population == oracle["group_populations"][key].get<std::size_t>());
    CHECK(stats.sampled == std::min<std::size_t>(50, stats.population));
  }
  const auto pairs = read_dataset(work("data.tsv"));
  CHECK(pairs.size() == 3 * manifest.balanced_size());

  Run again = cli("dataset build --cap 50 --seed 7 --out " + work("data2.tsv") + grammar_flag());
  CHECK(read_file(work("data2.tsv")) == read_file(work("data.tsv")));

  std::filesystem::remove_all(work("split"));
  Run s = cli("dataset split --pieces 11 --folds 10 --seed 3 --dataset " + work("data.tsv") +
              " --out " + work("split"));
  check_contract(s);
  std::size_t total = 0, smallest = pairs.size(), largest = 0;
  for (int i = 1; i <= 11; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "/piece_%02d.tsv", i);
    const std::size_t n = read_dataset(work("split") + name).size();
    total += n;
    smallest = std::min(smallest, n);
    largest = std::max(largest, n);
  }
  CHECK(total == pairs.size());
  CHECK(largest - smallest <= 1);
  const std::string index = read_file(work("split/folds.tsv"));
  CHECK(std::count(index.begin(), index.end(), '\n') == 12);

  Run bad = cli("dataset split --pieces 11 --folds 9 --dataset " + work("data.tsv") + " --out " +
                work("split"));
  check_contract(bad);
  CHECK(bad.status != 0);
}

TEST_CASE("train and eval are reproducible") {
  Run b = cli("dataset build --cap 4 --seed 2 --out " + work("small.tsv") + grammar_flag());
  REQUIRE(b.status == 0);
  const std::string tiny = " --hidden 8 --embedding 4 --layers 1 --epochs 2 --seed 5";
  Run t1 = cli("train --dataset " + work("small.tsv") + " --out " + work("a.bin") + tiny);
  Run t2 = cli("train --dataset " + work("small.tsv") + " --out " + work("b.bin") + tiny);
  check_contract(t1);
  REQUIRE(t1.status == 0);
  CHECK(read_file(work("a.bin")) == read_file(work("b.bin")));
  const std::string log = read_file(work("a.bin.log"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);

  Run e1 = cli("eval --dataset " + work("small.tsv") + tiny);
  Run e2 = cli("eval --dataset " + work("small.tsv") + " --out " + work("report.tsv") + tiny);
  check_contract(e1);
  REQUIRE(e1.status == 0);
  CHECK(e1.out.rfind("fold\tcv_perplexity\ttest_perplexity\n", 0) == 0);
  CHECK(std::count(e1.out.begin(), e1.out.end(), '\n') == 11);
  CHECK(read_file(work("report.tsv")) == e1.out);

  Run diverge = cli("train --dataset " + work("small.tsv") + " --out " + work("c.bin") + tiny +
                    " --lr 1e300");
  check_contract(diverge);
  Run badcfg = cli("train --dataset " + work("small.tsv") + " --out " + work("c.bin") +
                   " --hidden 0 --epochs 1");
  check_contract(badcfg);
}

TEST_CASE("translate and chat with the desk model") {
  Run b = cli("dataset build --cap 50 --seed 7 --out " + work("data.tsv") + grammar_flag());
  REQUIRE(b.status == 0);
  Run t = cli("train --epochs 40 --lr 3e-3 --seed 1 --dataset " + work("data.tsv") + " --out " +
              work("desk.bin"));
  check_contract(t);
  REQUIRE(t.status == 0);
  const std::string pipeline = grammar_flag() + " --model " + work("desk.bin") +
                               " --embeddings " + data_path("desk_embeddings.vec");

  Run hello = cli("translate" + pipeline + " \"hello .\"");
  check_contract(hello);
  CHECK(hello.out.find("wellformed: true\n") != std::string::npos);
  CHECK(hello.out.find("speech_act:greeting") != std::string::npos);

  Run typo = cli("translate" + pipeline + " helo");
  CHECK(typo.out.find("tokens: helo\n") != std::string::npos);
  CHECK(typo.out.find("repaired: hello\n") != std::string::npos);

  Run cache = cli("oov build --embeddings " + data_path("desk_embeddings.vec") + " --model " +
                  work("desk.bin") + " --out " + work("desk_nearest.tsv"));
  check_contract(cache);
  Run cached = cli("translate" + pipeline + " --nearest " + work("desk_nearest.tsv") + " helo");
  CHECK(cached.out == typo.out);

  write_file(work("script.txt"), "Hello.\nIt's spectacular!\nI'm Joe.\nBye.\n");
  const std::string chat = "chat --seed 4 --player Joe --policy " + data_path("desk_policy.json") +
                           pipeline + " --transcript " + work("tx.txt");
  Run c1 = cli(chat, work("script.txt"));
  check_contract(c1);
  REQUIRE(c1.status == 0);
  CHECK(c1.out == read_file(work("tx.txt")));
  CHECK(std::count(c1.out.begin(), c1.out.end(), '\n') == 8);
  const auto sidecar = nlohmann::json::parse(read_file(work("tx.txt.json")));
  REQUIRE(sidecar.size() == 8);
  for (std::size_t i = 0; i < 8; i += 2) CHECK(sidecar[i]["wellformed"] == true);
  Run c2 = cli(chat, work("script.txt"));
  CHECK(c2.out == c1.out);

  Run nomodel = cli("translate" + grammar_flag() + " --model " + work("none.bin") + " hi");
  check_contract(nomodel);
  CHECK(nomodel.status != 0);
}

TEST_CASE("oov build on the 50-word fixture") {
  const std::string vec = data_path("fixtures/random50.vec");
  const std::string vocab_file = data_path("fixtures/random50.vocab");
  Run r = cli("oov build --embeddings " + vec + " --vocab " + vocab_file + " --out " +
              work("nearest.tsv"));
  check_contract(r);
  REQUIRE(r.status == 0);
  const EmbeddingTable emb = load_embeddings(vec);
  Vocab vocab;
  for (const auto& w : split(read_file(vocab_file), '\n'))
    if (!w.empty()) vocab.add(w);
  const NearestMap map = load_nearest(work("nearest.tsv"), nearest_digest(emb, vocab));
  REQUIRE(map.size() == emb.size());
  for (const auto& w : emb.words()) {
    std::string best;
    double best_sim = -2;
    for (const auto& v : vocab.words()) {
      const double s = emb.vector(w).dot(emb.vector(v));
      if (s > best_sim + 1e-12) best = v, best_sim = s;
    }
    CHECK(map.find(w)->word == best);
  }

  write_file(work("broken.vec"), "2 3\na 1 2 3\nb 1 2\n");
  Run bad = cli("oov build --embeddings " + work("broken.vec") + " --vocab " + vocab_file +
                " --out " + work("x.tsv"));
  check_contract(bad);
  CHECK(bad.status != 0);
  CHECK(bad.err.find("'b'") != std::string::npos);
}
