// tools/tracenlu.cpp

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

// Command-line front end. Results go to stdout or --out files; diagnostics
// go to stderr, and the exit status is non-zero exactly when one is printed.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tracenlu/dataset.hpp"
#include "tracenlu/grammar.hpp"
#include "tracenlu/model.hpp"
#include "tracenlu/oov.hpp"
#include "tracenlu/runtime.hpp"

namespace {

using namespace tracenlu;

constexpr std::uint64_t kDefaultSeed = 7;

struct GrammarArgs {
  std::string path;
  bool allow_recursion = false;

  Grammar load() const { return Grammar::load(path, {allow_recursion}); }
};

struct ModelArgs {
  std::size_t hidden = 0;
  std::size_t layers = 0;
  std::size_t embedding = 0;
  double base = 2.0;
  bool paper = false;

  ModelConfig config() const {
    ModelConfig c = paper ? ModelConfig::paper() : ModelConfig::desk();
    if (hidden) c.hidden_size = hidden;
    if (layers) c.encoder_layers = c.decoder_layers = layers;
    if (embedding) c.embedding_size = embedding;
    c.perplexity_base = base;
    c.validate();
    return c;
  }
};

struct TrainArgs {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::uint64_t seed = kDefaultSeed;
  std::size_t min_count = 1;

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.batch_size = batch;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct PipelineArgs {
  std::string model;
  std::string embeddings;
  std::string nearest;
  bool strict = false;
};

void add_grammar(CLI::App* cmd, GrammarArgs& g) {
  cmd->add_option("--grammar", g.path, "Grammar JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_flag("--allow-recursion", g.allow_recursion, "Accept recursive grammars");
}

void add_model(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--hidden", m.hidden, "LSTM hidden size");
  cmd->add_option("--layers", m.layers, "Encoder and decoder depth");
  cmd->add_option("--embedding", m.embedding, "Token embedding size");
  cmd->add_option("--base", m.base, "Perplexity base")->capture_default_str();
  cmd->add_flag("--paper-config", m.paper, "Start from the full-scale configuration");
}

void add_train(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch", t.batch, "Minibatch size")->capture_default_str();
  cmd->add_option("--seed", t.seed, "Random seed")->capture_default_str();
  cmd->add_option("--min-count", t.min_count, "Input vocabulary frequency cut-off")
      ->capture_default_str();
}

void add_pipeline(CLI::App* cmd, PipelineArgs& p) {
  cmd->add_option("--model", p.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--embeddings", p.embeddings, "Word vectors for OOV repair")
      ->check(CLI::ExistingFile);
  cmd->add_option("--nearest", p.nearest, "Precomputed nearest-word cache")
      ->check(CLI::ExistingFile);
  cmd->add_flag("--strict-trace", p.strict, "Check decoded traces against the productions");
}

NluPipeline make_pipeline(const GrammarArgs& g, const PipelineArgs& p,
                          std::optional<EmbeddingTable>& embeddings) {
  Model model = load_model(p.model);
  PipelineOptions options;
  options.strict_trace = p.strict;
  if (!p.embeddings.empty()) embeddings = load_embeddings(p.embeddings);
  const EmbeddingTable* emb = embeddings ? &*embeddings : nullptr;
  if (!p.nearest.empty()) {
    if (!emb) throw Error("--nearest needs --embeddings");
    NearestMap nearest = load_nearest(p.nearest, nearest_digest(*emb, model.source_vocab));
    return NluPipeline(g.load(), std::move(model), emb, std::move(nearest), options);
  }
  return NluPipeline(g.load(), std::move(model), emb, options);
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    write_file(path, text);
}

std::string join_set(const std::set<std::string>& items, std::string_view sep) {
  return join(std::vector<std::string>(items.begin(), items.end()), sep);
}

std::string derivation_record(const Derivation& d) {
  return d.utterance + "\t" + serialize_trace(d.trace) + "\t" + join(tag_strings(d.markup), ",") +
         "\n";
}

std::string understanding_record(const UnderstandingResult& r) {
  std::ostringstream out;
  out << "utterance: " << r.utterance << "\n"
      << "tokens: " << join(r.tokens, " ") << "\n"
      << "repaired: " << join(r.repaired, " ") << "\n"
      << "decoded: " << join(r.decoded, " ") << "\n"
      << "wellformed: " << (r.wellformed ? "true" : "false") << "\n"
      << "trace: " << (r.trace ? serialize_trace(*r.trace) : "") << "\n"
      << "symbols: " << join_set(r.symbols, " | ") << "\n"
      << "tags: " << join(tag_strings(r.markup), ", ") << "\n";
  if (!r.wellformed) out << "reason: " << r.reason << "\n";
  return out.str();
}

std::string piece_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "piece_%02zu.tsv", i + 1);
  return buf;
}

int run(int argc, char** argv) {
  CLI::App app{"Grammar-trace natural language understanding toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GrammarArgs grammar;
  ModelArgs model_args;
  TrainArgs train_args;
  PipelineArgs pipe;
  std::string out, dataset, symbol, policy, transcript, vocab_path;
  std::size_t cap = 5000, pieces = 11, folds = 10;
  std::uint64_t seed = kDefaultSeed;
  std::vector<std::string> words;
  bool json_format = false;
  ChatOptions chat;

  // grammar
  auto* g = app.add_subcommand("grammar", "Validate, count or enumerate a grammar");
  g->require_subcommand(1);
  auto* g_stats = g->add_subcommand("stats", "Symbol, rule and derivation counts");
  add_grammar(g_stats, grammar);
  g_stats->add_flag("--json", json_format, "Print a JSON object");
  auto* g_enum = g->add_subcommand("enumerate", "Every derivation as utterance, trace, tags");
  add_grammar(g_enum, grammar);
  g_enum->add_option("--symbol", symbol, "Only this symbol (default: every top-level one)");
  g_enum->add_option("--out", out, "Output file (default stdout)");

  // dataset
  auto* d = app.add_subcommand("dataset", "Build and split training data");
  d->require_subcommand(1);
  auto* d_build = d->add_subcommand("build", "Balance and augment the derivations");
  add_grammar(d_build, grammar);
  d_build->add_option("--cap", cap, "Pairs kept per symbol set")->capture_default_str();
  d_build->add_option("--seed", seed, "Random seed")->capture_default_str();
  d_build->add_option("--out", out, "Dataset file; the manifest goes to <out>.manifest.json")
      ->required();
  auto* d_split = d->add_subcommand("split", "Shuffle into pieces and write the fold index");
  d_split->add_option("--dataset", dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  d_split->add_option("--pieces", pieces, "Number of pieces")->capture_default_str();
  d_split->add_option("--folds", folds, "Number of folds")->capture_default_str();
  d_split->add_option("--seed", seed, "Random seed")->capture_default_str();
  d_split->add_option("--out", out, "Output directory")->required();

  // train / eval
  auto* t = app.add_subcommand("train", "Train a model on a dataset file");
  t->add_option("--dataset", dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  t->add_option("--out", out, "Model file; the log goes to <out>.log")->required();
  add_model(t, model_args);
  add_train(t, train_args);
  auto* e = app.add_subcommand("eval", "Cross-validated perplexity report");
  e->add_option("--dataset", dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  e->add_option("--pieces", pieces, "Number of pieces")->capture_default_str();
  e->add_option("--folds", folds, "Number of folds")->capture_default_str();
  e->add_option("--out", out, "Report file (default stdout)");
  add_model(e, model_args);
  add_train(e, train_args);

  // translate / chat
  auto* tr = app.add_subcommand("translate", "Understand one utterance");
  add_grammar(tr, grammar);
  add_pipeline(tr, pipe);
  tr->add_option("utterance", words, "Utterance text")->required();
  auto* c = app.add_subcommand("chat", "Talk to a character on the terminal");
  add_grammar(c, grammar);
  add_pipeline(c, pipe);
  c->add_option("--policy", policy, "Response policy JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--seed", chat.seed, "Random seed")->capture_default_str();
  c->add_option("--player", chat.player, "Player name")->capture_default_str();
  c->add_option("--npc", chat.npc, "Character name")->capture_default_str();
  c->add_option("--transcript", transcript, "Transcript file; mark-up goes to <file>.json");

  // oov
  auto* o = app.add_subcommand("oov", "Out-of-vocabulary repair data");
  o->require_subcommand(1);
  auto* o_build = o->add_subcommand("build", "Precompute the nearest vocabulary word map");
  o_build->add_option("--embeddings", pipe.embeddings, "Word vectors")
      ->required()
      ->check(CLI::ExistingFile);
  auto* vocab_source = o_build->add_option("--model", pipe.model, "Take the input vocabulary "
                                           "from this model")->check(CLI::ExistingFile);
  o_build->add_option("--vocab", vocab_path, "Or from a file with one word per line")
      ->check(CLI::ExistingFile)
      ->excludes(vocab_source);
  o_build->add_option("--out", out, "Cache file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  if (*g_stats) {
    const Grammar gr = grammar.load();
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    std::uint64_t total = 0;
    for (const auto& s : gr.top_level()) {
      const std::uint64_t n = derivation_count(gr, s);
      counts[s] = n;
      total += n;
    }
    if (json_format) {
      nlohmann::ordered_json doc;
      doc["symbols"] = gr.symbol_count();
      doc["rules"] = gr.rule_count();
      doc["derivations"] = counts;
      doc["total_derivations"] = total;
      doc["digest"] = gr.digest();
      std::cout << doc.dump(2) << "\n";
    } else {
      std::cout << "symbols: " << gr.symbol_count() << ", rules: " << gr.rule_count() << "\n"
                << "derivations: " << total << "\n";
      for (const auto& [name, n] : counts.items()) std::cout << name << "\t" << n << "\n";
    }
  } else if (*g_enum) {
    const Grammar gr = grammar.load();
    const std::vector<std::string> roots =
        symbol.empty() ? gr.top_level() : std::vector<std::string>{symbol};
    std::ofstream file;
    if (!out.empty() && out != "-") {
      file.open(out, std::ios::binary);
      if (!file) throw Error("cannot write " + out);
    }
    std::ostream& sink = file.is_open() ? file : std::cout;
    for (const auto& r : roots) {
      gr.symbol(r);
      for_each_derivation(gr, r, [&](const Derivation& dv) { sink << derivation_record(dv); });
    }
    if (!sink) throw Error("write failed");
  } else if (*d_build) {
    const BalancedSet set = build_dataset(grammar.load(), {cap, seed});
    write_dataset(set.pairs, out);
    write_file(out + ".manifest.json", set.manifest.to_json());
    std::cout << "pairs: " << set.pairs.size() << "\n"
              << "balanced: " << set.manifest.balanced_size() << "\n"
              << "groups: " << set.manifest.groups.size() << "\n";
  } else if (*d_split) {
    const auto pairs = read_dataset(dataset);
    const EvalSplit split = split_for_eval(pairs.size(), {pieces, folds, seed});
    std::filesystem::create_directories(out);
    for (std::size_t i = 0; i < split.pieces.size(); ++i)
      write_dataset(select(pairs, split.pieces[i]), out + "/" + piece_name(i));
    std::string index = "fold\tvalidation\ttraining\n";
    for (std::size_t f = 0; f < split.folds(); ++f) {
      std::vector<std::string> train_pieces;
      for (std::size_t i = 0; i < split.folds(); ++i)
        if (i != f) train_pieces.push_back(piece_name(i));
      index += std::to_string(f + 1) + "\t" + piece_name(f) + "\t" + join(train_pieces, ",") + "\n";
    }
    index += "held_out\t" + piece_name(split.pieces.size() - 1) + "\t\n";
    write_file(out + "/folds.tsv", index);
    for (std::size_t i = 0; i < split.pieces.size(); ++i)
      std::cout << piece_name(i) << "\t" << split.pieces[i].size() << "\n";
  } else if (*t) {
    const auto pairs = read_dataset(dataset);
    TrainLog log;
    const Model m =
        train_model(pairs, model_args.config(), train_args.config(), &log, train_args.min_count);
    save_model(m, out);
    write_file(out + ".log", log.format());
    std::cout << "parameters: " << m.params.parameter_count() << "\n"
              << "final_loss: " << log.epochs.back().loss << "\n";
  } else if (*e) {
    const auto pairs = read_dataset(dataset);
    TrainConfig tc = train_args.config();
    const auto results = cross_validate(pairs, {pieces, folds, train_args.seed},
                                        model_args.config(), tc, nullptr, train_args.min_count);
    emit(out, format_cv_table(results));
  } else if (*tr) {
    std::optional<EmbeddingTable> emb;
    const NluPipeline p = make_pipeline(grammar, pipe, emb);
    std::cout << understanding_record(understand(p, join(words, " ")));
  } else if (*c) {
    std::optional<EmbeddingTable> emb;
    const NluPipeline p = make_pipeline(grammar, pipe, emb);
    const ResponsePolicy pol = ResponsePolicy::load(policy);
    pol.validate(p.grammar());
    if (isatty(STDIN_FILENO)) chat.prompt = "> ";
    const Transcript tx = chat_loop(p, pol, std::cin, std::cout, chat);
    if (!transcript.empty()) {
      write_file(transcript, tx.text());
      write_file(transcript + ".json", tx.json());
    }
  } else if (*o_build) {
    const EmbeddingTable emb = load_embeddings(pipe.embeddings);
    Vocab vocab;
    if (!pipe.model.empty()) {
      vocab = load_model(pipe.model).source_vocab;
    } else if (!vocab_path.empty()) {
      for (const auto& w : split(read_file(vocab_path), '\n'))
        if (!trim(w).empty() && !vocab.contains(trim(w))) vocab.add(trim(w));
    } else {
      throw Error("oov build needs --model or --vocab");
    }
    const NearestMap map = precompute_nearest(emb, vocab);
    save_nearest(map, out);
    std::cout << "entries: " << map.size() << "\n"
              << "digest: " << map.digest << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cout.flush();
    std::cerr << "tracenlu: error: " << e.what() << "\n";
    return 1;
  }
}
