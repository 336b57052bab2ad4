// model.cpp

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

#include "tracenlu/model.hpp"

#include <cstdio>
#include <cstring>

namespace tracenlu {

namespace {

std::vector<EncodedPair> encode_bounded(const Vocab& source, const Vocab& target,
                                        const std::vector<UtteranceTracePair>& pairs,
                                        std::size_t max_input_len, std::size_t max_output_len) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    EncodedPair e{source.encode(p.input), target.encode(p.target)};
    if (e.source.empty()) throw DatasetError("encode_pairs: empty input utterance");
    if (e.source.size() > max_input_len) e.source.resize(max_input_len);
    if (e.target.size() + 1 > max_output_len)
      throw DatasetError("encode_pairs: target of " + std::to_string(e.target.size()) +
                         " tokens exceeds max_output_len");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<EncodedPair> encode_for(const Model& model,
                                    const std::vector<UtteranceTracePair>& pairs) {
  return encode_bounded(model.source_vocab, model.target_vocab, pairs,
                        model.config().max_input_len, model.config().max_output_len);
}

}  // namespace

std::vector<EncodedPair> encode_pairs(const Vocab& source, const Vocab& target,
                                      const std::vector<UtteranceTracePair>& pairs) {
  ModelConfig defaults;
  return encode_bounded(source, target, pairs, defaults.max_input_len, defaults.max_output_len);
}

Model train_model(const std::vector<UtteranceTracePair>& pairs, const ModelConfig& model_config,
                  const TrainConfig& train_config, TrainLog* log, std::size_t min_count,
                  const Vocab* target_vocab) {
  auto [source, target] = build_vocab(pairs, min_count);
  Model model;
  model.source_vocab = std::move(source);
  model.target_vocab = target_vocab ? *target_vocab : std::move(target);
  model.params = ModelParams<float>::zeros(model_config, model.source_vocab.size(),
                                           model.target_vocab.size());
  Rng init(derive_seed(train_config.seed, "init"));
  model.params.initialize(init);
  TrainLog l = train(model.params, encode_for(model, pairs), train_config);
  if (log) *log = std::move(l);
  return model;
}

Tokens translate(const Model& model, const Tokens& input) {
  if (input.empty()) return {};
  std::vector<int> ids = model.source_vocab.encode(input);
  if (ids.size() > model.config().max_input_len) ids.resize(model.config().max_input_len);
  auto encoded = encode(model.params, ids);
  return model.target_vocab.decode(
      decode_greedy(model.params, encoded, model.config().max_output_len));
}

PerplexityReport evaluate_perplexity(const Model& model,
                                     const std::vector<UtteranceTracePair>& pairs) {
  return perplexity(model.params, encode_for(model, pairs), model.config().perplexity_base);
}

std::vector<FoldResult> cross_validate(const std::vector<UtteranceTracePair>& pairs,
                                       const SplitSpec& split, const ModelConfig& model_config,
                                       const TrainConfig& train_config,
                                       const FoldCallback& on_fold, std::size_t min_count) {
  const EvalSplit eval = split_for_eval(pairs.size(), split);
  const Vocab target = build_vocab(pairs, 0).second;
  const auto held_out = select(pairs, eval.held_out());
  std::vector<FoldResult> results;
  for (std::size_t fold = 0; fold < eval.folds(); ++fold) {
    TrainConfig tc = train_config;
    tc.seed = derive_seed(train_config.seed, "fold " + std::to_string(fold));
    Model model = train_model(select(pairs, eval.training(fold)), model_config, tc, nullptr,
                              min_count, &target);
    FoldResult r;
    r.fold = fold + 1;
    r.cv_perplexity = evaluate_perplexity(model, select(pairs, eval.validation(fold))).value;
    r.test_perplexity = evaluate_perplexity(model, held_out).value;
    results.push_back(r);
    if (on_fold) on_fold(fold, model);
  }
  return results;
}

std::string format_cv_table(const std::vector<FoldResult>& results) {
  std::string out = "fold\tcv_perplexity\ttest_perplexity\n";
  char line[96];
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\n", r.fold, r.cv_perplexity,
                  r.test_perplexity);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr char kMagic[8] = {'T', 'N', 'L', 'U', 'M', 'O', 'D', 'L'};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out += s;
  }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void get_bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ModelFileError("model file: truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void put_vocab(Writer& w, const Vocab& v) {
  const auto words = v.words();
  w.put<std::uint64_t>(words.size());
  for (const auto& word : words) {
    w.put_string(word);
    w.put<std::uint64_t>(v.count(word));
  }
}

Vocab get_vocab(Reader& r) {
  Vocab v;
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string word = r.get_string();
    const auto count = r.get<std::uint64_t>();
    if (v.contains(word) || is_reserved_token(word))
      throw ModelFileError("model file: bad vocabulary entry '" + word + "'");
    v.add(word, count);
  }
  return v;
}

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  w.out.append(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kModelFormatVersion);
  w.put<std::uint8_t>(sizeof(float));
  const ModelConfig& c = model.config();
  for (std::size_t v : {c.encoder_layers, c.decoder_layers, c.hidden_size, c.embedding_size,
                        c.max_input_len, c.max_output_len})
    w.put<std::uint64_t>(v);
  w.put<double>(c.perplexity_base);
  put_vocab(w, model.source_vocab);
  put_vocab(w, model.target_vocab);
  const auto tensors = model.params.tensors();
  w.put<std::uint64_t>(tensors.size());
  for (const auto& [name, m] : tensors) {
    w.put_string(name);
    w.put<std::uint64_t>(m->rows());
    w.put<std::uint64_t>(m->cols());
    w.out.append(reinterpret_cast<const char*>(m->data()), sizeof(float) * m->size());
  }
  w.put<std::uint64_t>(fnv1a64(w.out));
  return std::move(w.out);
}

Model parse_model(std::string_view bytes, const ModelConfig* expected) {
  if (bytes.size() < sizeof kMagic + 8) throw ModelFileError("model file: truncated");
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  if (std::memcmp(body.data(), kMagic, sizeof kMagic) != 0)
    throw ModelFileError("model file: bad magic");
  if (fnv1a64(body) != stored) throw ModelDigestError("model file: digest mismatch");

  Reader r(body.substr(sizeof kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion)
    throw ModelVersionError("model file: version " + std::to_string(version) +
                            ", expected " + std::to_string(kModelFormatVersion));
  if (r.get<std::uint8_t>() != sizeof(float))
    throw ModelVersionError("model file: unsupported scalar width");
  ModelConfig c;
  c.encoder_layers = r.get<std::uint64_t>();
  c.decoder_layers = r.get<std::uint64_t>();
  c.hidden_size = r.get<std::uint64_t>();
  c.embedding_size = r.get<std::uint64_t>();
  c.max_input_len = r.get<std::uint64_t>();
  c.max_output_len = r.get<std::uint64_t>();
  c.perplexity_base = r.get<double>();
  if (expected && !(*expected == c))
    throw ModelVersionError("model file: config does not match the expected config");

  Model model;
  model.source_vocab = get_vocab(r);
  model.target_vocab = get_vocab(r);
  model.params =
      ModelParams<float>::zeros(c, model.source_vocab.size(), model.target_vocab.size());
  auto tensors = model.params.tensors();
  if (r.get<std::uint64_t>() != tensors.size())
    throw ModelFileError("model file: wrong tensor count");
  for (auto& [name, m] : tensors) {
    const std::string got = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (got != name || rows != static_cast<std::uint64_t>(m->rows()) ||
        cols != static_cast<std::uint64_t>(m->cols()))
      throw ModelFileError("model file: unexpected tensor '" + got + "'");
    r.get_bytes(m->data(), sizeof(float) * m->size());
  }
  if (!r.done()) throw ModelFileError("model file: trailing bytes");
  return model;
}

void save_model(const Model& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

Model load_model(const std::string& path, const ModelConfig* expected) {
  return parse_model(read_file(path), expected);
}

}  // namespace tracenlu
