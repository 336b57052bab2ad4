// tracenlu/model.hpp

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

#ifndef TRACENLU_MODEL_HPP_
#define TRACENLU_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tracenlu/dataset.hpp"
#include "tracenlu/seq2seq.hpp"
#include "tracenlu/vocab.hpp"

namespace tracenlu {

/// A trained translator: both vocabularies and single-precision parameters.
struct Model {
  Vocab source_vocab;
  Vocab target_vocab;
  ModelParams<float> params;

  const ModelConfig& config() const { return params.config; }
};

std::vector<EncodedPair> encode_pairs(const Vocab& source, const Vocab& target,
                                      const std::vector<UtteranceTracePair>& pairs);

/// Builds vocabularies (the output one may be supplied), initializes from
/// the train seed and trains.
Model train_model(const std::vector<UtteranceTracePair>& pairs, const ModelConfig& model_config,
                  const TrainConfig& train_config, TrainLog* log = nullptr,
                  std::size_t min_count = 0, const Vocab* target_vocab = nullptr);

/// Greedy translation of input tokens, truncated to max_input_len. Empty
/// input gives empty output.
Tokens translate(const Model& model, const Tokens& input);

PerplexityReport evaluate_perplexity(const Model& model,
                                     const std::vector<UtteranceTracePair>& pairs);

struct FoldResult {
  std::size_t fold = 0;
  double cv_perplexity = 0;
  double test_perplexity = 0;
  bool operator==(const FoldResult&) const = default;
};

/// Called after each fold with the fold's model.
using FoldCallback = std::function<void(std::size_t fold, const Model& model)>;

/// One fold per non-held-out piece: train on the other pieces, report the
/// perplexity of the validation piece and of the held-out piece. The output
/// vocabulary covers every target of the input so held-out symbols stay
/// emittable.
std::vector<FoldResult> cross_validate(const std::vector<UtteranceTracePair>& pairs,
                                       const SplitSpec& split, const ModelConfig& model_config,
                                       const TrainConfig& train_config,
                                       const FoldCallback& on_fold = {},
                                       std::size_t min_count = 0);

/// "fold\tcv_perplexity\ttest_perplexity" header, then one row per fold.
std::string format_cv_table(const std::vector<FoldResult>& results);

class ModelFileError : public Error {
 public:
  using Error::Error;
};

class ModelVersionError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

class ModelDigestError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary container: magic, version, scalar width, config, vocabularies with
/// counts, named tensors with shapes, then an FNV-1a digest of all preceding
/// bytes. Little-endian.
std::string serialize_model(const Model& model);
/// Throws ModelDigestError on a digest mismatch and ModelVersionError on an
/// unknown version or a config different from `expected`.
Model parse_model(std::string_view bytes, const ModelConfig* expected = nullptr);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path, const ModelConfig* expected = nullptr);

}  // namespace tracenlu

#endif  // TRACENLU_MODEL_HPP_
