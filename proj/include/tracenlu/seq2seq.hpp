// tracenlu/seq2seq.hpp

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

#ifndef TRACENLU_SEQ2SEQ_HPP_
#define TRACENLU_SEQ2SEQ_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tracenlu/common.hpp"

namespace tracenlu {

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

struct ModelConfig {
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t hidden_size = 64;
  std::size_t embedding_size = 32;
  std::size_t max_input_len = 80;
  std::size_t max_output_len = 80;
  double perplexity_base = 2.0;

  /// 3 + 3 layers of 384 cells.
  static ModelConfig paper();
  /// 2 + 2 layers of 64 cells.
  static ModelConfig desk();
  /// Throws ShapeError on zero sizes, a non-positive base, or differing
  /// encoder and decoder depths (the decoder starts from the encoder's
  /// per-layer final states).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Token ids laid out time x batch.
using IdMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// One LSTM layer. weight is 4H x (in + H) over [x; h], rows stacked as
/// input, forget, output gate and cell candidate; bias is 4H x 1.
template <typename Scalar>
struct LstmLayer {
  Matrix<Scalar> weight;
  Matrix<Scalar> bias;
};

/// All trainable tensors. Embeddings store one column per token; biases are
/// single-column matrices so every tensor has the same type.
template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  Matrix<Scalar> source_embedding;  // E x V_in
  Matrix<Scalar> target_embedding;  // E x V_out
  std::vector<LstmLayer<Scalar>> encoder;
  std::vector<LstmLayer<Scalar>> decoder;
  Matrix<Scalar> attention;       // H x H, score = h_dec' A h_enc
  Matrix<Scalar> combine_weight;  // H x 2H over [context; h_dec]
  Matrix<Scalar> combine_bias;    // H x 1
  Matrix<Scalar> output_weight;   // V_out x H
  Matrix<Scalar> output_bias;     // V_out x 1

  /// Correctly shaped, all zero.
  static ModelParams zeros(const ModelConfig& config, std::size_t input_vocab,
                           std::size_t output_vocab);
  /// Weights uniform in +-1/sqrt(fan_in); biases zero except the forget gate
  /// bias, which starts at 1.
  void initialize(Rng& rng);

  std::size_t input_vocab() const { return source_embedding.cols(); }
  std::size_t output_vocab() const { return target_embedding.cols(); }

  /// Every tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix<Scalar>*>> tensors();
  std::vector<std::pair<std::string, const Matrix<Scalar>*>> tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  void set_zero();

  template <typename To>
  ModelParams<To> cast() const {
    ModelParams<To> out = ModelParams<To>::zeros(config, input_vocab(), output_vocab());
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i)
      *dst[i].second = src[i].second->template cast<To>();
    return out;
  }
};

template <typename Scalar>
struct LstmState {
  Matrix<Scalar> hidden;
  Matrix<Scalar> cell;
};

/// One step over a batch of columns: gates from W [x; h] + b, then
/// cell' = f * cell + i * g and hidden' = o * tanh(cell').
template <typename Scalar>
LstmState<Scalar> lstm_cell_step(const LstmLayer<Scalar>& layer, const Matrix<Scalar>& input,
                                 const Matrix<Scalar>& hidden, const Matrix<Scalar>& cell);

template <typename Scalar>
struct EncoderOutput {
  std::vector<Matrix<Scalar>> states;  // per step, top layer, H x B
  Matrix<Scalar> mask;                 // T x B, 1 on real tokens
  std::vector<LstmState<Scalar>> final;  // per layer
};

/// Encodes right-padded columns. Steps at or beyond a column's length leave
/// that column's state unchanged, so the padded ids never matter.
template <typename Scalar>
EncoderOutput<Scalar> encode_padded(const ModelParams<Scalar>& params, const IdMatrix& ids,
                                    const std::vector<std::size_t>& lengths);

template <typename Scalar>
EncoderOutput<Scalar> encode(const ModelParams<Scalar>& params, const std::vector<int>& ids);

template <typename Scalar>
struct AttentionResult {
  Matrix<Scalar> context;  // H x B
  Matrix<Scalar> weights;  // T x B, zero on masked steps
};

/// Bilinear scores h_dec' A h_enc over the unmasked encoder steps, softmax,
/// weighted sum of encoder states.
template <typename Scalar>
AttentionResult<Scalar> attend(const Matrix<Scalar>& attention,
                               const Matrix<Scalar>& decoder_state,
                               const EncoderOutput<Scalar>& encoded);

/// Greedy decoding of a single encoded sequence (B = 1). Returns the emitted
/// ids without END. PAD and START are never emitted.
template <typename Scalar>
std::vector<int> decode_greedy(const ModelParams<Scalar>& params,
                               const EncoderOutput<Scalar>& encoded,
                               std::size_t max_output_len);

/// Source and target ids of one pair; target excludes START and END.
struct EncodedPair {
  std::vector<int> source;
  std::vector<int> target;
};

/// Padded teacher-forcing batch. target_in is START y1..yn, target_out is
/// y1..yn END, both padded with PAD.
struct Batch {
  IdMatrix source;
  std::vector<std::size_t> source_lengths;
  IdMatrix target_in;
  IdMatrix target_out;
  std::size_t tokens = 0;
};

Batch make_batch(const std::vector<EncodedPair>& pairs, const std::vector<std::size_t>& indices);
Batch make_batch(const std::vector<EncodedPair>& pairs);

/// Test hook: breaks one term of the backward pass.
struct BackwardOptions {
  bool drop_cell_carry = false;
};

/// Mean per-token cross-entropy (natural log) of the batch. When grad is
/// given it is overwritten with the gradient. When gold_log_probs is given
/// the natural-log probability of every non-PAD gold token is appended.
template <typename Scalar>
double batch_loss(const ModelParams<Scalar>& params, const Batch& batch,
                  ModelParams<Scalar>* grad = nullptr,
                  std::vector<double>* gold_log_probs = nullptr,
                  const BackwardOptions& options = {});

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  /// One "epoch loss seconds" line per epoch.
  std::string format() const;
};

/// Adam on shuffled mini-batches with global-norm clipping. Training starts
/// from the given parameters. Throws TrainingError on a non-finite loss.
template <typename Scalar>
TrainLog train(ModelParams<Scalar>& params, const std::vector<EncodedPair>& data,
               const TrainConfig& config);

/// Token-weighted mean loss over the data.
template <typename Scalar>
double mean_loss(const ModelParams<Scalar>& params, const std::vector<EncodedPair>& data,
                 std::size_t batch_size = 64);

struct PerplexityReport {
  std::size_t tokens = 0;
  double base = 2.0;
  std::vector<double> log_probs;  // log_base q(x_i)
  double value = 0;
};

/// base^(-(1/N) sum log_base q). Natural-log input; a zero probability gives
/// infinity.
PerplexityReport perplexity_from_log_probs(const std::vector<double>& natural_log_probs,
                                           double base);

/// Teacher-forced perplexity over every gold target token including END.
template <typename Scalar>
PerplexityReport perplexity(const ModelParams<Scalar>& params,
                            const std::vector<EncodedPair>& data, double base,
                            std::size_t batch_size = 64);

struct GradientCheckReport {
  double max_relative_error = 0;
  std::string worst_tensor;
  std::size_t parameters_checked = 0;
  double max_abs_gradient = 0;
  bool passed = false;
};

/// Central differences against batch_loss for every parameter entry.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckReport gradient_check(const ModelParams<double>& params, const Batch& batch,
                                   double tolerance, double step = 1e-5,
                                   const BackwardOptions& options = {});

/// Random model and one random pair drawn from vocabularies of `vocab` ids.
GradientCheckReport gradient_check(const ModelConfig& config, double tolerance,
                                   std::size_t vocab = 10, std::uint64_t seed = 1,
                                   const BackwardOptions& options = {});

}  // namespace tracenlu

#endif  // TRACENLU_SEQ2SEQ_HPP_
