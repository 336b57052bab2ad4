// seq2seq.cpp

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

#include "tracenlu/seq2seq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "tracenlu/vocab.hpp"

namespace tracenlu {

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.encoder_layers = 3;
  c.decoder_layers = 3;
  c.hidden_size = 384;
  c.embedding_size = 300;
  return c;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

void ModelConfig::validate() const {
  if (encoder_layers == 0 || decoder_layers == 0 || hidden_size == 0 ||
      embedding_size == 0 || max_input_len == 0 || max_output_len == 0)
    throw ShapeError("model config: sizes must be positive");
  if (encoder_layers != decoder_layers)
    throw ShapeError("model config: encoder and decoder depths differ");
  if (!(perplexity_base > 0) || perplexity_base == 1 || !std::isfinite(perplexity_base))
    throw ShapeError("model config: perplexity base must be positive and not 1");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate))
    throw TrainingError("train config: learning rate must be finite and non-negative");
  if (batch_size == 0) throw TrainingError("train config: batch size must be positive");
  if (!(clip_norm > 0)) throw TrainingError("train config: clip norm must be positive");
}

std::string TrainLog::format() const {
  std::string out;
  char line[96];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%zu\t%.6f\t%.3f\n", e.epoch, e.loss, e.seconds);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(const ModelConfig& config,
                                               std::size_t input_vocab,
                                               std::size_t output_vocab) {
  config.validate();
  if (input_vocab < 3 || output_vocab < 3) throw ShapeError("model: vocabulary too small");
  using Mat = Matrix<Scalar>;
  const Eigen::Index H = config.hidden_size, E = config.embedding_size;
  ModelParams p;
  p.config = config;
  p.source_embedding = Mat::Zero(E, input_vocab);
  p.target_embedding = Mat::Zero(E, output_vocab);
  for (std::size_t k = 0; k < config.encoder_layers; ++k) {
    const Eigen::Index in = k == 0 ? E : H;
    p.encoder.push_back({Mat::Zero(4 * H, in + H), Mat::Zero(4 * H, 1)});
  }
  for (std::size_t k = 0; k < config.decoder_layers; ++k) {
    const Eigen::Index in = k == 0 ? E : H;
    p.decoder.push_back({Mat::Zero(4 * H, in + H), Mat::Zero(4 * H, 1)});
  }
  p.attention = Mat::Zero(H, H);
  p.combine_weight = Mat::Zero(H, 2 * H);
  p.combine_bias = Mat::Zero(H, 1);
  p.output_weight = Mat::Zero(output_vocab, H);
  p.output_bias = Mat::Zero(output_vocab, 1);
  return p;
}

template <typename Scalar>
void ModelParams<Scalar>::initialize(Rng& rng) {
  auto fill = [&rng](Matrix<Scalar>& m, double fan_in) {
    const double r = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Scalar>((2.0 * rng.uniform01() - 1.0) * r);
  };
  const Eigen::Index H = config.hidden_size;
  fill(source_embedding, static_cast<double>(source_embedding.rows()));
  fill(target_embedding, static_cast<double>(target_embedding.rows()));
  for (auto* stack : {&encoder, &decoder})
    for (auto& layer : *stack) {
      fill(layer.weight, static_cast<double>(layer.weight.cols()));
      layer.bias.setZero();
      layer.bias.middleRows(H, H).setConstant(Scalar(1));
    }
  fill(attention, static_cast<double>(H));
  fill(combine_weight, static_cast<double>(2 * H));
  combine_bias.setZero();
  fill(output_weight, static_cast<double>(H));
  output_bias.setZero();
}

template <typename Scalar>
std::vector<std::pair<std::string, Matrix<Scalar>*>> ModelParams<Scalar>::tensors() {
  std::vector<std::pair<std::string, Matrix<Scalar>*>> out;
  out.emplace_back("source_embedding", &source_embedding);
  out.emplace_back("target_embedding", &target_embedding);
  for (std::size_t k = 0; k < encoder.size(); ++k) {
    out.emplace_back("encoder." + std::to_string(k) + ".weight", &encoder[k].weight);
    out.emplace_back("encoder." + std::to_string(k) + ".bias", &encoder[k].bias);
  }
  for (std::size_t k = 0; k < decoder.size(); ++k) {
    out.emplace_back("decoder." + std::to_string(k) + ".weight", &decoder[k].weight);
    out.emplace_back("decoder." + std::to_string(k) + ".bias", &decoder[k].bias);
  }
  out.emplace_back("attention", &attention);
  out.emplace_back("combine_weight", &combine_weight);
  out.emplace_back("combine_bias", &combine_bias);
  out.emplace_back("output_weight", &output_weight);
  out.emplace_back("output_bias", &output_bias);
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, const Matrix<Scalar>*>> ModelParams<Scalar>::tensors()
    const {
  auto mutable_view = const_cast<ModelParams*>(this)->tensors();
  std::vector<std::pair<std::string, const Matrix<Scalar>*>> out;
  for (auto& [name, m] : mutable_view) out.emplace_back(std::move(name), m);
  return out;
}

template <typename Scalar>
std::size_t ModelParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.second->size();
  return n;
}

template <typename Scalar>
bool ModelParams<Scalar>::all_finite() const {
  for (const auto& t : tensors())
    if (!t.second->allFinite()) return false;
  return true;
}

template <typename Scalar>
void ModelParams<Scalar>::set_zero() {
  for (auto& t : tensors()) t.second->setZero();
}

// ---------------------------------------------------------------------------
// Forward and backward pieces

namespace {

template <typename Scalar>
struct StepCache {
  Matrix<Scalar> input;  // [x; h_prev]
  Matrix<Scalar> c_prev, i, f, o, g, tanh_c;
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-z).exp()).inverse();
}

template <typename Scalar>
void step_forward(const LstmLayer<Scalar>& layer, const Matrix<Scalar>& x,
                  const Matrix<Scalar>& h, const Matrix<Scalar>& c, StepCache<Scalar>& s,
                  Matrix<Scalar>& h_new, Matrix<Scalar>& c_new) {
  const Eigen::Index H = h.rows();
  s.input.resize(x.rows() + H, x.cols());
  s.input.topRows(x.rows()) = x;
  s.input.bottomRows(H) = h;
  Matrix<Scalar> z = layer.weight * s.input;
  z.colwise() += layer.bias.col(0);
  s.i = sigmoid(z.middleRows(0, H).array()).matrix();
  s.f = sigmoid(z.middleRows(H, H).array()).matrix();
  s.o = sigmoid(z.middleRows(2 * H, H).array()).matrix();
  s.g = z.middleRows(3 * H, H).array().tanh().matrix();
  s.c_prev = c;
  c_new = (s.f.array() * c.array() + s.i.array() * s.g.array()).matrix();
  s.tanh_c = c_new.array().tanh().matrix();
  h_new = (s.o.array() * s.tanh_c.array()).matrix();
}

template <typename Scalar>
void step_backward(const LstmLayer<Scalar>& layer, const StepCache<Scalar>& s,
                   const Matrix<Scalar>& dh, const Matrix<Scalar>& dc_in,
                   LstmLayer<Scalar>& grad, Matrix<Scalar>& dx, Matrix<Scalar>& dh_prev,
                   Matrix<Scalar>& dc_prev, bool drop_cell_carry) {
  const Eigen::Index H = dh.rows(), B = dh.cols();
  const Scalar one(1);
  auto i = s.i.array(), f = s.f.array(), o = s.o.array(), g = s.g.array();
  Matrix<Scalar> dc =
      (dc_in.array() + dh.array() * o * (one - s.tanh_c.array().square())).matrix();
  Matrix<Scalar> dz(4 * H, B);
  dz.middleRows(0, H) = (dc.array() * g * i * (one - i)).matrix();
  dz.middleRows(H, H) = (dc.array() * s.c_prev.array() * f * (one - f)).matrix();
  dz.middleRows(2 * H, H) = (dh.array() * s.tanh_c.array() * o * (one - o)).matrix();
  dz.middleRows(3 * H, H) = (dc.array() * i * (one - g.square())).matrix();
  if (drop_cell_carry)
    dc_prev = Matrix<Scalar>::Zero(H, B);
  else
    dc_prev = (dc.array() * f).matrix();
  grad.weight.noalias() += dz * s.input.transpose();
  grad.bias += dz.rowwise().sum();
  Matrix<Scalar> dinput = layer.weight.transpose() * dz;
  dx = dinput.topRows(dinput.rows() - H);
  dh_prev = dinput.bottomRows(H);
}

template <typename Scalar>
Matrix<Scalar> gather(const Matrix<Scalar>& table, const IdMatrix& ids, Eigen::Index t) {
  Matrix<Scalar> x(table.rows(), ids.cols());
  for (Eigen::Index b = 0; b < ids.cols(); ++b) {
    const int id = ids(t, b);
    if (id < 0 || id >= table.cols())
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(table.cols()));
    x.col(b) = table.col(id);
  }
  return x;
}

template <typename Scalar>
void scatter(Matrix<Scalar>& table, const IdMatrix& ids, Eigen::Index t,
             const Matrix<Scalar>& dx) {
  for (Eigen::Index b = 0; b < ids.cols(); ++b) table.col(ids(t, b)) += dx.col(b);
}

template <typename Scalar>
EncoderOutput<Scalar> encode_impl(const ModelParams<Scalar>& p, const IdMatrix& ids,
                                  const std::vector<std::size_t>& lengths,
                                  std::vector<std::vector<StepCache<Scalar>>>* caches) {
  const Eigen::Index T = ids.rows(), B = ids.cols();
  const Eigen::Index H = p.config.hidden_size;
  const std::size_t L = p.encoder.size();
  if (T == 0 || B == 0) throw ShapeError("encode: empty input");
  if (static_cast<std::size_t>(T) > p.config.max_input_len)
    throw ShapeError("encode: input of " + std::to_string(T) + " tokens exceeds max_input_len " +
                     std::to_string(p.config.max_input_len));
  if (lengths.size() != static_cast<std::size_t>(B))
    throw ShapeError("encode: lengths do not match batch");
  EncoderOutput<Scalar> out;
  out.mask = Matrix<Scalar>::Zero(T, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (lengths[b] == 0 || lengths[b] > static_cast<std::size_t>(T))
      throw ShapeError("encode: bad sequence length");
    out.mask.col(b).head(lengths[b]).setOnes();
  }
  std::vector<Matrix<Scalar>> h(L, Matrix<Scalar>::Zero(H, B)), c = h;
  if (caches) caches->assign(T, std::vector<StepCache<Scalar>>(L));
  StepCache<Scalar> scratch;
  Matrix<Scalar> hn, cn;
  for (Eigen::Index t = 0; t < T; ++t) {
    Matrix<Scalar> x = gather(p.source_embedding, ids, t);
    auto m = out.mask.row(t).array();
    for (std::size_t k = 0; k < L; ++k) {
      StepCache<Scalar>& s = caches ? (*caches)[t][k] : scratch;
      step_forward(p.encoder[k], x, h[k], c[k], s, hn, cn);
      h[k] = (h[k].array() + (hn - h[k]).array().rowwise() * m).matrix();
      c[k] = (c[k].array() + (cn - c[k]).array().rowwise() * m).matrix();
      x = h[k];
    }
    out.states.push_back(h[L - 1]);
  }
  for (std::size_t k = 0; k < L; ++k) out.final.push_back({h[k], c[k]});
  return out;
}

template <typename Scalar>
AttentionResult<Scalar> attend_impl(const Matrix<Scalar>& A, const Matrix<Scalar>& hd,
                                    const EncoderOutput<Scalar>& enc, Matrix<Scalar>* u_out) {
  const Eigen::Index T = enc.states.size(), B = hd.cols();
  Matrix<Scalar> u = A.transpose() * hd;
  Matrix<Scalar> scores(T, B);
  for (Eigen::Index t = 0; t < T; ++t)
    scores.row(t) = enc.states[t].cwiseProduct(u).colwise().sum();
  AttentionResult<Scalar> r;
  r.weights = Matrix<Scalar>::Zero(T, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index t = 0; t < T; ++t)
      if (enc.mask(t, b) > 0) best = std::max(best, scores(t, b));
    Scalar total(0);
    for (Eigen::Index t = 0; t < T; ++t)
      if (enc.mask(t, b) > 0) {
        r.weights(t, b) = std::exp(scores(t, b) - best);
        total += r.weights(t, b);
      }
    r.weights.col(b) /= total;
  }
  r.context = Matrix<Scalar>::Zero(hd.rows(), B);
  for (Eigen::Index t = 0; t < T; ++t)
    r.context.array() += enc.states[t].array().rowwise() * r.weights.row(t).array();
  if (u_out) *u_out = std::move(u);
  return r;
}

template <typename Scalar>
bool same_shape(const ModelParams<Scalar>& a, const ModelParams<Scalar>& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i)
    if (ta[i].second->rows() != tb[i].second->rows() ||
        ta[i].second->cols() != tb[i].second->cols())
      return false;
  return true;
}

template <typename Scalar>
void log_softmax_columns(Matrix<Scalar>& logits) {
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const Scalar m = logits.col(b).maxCoeff();
    const Scalar lse = m + std::log((logits.col(b).array() - m).exp().sum());
    logits.col(b).array() -= lse;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public operations

template <typename Scalar>
LstmState<Scalar> lstm_cell_step(const LstmLayer<Scalar>& layer, const Matrix<Scalar>& input,
                                 const Matrix<Scalar>& hidden, const Matrix<Scalar>& cell) {
  const Eigen::Index H = hidden.rows();
  if (layer.weight.rows() != 4 * H || layer.weight.cols() != input.rows() + H ||
      layer.bias.rows() != 4 * H || layer.bias.cols() != 1 || cell.rows() != H ||
      cell.cols() != hidden.cols() || input.cols() != hidden.cols())
    throw ShapeError("lstm_cell_step: inconsistent shapes");
  StepCache<Scalar> s;
  LstmState<Scalar> out;
  step_forward(layer, input, hidden, cell, s, out.hidden, out.cell);
  return out;
}

template <typename Scalar>
EncoderOutput<Scalar> encode_padded(const ModelParams<Scalar>& params, const IdMatrix& ids,
                                    const std::vector<std::size_t>& lengths) {
  return encode_impl<Scalar>(params, ids, lengths, nullptr);
}

template <typename Scalar>
EncoderOutput<Scalar> encode(const ModelParams<Scalar>& params, const std::vector<int>& ids) {
  IdMatrix m(ids.size(), 1);
  for (std::size_t t = 0; t < ids.size(); ++t) m(t, 0) = ids[t];
  return encode_impl<Scalar>(params, m, {ids.size()}, nullptr);
}

template <typename Scalar>
AttentionResult<Scalar> attend(const Matrix<Scalar>& attention,
                               const Matrix<Scalar>& decoder_state,
                               const EncoderOutput<Scalar>& encoded) {
  const Eigen::Index H = decoder_state.rows(), B = decoder_state.cols();
  const Eigen::Index T = encoded.states.size();
  if (T == 0) throw ShapeError("attend: no encoder states");
  if (attention.rows() != H || attention.cols() != H || encoded.mask.rows() != T ||
      encoded.mask.cols() != B)
    throw ShapeError("attend: inconsistent shapes");
  for (const auto& s : encoded.states)
    if (s.rows() != H || s.cols() != B) throw ShapeError("attend: inconsistent shapes");
  return attend_impl<Scalar>(attention, decoder_state, encoded, nullptr);
}

template <typename Scalar>
std::vector<int> decode_greedy(const ModelParams<Scalar>& p, const EncoderOutput<Scalar>& enc,
                               std::size_t max_output_len) {
  if (enc.states.empty() || enc.states[0].cols() != 1)
    throw ShapeError("decode_greedy: expects one encoded sequence");
  const Eigen::Index H = p.config.hidden_size;
  const std::size_t L = p.decoder.size();
  std::vector<Matrix<Scalar>> h, c;
  for (const auto& s : enc.final) {
    h.push_back(s.hidden);
    c.push_back(s.cell);
  }
  std::vector<int> out;
  StepCache<Scalar> scratch;
  Matrix<Scalar> hn, cn, a(2 * H, 1);
  int prev = Vocab::kStart;
  while (out.size() < max_output_len) {
    Matrix<Scalar> x = p.target_embedding.col(prev);
    for (std::size_t k = 0; k < L; ++k) {
      step_forward(p.decoder[k], x, h[k], c[k], scratch, hn, cn);
      h[k] = hn;
      c[k] = cn;
      x = hn;
    }
    auto att = attend_impl(p.attention, h[L - 1], enc, static_cast<Matrix<Scalar>*>(nullptr));
    a.topRows(H) = att.context;
    a.bottomRows(H) = h[L - 1];
    Matrix<Scalar> ht = ((p.combine_weight * a + p.combine_bias).array().tanh()).matrix();
    Matrix<Scalar> logits = p.output_weight * ht + p.output_bias;
    logits(Vocab::kPad, 0) = -std::numeric_limits<Scalar>::infinity();
    logits(Vocab::kStart, 0) = -std::numeric_limits<Scalar>::infinity();
    Eigen::Index best;
    logits.col(0).maxCoeff(&best);
    if (best == Vocab::kEnd) break;
    out.push_back(static_cast<int>(best));
    prev = static_cast<int>(best);
  }
  return out;
}

Batch make_batch(const std::vector<EncodedPair>& pairs, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ShapeError("make_batch: empty batch");
  std::size_t src_len = 0, tgt_len = 0;
  for (auto i : indices) {
    if (pairs.at(i).source.empty()) throw ShapeError("make_batch: empty source sequence");
    src_len = std::max(src_len, pairs[i].source.size());
    tgt_len = std::max(tgt_len, pairs[i].target.size() + 1);
  }
  const Eigen::Index B = indices.size();
  Batch batch;
  batch.source = IdMatrix::Constant(src_len, B, Vocab::kPad);
  batch.target_in = IdMatrix::Constant(tgt_len, B, Vocab::kPad);
  batch.target_out = IdMatrix::Constant(tgt_len, B, Vocab::kPad);
  for (Eigen::Index b = 0; b < B; ++b) {
    const EncodedPair& p = pairs[indices[b]];
    for (std::size_t t = 0; t < p.source.size(); ++t) batch.source(t, b) = p.source[t];
    batch.source_lengths.push_back(p.source.size());
    batch.target_in(0, b) = Vocab::kStart;
    for (std::size_t t = 0; t < p.target.size(); ++t) {
      batch.target_in(t + 1, b) = p.target[t];
      batch.target_out(t, b) = p.target[t];
    }
    batch.target_out(p.target.size(), b) = Vocab::kEnd;
    batch.tokens += p.target.size() + 1;
  }
  return batch;
}

Batch make_batch(const std::vector<EncodedPair>& pairs) {
  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), 0);
  return make_batch(pairs, all);
}

template <typename Scalar>
double batch_loss(const ModelParams<Scalar>& p, const Batch& batch, ModelParams<Scalar>* grad,
                  std::vector<double>* gold_log_probs, const BackwardOptions& options) {
  using Mat = Matrix<Scalar>;
  const Eigen::Index H = p.config.hidden_size;
  const Eigen::Index Tt = batch.target_in.rows(), B = batch.target_in.cols();
  const std::size_t L = p.decoder.size();
  if (batch.target_out.rows() != Tt || batch.target_out.cols() != B ||
      batch.source.cols() != B || batch.tokens == 0)
    throw ShapeError("batch_loss: malformed batch");
  if (static_cast<std::size_t>(Tt) > p.config.max_output_len)
    throw ShapeError("batch_loss: target exceeds max_output_len");
  const Eigen::Index V = p.output_vocab();

  std::vector<std::vector<StepCache<Scalar>>> enc_cache;
  EncoderOutput<Scalar> enc =
      encode_impl(p, batch.source, batch.source_lengths, grad ? &enc_cache : nullptr);
  const Eigen::Index Ts = enc.states.size();

  std::vector<std::vector<StepCache<Scalar>>> dec_cache(Tt, std::vector<StepCache<Scalar>>(L));
  std::vector<Mat> hd(Tt), u(Tt), alpha(Tt), joint(Tt), combined(Tt), probs(Tt);
  std::vector<Mat> h, c;
  for (const auto& s : enc.final) {
    h.push_back(s.hidden);
    c.push_back(s.cell);
  }
  double total = 0;
  Mat hn, cn;
  for (Eigen::Index t = 0; t < Tt; ++t) {
    Mat x = gather(p.target_embedding, batch.target_in, t);
    for (std::size_t k = 0; k < L; ++k) {
      step_forward(p.decoder[k], x, h[k], c[k], dec_cache[t][k], hn, cn);
      h[k] = hn;
      c[k] = cn;
      x = hn;
    }
    hd[t] = h[L - 1];
    auto att = attend_impl(p.attention, hd[t], enc, &u[t]);
    alpha[t] = std::move(att.weights);
    joint[t].resize(2 * H, B);
    joint[t].topRows(H) = att.context;
    joint[t].bottomRows(H) = hd[t];
    Mat pre = p.combine_weight * joint[t];
    pre.colwise() += p.combine_bias.col(0);
    combined[t] = pre.array().tanh().matrix();
    Mat logp = p.output_weight * combined[t];
    logp.colwise() += p.output_bias.col(0);
    log_softmax_columns(logp);
    for (Eigen::Index b = 0; b < B; ++b) {
      const int y = batch.target_out(t, b);
      if (y == Vocab::kPad) continue;
      if (y < 0 || y >= V) throw ShapeError("batch_loss: target id outside vocabulary");
      total -= static_cast<double>(logp(y, b));
      if (gold_log_probs) gold_log_probs->push_back(static_cast<double>(logp(y, b)));
    }
    if (grad) probs[t] = logp.array().exp().matrix();
  }
  const double loss = total / static_cast<double>(batch.tokens);
  if (!grad) return loss;

  // Backward
  if (same_shape(*grad, p))
    grad->set_zero();
  else
    *grad = ModelParams<Scalar>::zeros(p.config, p.input_vocab(), p.output_vocab());
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.tokens);
  const Scalar one(1);
  std::vector<Mat> d_states(Ts, Mat::Zero(H, B));
  std::vector<Mat> dh_next(L, Mat::Zero(H, B)), dc_next = dh_next;
  Mat dx, dh_prev, dc_prev;
  for (Eigen::Index t = Tt - 1; t >= 0; --t) {
    Mat dlogits = probs[t];
    for (Eigen::Index b = 0; b < B; ++b) {
      const int y = batch.target_out(t, b);
      if (y == Vocab::kPad)
        dlogits.col(b).setZero();
      else
        dlogits(y, b) -= one;
    }
    dlogits *= inv_n;
    grad->output_weight.noalias() += dlogits * combined[t].transpose();
    grad->output_bias += dlogits.rowwise().sum();
    Mat dpre = ((p.output_weight.transpose() * dlogits).array() *
                (one - combined[t].array().square()))
                   .matrix();
    grad->combine_weight.noalias() += dpre * joint[t].transpose();
    grad->combine_bias += dpre.rowwise().sum();
    Mat djoint = p.combine_weight.transpose() * dpre;
    Mat dctx = djoint.topRows(H);
    Mat dhd = djoint.bottomRows(H);

    // attention
    const Mat& a = alpha[t];
    Mat dalpha(Ts, B);
    for (Eigen::Index s = 0; s < Ts; ++s) {
      dalpha.row(s) = enc.states[s].cwiseProduct(dctx).colwise().sum();
      d_states[s].array() += dctx.array().rowwise() * a.row(s).array();
    }
    Mat ds(Ts, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Scalar dot = a.col(b).dot(dalpha.col(b));
      ds.col(b) = (a.col(b).array() * (dalpha.col(b).array() - dot)).matrix();
    }
    Mat du = Mat::Zero(H, B);
    for (Eigen::Index s = 0; s < Ts; ++s) {
      du.array() += enc.states[s].array().rowwise() * ds.row(s).array();
      d_states[s].array() += u[t].array().rowwise() * ds.row(s).array();
    }
    dhd.noalias() += p.attention * du;
    grad->attention.noalias() += hd[t] * du.transpose();

    // decoder stack
    Mat d_above = dhd;
    for (std::size_t k = L; k-- > 0;) {
      Mat dh = dh_next[k] + d_above;
      step_backward(p.decoder[k], dec_cache[t][k], dh, dc_next[k], grad->decoder[k], dx,
                    dh_prev, dc_prev, options.drop_cell_carry);
      dh_next[k] = dh_prev;
      dc_next[k] = dc_prev;
      d_above = dx;
    }
    scatter(grad->target_embedding, batch.target_in, t, d_above);
  }

  // encoder stack, seeded with the decoder's initial-state gradients
  for (Eigen::Index t = Ts - 1; t >= 0; --t) {
    auto m = enc.mask.row(t).array();
    Mat d_above = d_states[t];
    for (std::size_t k = L; k-- > 0;) {
      Mat dh = dh_next[k] + d_above;
      const Mat& dc = dc_next[k];
      Mat dh_new = (dh.array().rowwise() * m).matrix();
      Mat dc_new = (dc.array().rowwise() * m).matrix();
      step_backward(p.encoder[k], enc_cache[t][k], dh_new, dc_new, grad->encoder[k], dx,
                    dh_prev, dc_prev, options.drop_cell_carry);
      Mat carry_h = (dh.array().rowwise() * (one - m)).matrix();
      Mat carry_c = (dc.array().rowwise() * (one - m)).matrix();
      dh_next[k] = dh_prev + carry_h;
      dc_next[k] = dc_prev + carry_c;
      d_above = dx;
    }
    scatter(grad->source_embedding, batch.source, t, d_above);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training and evaluation

template <typename Scalar>
TrainLog train(ModelParams<Scalar>& params, const std::vector<EncodedPair>& data,
               const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw TrainingError("train: no training pairs");
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ModelParams<Scalar> grad = ModelParams<Scalar>::zeros(params.config, params.input_vocab(),
                                                        params.output_vocab());
  ModelParams<Scalar> m1 = grad, m2 = grad;
  auto pt = params.tensors();
  auto gt = grad.tensors();
  auto m1t = m1.tensors();
  auto m2t = m2.tensors();

  Rng rng(derive_seed(config.seed, "batches"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle(order, rng);
    double loss_sum = 0;
    std::size_t tokens = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
      std::vector<std::size_t> idx(order.begin() + lo,
                                   order.begin() + std::min(order.size(), lo + config.batch_size));
      Batch batch = make_batch(data, idx);
      const double loss = batch_loss(params, batch, &grad);
      if (!std::isfinite(loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(batch.tokens);
      tokens += batch.tokens;

      double sq = 0;
      for (const auto& g : gt) sq += static_cast<double>(g.second->squaredNorm());
      const double norm = std::sqrt(sq);
      const Scalar scale =
          norm > config.clip_norm ? static_cast<Scalar>(config.clip_norm / norm) : Scalar(1);

      ++step;
      const Scalar lr = static_cast<Scalar>(config.learning_rate);
      const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1, static_cast<double>(step)));
      const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2, static_cast<double>(step)));
      const Scalar b1 = static_cast<Scalar>(beta1), b2 = static_cast<Scalar>(beta2);
      for (std::size_t i = 0; i < pt.size(); ++i) {
        auto g = (gt[i].second->array() * scale);
        auto m = m1t[i].second->array();
        auto v = m2t[i].second->array();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.square();
        pt[i].second->array() -=
            lr * (m / c1) / ((v / c2).sqrt() + static_cast<Scalar>(eps));
      }
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(tokens), seconds});
  }
  return log;
}

template <typename Scalar>
double mean_loss(const ModelParams<Scalar>& params, const std::vector<EncodedPair>& data,
                 std::size_t batch_size) {
  if (data.empty() || batch_size == 0) throw ShapeError("mean_loss: no data");
  double sum = 0;
  std::size_t tokens = 0;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - lo));
    std::iota(idx.begin(), idx.end(), lo);
    Batch batch = make_batch(data, idx);
    sum += batch_loss(params, batch) * static_cast<double>(batch.tokens);
    tokens += batch.tokens;
  }
  return sum / static_cast<double>(tokens);
}

PerplexityReport perplexity_from_log_probs(const std::vector<double>& natural_log_probs,
                                           double base) {
  if (!(base > 0) || base == 1) throw Error("perplexity: base must be positive and not 1");
  if (natural_log_probs.empty()) throw Error("perplexity: no tokens");
  PerplexityReport r;
  r.base = base;
  r.tokens = natural_log_probs.size();
  const double ln_base = std::log(base);
  double sum = 0;
  bool zero = false;
  for (double lp : natural_log_probs) {
    const double lb = lp / ln_base;
    r.log_probs.push_back(lb);
    if (std::isinf(lp) && lp < 0) zero = true;
    sum += lb;
  }
  r.value = zero ? std::numeric_limits<double>::infinity()
                 : std::pow(base, -sum / static_cast<double>(r.tokens));
  return r;
}

template <typename Scalar>
PerplexityReport perplexity(const ModelParams<Scalar>& params,
                            const std::vector<EncodedPair>& data, double base,
                            std::size_t batch_size) {
  if (data.empty() || batch_size == 0) throw Error("perplexity: no data");
  std::vector<double> log_probs;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - lo));
    std::iota(idx.begin(), idx.end(), lo);
    batch_loss<Scalar>(params, make_batch(data, idx), nullptr, &log_probs);
  }
  return perplexity_from_log_probs(log_probs, base);
}

GradientCheckReport gradient_check(const ModelParams<double>& params, const Batch& batch,
                                   double tolerance, double step,
                                   const BackwardOptions& options) {
  ModelParams<double> grad;
  batch_loss(params, batch, &grad, nullptr, options);
  ModelParams<double> probe = params;
  auto pt = probe.tensors();
  auto gt = grad.tensors();
  GradientCheckReport r;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    Matrix<double>& m = *pt[i].second;
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      const double saved = m.data()[j];
      m.data()[j] = saved + step;
      const double up = batch_loss(probe, batch);
      m.data()[j] = saved - step;
      const double down = batch_loss(probe, batch);
      m.data()[j] = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = gt[i].second->data()[j];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      if (rel > r.max_relative_error || r.worst_tensor.empty()) {
        r.max_relative_error = rel;
        r.worst_tensor = pt[i].first;
      }
      r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(analytic));
      ++r.parameters_checked;
    }
  }
  r.passed = r.max_relative_error <= tolerance;
  return r;
}

GradientCheckReport gradient_check(const ModelConfig& config, double tolerance,
                                   std::size_t vocab, std::uint64_t seed,
                                   const BackwardOptions& options) {
  if (config.hidden_size > 8) throw ShapeError("gradient_check: hidden size above 8");
  Rng rng(seed);
  auto params = ModelParams<double>::zeros(config, vocab, vocab);
  params.initialize(rng);
  // random biases so every gate term is exercised
  for (auto& [name, m] : params.tensors())
    if (m->cols() == 1)
      for (Eigen::Index j = 0; j < m->size(); ++j) m->data()[j] = rng.uniform01() - 0.5;
  auto random_ids = [&](std::size_t n) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < n; ++i)
      ids.push_back(Vocab::kOov + static_cast<int>(rng.uniform_index(vocab - Vocab::kOov)));
    return ids;
  };
  // two pairs of different lengths so padding and masking are covered
  std::vector<EncodedPair> pairs = {{random_ids(5), random_ids(4)},
                                    {random_ids(3), random_ids(2)}};
  return gradient_check(params, make_batch(pairs), tolerance, 1e-5, options);
}

// ---------------------------------------------------------------------------
// Instantiations

#define TRACENLU_INSTANTIATE(S)                                                             \
  template struct ModelParams<S>;                                                           \
  template LstmState<S> lstm_cell_step(const LstmLayer<S>&, const Matrix<S>&,              \
                                       const Matrix<S>&, const Matrix<S>&);                 \
  template EncoderOutput<S> encode_padded(const ModelParams<S>&, const IdMatrix&,           \
                                          const std::vector<std::size_t>&);                 \
  template EncoderOutput<S> encode(const ModelParams<S>&, const std::vector<int>&);         \
  template AttentionResult<S> attend(const Matrix<S>&, const Matrix<S>&,                    \
                                     const EncoderOutput<S>&);                              \
  template std::vector<int> decode_greedy(const ModelParams<S>&, const EncoderOutput<S>&,   \
                                          std::size_t);                                     \
  template double batch_loss(const ModelParams<S>&, const Batch&, ModelParams<S>*,          \
                             std::vector<double>*, const BackwardOptions&);                 \
  template TrainLog train(ModelParams<S>&, const std::vector<EncodedPair>&,                 \
                          const TrainConfig&);                                              \
  template double mean_loss(const ModelParams<S>&, const std::vector<EncodedPair>&,         \
                            std::size_t);                                                   \
  template PerplexityReport perplexity(const ModelParams<S>&, const std::vector<EncodedPair>&, \
                                       double, std::size_t);

TRACENLU_INSTANTIATE(float)
TRACENLU_INSTANTIATE(double)

#undef TRACENLU_INSTANTIATE

}  // namespace tracenlu
