// capgen/model.hpp
//
// The caption network: an affine image encoder, a word-embedding table, a
// single LSTM cell unrolled over the sentence, and a vocabulary softmax.
// The image is consumed exactly once, as the input of the step before the
// start word; every later step consumes the embedding of the previous word.
// backward_sequence() is the exact analytic gradient of the summed negative
// log-likelihood of the sentence, accumulated across the unrolled steps
// (all steps share the same weights).

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

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "capgen/errors.hpp"
#include "capgen/numerics.hpp"

namespace capgen {

// Reserved token ids. The data layer guarantees these three ids exist in
// every vocabulary; the model layer only relies on start/stop framing.
inline constexpr int kStartId = 0;
inline constexpr int kStopId = 1;
inline constexpr int kUnkId = 2;

struct Dims {
  int feature_dim = 0;  // image feature vector size
  int embed_dim = 0;    // word embedding / LSTM input size
  int hidden_dim = 0;   // LSTM memory size
  int vocab_size = 0;

  bool operator==(const Dims&) const = default;
};

inline void validate(const Dims& d) {
  if (d.feature_dim <= 0 || d.embed_dim <= 0 || d.hidden_dim <= 0 ||
      d.vocab_size <= 0) {
    throw InvalidConfigError("all model dims must be positive");
  }
}

// Every trainable weight of the model. Parameters and Gradients share this
// layout (a gradient has one matrix per parameter matrix, same shape); the
// tag keeps them distinct types so they cannot be swapped by accident.
//
// Shapes: the four x-side gate/cell matrices are hidden x embed, the four
// m-side ones hidden x hidden, w_e is embed x vocab (one embedding per
// column), w_enc is embed x feature, w_d is vocab x hidden.
template <class Tag>
struct WeightsT {
  Dims dims;
  Matrix w_ix, w_im;  // input gate
  Matrix w_fx, w_fm;  // forget gate
  Matrix w_ox, w_om;  // output gate
  Matrix w_cx, w_cm;  // cell candidate
  Matrix w_e;         // word embedding
  Matrix w_enc;       // image encoder projection
  Matrix w_d;         // hidden -> vocabulary logits

  static WeightsT zeros(const Dims& d) {
    validate(d);
    WeightsT w;
    w.dims = d;
    w.w_ix = Matrix(d.hidden_dim, d.embed_dim);
    w.w_im = Matrix(d.hidden_dim, d.hidden_dim);
    w.w_fx = Matrix(d.hidden_dim, d.embed_dim);
    w.w_fm = Matrix(d.hidden_dim, d.hidden_dim);
    w.w_ox = Matrix(d.hidden_dim, d.embed_dim);
    w.w_om = Matrix(d.hidden_dim, d.hidden_dim);
    w.w_cx = Matrix(d.hidden_dim, d.embed_dim);
    w.w_cm = Matrix(d.hidden_dim, d.hidden_dim);
    w.w_e = Matrix(d.embed_dim, d.vocab_size);
    w.w_enc = Matrix(d.embed_dim, d.feature_dim);
    w.w_d = Matrix(d.vocab_size, d.hidden_dim);
    return w;
  }

  // Visits the matrices in a fixed canonical order. Initialization, SGD,
  // clipping, checkpoints and the finite-difference harness all iterate
  // through here, so the order is part of the determinism contract.
  template <class F>
  void for_each(F&& f) {
    f("w_ix", w_ix); f("w_im", w_im);
    f("w_fx", w_fx); f("w_fm", w_fm);
    f("w_ox", w_ox); f("w_om", w_om);
    f("w_cx", w_cx); f("w_cm", w_cm);
    f("w_e", w_e); f("w_enc", w_enc); f("w_d", w_d);
  }
  template <class F>
  void for_each(F&& f) const {
    f("w_ix", w_ix); f("w_im", w_im);
    f("w_fx", w_fx); f("w_fm", w_fm);
    f("w_ox", w_ox); f("w_om", w_om);
    f("w_cx", w_cx); f("w_cm", w_cm);
    f("w_e", w_e); f("w_enc", w_enc); f("w_d", w_d);
  }

  bool operator==(const WeightsT&) const = default;
};

struct ParamsTag {};
struct GradsTag {};
using Parameters = WeightsT<ParamsTag>;
using Gradients = WeightsT<GradsTag>;

inline Gradients zero_gradients(const Dims& d) { return Gradients::zeros(d); }

// Memory cell c and memory output m of one step.
struct LstmState {
  Vector c;
  Vector m;

  bool operator==(const LstmState&) const = default;
};

inline LstmState initial_state(int hidden_dim) {
  return LstmState{Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)};
}

// Every entry drawn uniformly from [-scale, +scale], in for_each order,
// row-major within each matrix. Deterministic per generator state.
inline Parameters init_parameters(const Dims& dims, double scale, RngState& rng) {
  validate(dims);
  if (scale < 0.0 || !std::isfinite(scale)) {
    throw InvalidConfigError("init scale must be finite and nonnegative");
  }
  Parameters params = Parameters::zeros(dims);
  params.for_each([&](const char*, Matrix& m) {
    for (double& v : m.data) v = rng.next_uniform(-scale, scale);
  });
  return params;
}

// The trainable stand-in for the top layer of an image feature extractor:
// a plain linear projection of externally supplied features.
inline Vector encode_image(const Vector& features, const Parameters& params) {
  if (static_cast<int>(features.size()) != params.dims.feature_dim) {
    throw ShapeError("encode_image: feature dim " + std::to_string(features.size()) +
                     " != " + std::to_string(params.dims.feature_dim));
  }
  return matvec(params.w_enc, features);
}

// Column `token` of w_e; equivalent to w_e times the one-hot vector of the
// token.
inline Vector embed_word(int token, const Parameters& params) {
  if (token < 0 || token >= params.dims.vocab_size) {
    throw InvalidTokenError("embed_word: token id " + std::to_string(token) +
                            " out of range [0, " +
                            std::to_string(params.dims.vocab_size) + ")");
  }
  Vector out(params.dims.embed_dim);
  for (int r = 0; r < params.dims.embed_dim; ++r) out[r] = params.w_e(r, token);
  return out;
}

// One unrolled step, with the gate/candidate activations kept for backprop.
// drop_scale is the per-entry input scaling applied by training-time
// dropout (empty means identity).
struct StepRecord {
  Vector x;          // input after dropout, embed_dim
  Vector gate_i;     // sigmoid input gate
  Vector gate_f;     // sigmoid forget gate
  Vector gate_o;     // sigmoid output gate
  Vector candidate;  // tanh of the cell candidate preactivation
  Vector c;          // cell after update
  Vector m;          // memory output, o (.) c
  Vector drop_scale;
  Vector p;          // next-word distribution; empty on the image step
};

namespace detail {

inline StepRecord lstm_step_record(const Vector& x, const LstmState& prev,
                                   const Parameters& params) {
  const Dims& d = params.dims;
  if (static_cast<int>(x.size()) != d.embed_dim) {
    throw ShapeError("lstm_step: input dim " + std::to_string(x.size()) +
                     " != embed dim " + std::to_string(d.embed_dim));
  }
  if (static_cast<int>(prev.c.size()) != d.hidden_dim ||
      static_cast<int>(prev.m.size()) != d.hidden_dim) {
    throw ShapeError("lstm_step: state dim != hidden dim " +
                     std::to_string(d.hidden_dim));
  }
  StepRecord rec;
  rec.x = x;

  auto gate_pre = [&](const Matrix& wx, const Matrix& wm) {
    Vector pre = matvec(wx, x);
    const Vector rec_part = matvec(wm, prev.m);
    for (int i = 0; i < d.hidden_dim; ++i) pre[i] += rec_part[i];
    return pre;
  };

  rec.gate_i = activate(Activation::sigmoid, gate_pre(params.w_ix, params.w_im));
  rec.gate_f = activate(Activation::sigmoid, gate_pre(params.w_fx, params.w_fm));
  rec.gate_o = activate(Activation::sigmoid, gate_pre(params.w_ox, params.w_om));
  rec.candidate = activate(Activation::tanh, gate_pre(params.w_cx, params.w_cm));

  rec.c.resize(d.hidden_dim);
  rec.m.resize(d.hidden_dim);
  for (int i = 0; i < d.hidden_dim; ++i) {
    rec.c[i] = rec.gate_f[i] * prev.c[i] + rec.gate_i[i] * rec.candidate[i];
    rec.m[i] = rec.gate_o[i] * rec.c[i];
  }
  return rec;
}

}  // namespace detail

// i = sigma(W_ix x + W_im m'), f = sigma(W_fx x + W_fm m'),
// o = sigma(W_ox x + W_om m'), c = f (.) c' + i (.) tanh(W_cx x + W_cm m'),
// m = o (.) c.
inline LstmState lstm_step(const Vector& x, const LstmState& prev,
                           const Parameters& params) {
  StepRecord rec = detail::lstm_step_record(x, prev, params);
  return LstmState{std::move(rec.c), std::move(rec.m)};
}

// softmax(w_d m): the distribution over the vocabulary given a state.
inline Vector word_distribution(const LstmState& state, const Parameters& params) {
  return softmax(matvec(params.w_d, state.m));
}

// The whole unrolled computation for one (image, sentence) pair. word_steps[t]
// consumed tokens[t] and stores p, the distribution that predicts
// tokens[t+1]; there are exactly tokens.size() - 1 word steps.
struct ForwardTrace {
  StepRecord image_step;
  std::vector<StepRecord> word_steps;
  std::vector<int> tokens;  // the framed sequence this trace was built from
  Vector features;
  int image_injections = 0;  // how many times the encoder output was consumed

  int num_predictions() const { return static_cast<int>(word_steps.size()); }
};

namespace detail {

inline void check_framing(const std::vector<int>& tokens, const Dims& dims) {
  if (tokens.size() < 2 || tokens.front() != kStartId || tokens.back() != kStopId) {
    throw MalformedSequenceError(
        "token sequence must be [start, ..., stop] with length >= 2");
  }
  for (int t : tokens) {
    if (t < 0 || t >= dims.vocab_size) {
      throw InvalidTokenError("token id " + std::to_string(t) +
                              " out of range [0, " +
                              std::to_string(dims.vocab_size) + ")");
    }
  }
}

// Dropout scales: entry is 0 with probability `rate`, else 1/(1-rate).
inline Vector dropout_scales(int dim, double rate, RngState& rng) {
  Vector scales(dim);
  const double keep = 1.0 / (1.0 - rate);
  for (int i = 0; i < dim; ++i) {
    scales[i] = rng.next_double() < rate ? 0.0 : keep;
  }
  return scales;
}

// rate < 0 means "no dropout" (inference / evaluation path).
inline ForwardTrace forward_impl(const Vector& features,
                                 const std::vector<int>& tokens,
                                 const Parameters& params, double rate,
                                 RngState* rng) {
  check_framing(tokens, params.dims);
  ForwardTrace trace;
  trace.tokens = tokens;
  trace.features = features;

  auto dropped = [&](Vector x, Vector* scale_out) {
    if (rate <= 0.0) return x;
    Vector scales = dropout_scales(static_cast<int>(x.size()), rate, *rng);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= scales[i];
    *scale_out = std::move(scales);
    return x;
  };

  // Step -1: the image, from the zero state. Consumed exactly once.
  Vector scale;
  Vector x = dropped(encode_image(features, params), &scale);
  trace.image_injections = 1;
  StepRecord rec = lstm_step_record(x, initial_state(params.dims.hidden_dim), params);
  rec.drop_scale = std::move(scale);
  LstmState state{rec.c, rec.m};
  trace.image_step = std::move(rec);

  // Steps 0..N-1: the words. Step t predicts tokens[t+1].
  const int steps = static_cast<int>(tokens.size()) - 1;
  trace.word_steps.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    scale.clear();
    x = dropped(embed_word(tokens[t], params), &scale);
    rec = lstm_step_record(x, state, params);
    rec.drop_scale = std::move(scale);
    rec.p = softmax(matvec(params.w_d, rec.m));
    state = LstmState{rec.c, rec.m};
    trace.word_steps.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace detail

inline ForwardTrace forward_sequence(const Vector& features,
                                     const std::vector<int>& tokens,
                                     const Parameters& params) {
  return detail::forward_impl(features, tokens, params, -1.0, nullptr);
}

// Training-time variant: inverted dropout on every LSTM input (the encoded
// image and the word embeddings). The kept mask is recorded in the trace so
// backward_sequence can push gradients through it.
inline ForwardTrace forward_sequence_dropout(const Vector& features,
                                             const std::vector<int>& tokens,
                                             const Parameters& params,
                                             double rate, RngState& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw InvalidConfigError("dropout rate must lie in [0, 1)");
  }
  return detail::forward_impl(features, tokens, params, rate, &rng);
}

// Sum over t of log p_t(tokens[t]), the chain-rule factorization of
// log p(sentence | image). Always <= 0.
inline double sequence_log_prob(const Vector& features,
                                const std::vector<int>& tokens,
                                const Parameters& params) {
  const ForwardTrace trace = forward_sequence(features, tokens, params);
  double log_prob = 0.0;
  for (int t = 0; t < trace.num_predictions(); ++t) {
    log_prob += std::log(trace.word_steps[t].p[tokens[t + 1]]);
  }
  return log_prob;
}

namespace detail {

struct StepGrads {
  Vector da_i, da_f, da_o, da_c;  // preactivation grads
  Vector dx;
  Vector dm_prev, dc_prev;
};

inline StepGrads backprop_step(const StepRecord& rec, const Vector& c_prev,
                               const Vector& dm, const Vector& dc,
                               const Parameters& params) {
  const int h = static_cast<int>(rec.c.size());
  StepGrads g;
  g.da_i.resize(h);
  g.da_f.resize(h);
  g.da_o.resize(h);
  g.da_c.resize(h);
  Vector dct(h);
  for (int j = 0; j < h; ++j) {
    const double do_j = dm[j] * rec.c[j];
    g.da_o[j] = do_j * rec.gate_o[j] * (1.0 - rec.gate_o[j]);
    dct[j] = dc[j] + dm[j] * rec.gate_o[j];
    const double di_j = dct[j] * rec.candidate[j];
    g.da_i[j] = di_j * rec.gate_i[j] * (1.0 - rec.gate_i[j]);
    const double dg_j = dct[j] * rec.gate_i[j];
    g.da_c[j] = dg_j * (1.0 - rec.candidate[j] * rec.candidate[j]);
    const double df_j = dct[j] * c_prev[j];
    g.da_f[j] = df_j * rec.gate_f[j] * (1.0 - rec.gate_f[j]);
  }
  g.dc_prev.resize(h);
  for (int j = 0; j < h; ++j) g.dc_prev[j] = dct[j] * rec.gate_f[j];

  auto add_into = [](Vector& acc, const Vector& v) {
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
  };
  g.dm_prev = matvec_transposed(params.w_im, g.da_i);
  add_into(g.dm_prev, matvec_transposed(params.w_fm, g.da_f));
  add_into(g.dm_prev, matvec_transposed(params.w_om, g.da_o));
  add_into(g.dm_prev, matvec_transposed(params.w_cm, g.da_c));

  g.dx = matvec_transposed(params.w_ix, g.da_i);
  add_into(g.dx, matvec_transposed(params.w_fx, g.da_f));
  add_into(g.dx, matvec_transposed(params.w_ox, g.da_o));
  add_into(g.dx, matvec_transposed(params.w_cx, g.da_c));
  return g;
}

inline void accumulate_gate_grads(Gradients& grads, const StepGrads& g,
                                  const Vector& x, const Vector& m_prev) {
  accumulate_outer(grads.w_ix, g.da_i, x);
  accumulate_outer(grads.w_fx, g.da_f, x);
  accumulate_outer(grads.w_ox, g.da_o, x);
  accumulate_outer(grads.w_cx, g.da_c, x);
  accumulate_outer(grads.w_im, g.da_i, m_prev);
  accumulate_outer(grads.w_fm, g.da_f, m_prev);
  accumulate_outer(grads.w_om, g.da_o, m_prev);
  accumulate_outer(grads.w_cm, g.da_c, m_prev);
}

// Chain a gradient on a post-dropout input back to the pre-dropout input.
inline Vector undrop(const Vector& dx, const Vector& drop_scale) {
  if (drop_scale.empty()) return dx;
  Vector out(dx.size());
  for (std::size_t j = 0; j < dx.size(); ++j) out[j] = dx[j] * drop_scale[j];
  return out;
}

}  // namespace detail

// Exact gradient of the sentence loss  L = -sum_t log p_t(tokens[t])  with
// respect to every parameter matrix, by backpropagation through the unrolled
// steps. Weights are shared across time, so contributions accumulate.
inline Gradients backward_sequence(const ForwardTrace& trace,
                                   const std::vector<int>& tokens,
                                   const Parameters& params) {
  if (trace.tokens != tokens) {
    throw InconsistentTraceError("trace was built from a different token sequence");
  }
  const Dims& d = params.dims;
  if (trace.word_steps.size() != tokens.size() - 1 ||
      static_cast<int>(trace.image_step.c.size()) != d.hidden_dim) {
    throw InconsistentTraceError("trace does not match model dims");
  }

  Gradients grads = Gradients::zeros(d);
  Vector dm(d.hidden_dim, 0.0);
  Vector dc(d.hidden_dim, 0.0);

  for (int t = static_cast<int>(trace.word_steps.size()) - 1; t >= 0; --t) {
    const StepRecord& rec = trace.word_steps[t];
    const StepRecord& prev_rec = t > 0 ? trace.word_steps[t - 1] : trace.image_step;

    // Softmax cross-entropy: d logits = p - onehot(target).
    Vector dlogits = rec.p;
    dlogits[tokens[t + 1]] -= 1.0;
    accumulate_outer(grads.w_d, dlogits, rec.m);
    const Vector dm_logits = matvec_transposed(params.w_d, dlogits);
    for (int j = 0; j < d.hidden_dim; ++j) dm[j] += dm_logits[j];

    detail::StepGrads g = detail::backprop_step(rec, prev_rec.c, dm, dc, params);
    detail::accumulate_gate_grads(grads, g, rec.x, prev_rec.m);

    const Vector d_embed = detail::undrop(g.dx, rec.drop_scale);
    const int token = tokens[t];
    for (int j = 0; j < d.embed_dim; ++j) grads.w_e(j, token) += d_embed[j];

    dm = std::move(g.dm_prev);
    dc = std::move(g.dc_prev);
  }

  // The image step: previous state is zero, so the m-side weights get no
  // contribution here and the input gradient lands on the encoder.
  const Vector zero(d.hidden_dim, 0.0);
  detail::StepGrads g = detail::backprop_step(trace.image_step, zero, dm, dc, params);
  detail::accumulate_gate_grads(grads, g, trace.image_step.x, zero);
  const Vector d_encoded = detail::undrop(g.dx, trace.image_step.drop_scale);
  accumulate_outer(grads.w_enc, d_encoded, trace.features);

  return grads;
}

}  // namespace capgen
