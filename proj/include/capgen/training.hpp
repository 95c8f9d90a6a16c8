// capgen/training.hpp
//
// Loss and the SGD loop: fixed learning rate, no momentum, batch size 1.
// Every (image, caption) pair is its own training example; an image with
// several reference captions contributes several pairs. Optional inverted
// dropout on the LSTM inputs and optional global-norm gradient clipping.
// Fully deterministic given the seed: parameter init, per-epoch shuffling
// and dropout masks all draw from one counter-based generator in a fixed
// order.

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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "capgen/data.hpp"
#include "capgen/errors.hpp"
#include "capgen/model.hpp"
#include "capgen/numerics.hpp"

namespace capgen {

struct TrainConfig {
  double learning_rate = 0.2;
  int epochs = 100;
  double dropout_rate = 0.0;
  std::optional<double> grad_clip;  // global-norm bound; disabled when absent
  std::uint64_t seed = 0;
  bool shuffle = true;
  double init_scale = 0.1;  // uniform [-scale, scale] parameter init
};

inline void validate(const TrainConfig& cfg) {
  // learning_rate 0 is allowed: it degenerates to repeated evaluation, which
  // the no-update determinism checks rely on.
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw InvalidConfigError("learning_rate must be finite and >= 0");
  }
  if (cfg.epochs < 1) throw InvalidConfigError("epochs must be >= 1");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw InvalidConfigError("dropout_rate must lie in [0, 1)");
  }
  if (cfg.grad_clip && !(*cfg.grad_clip > 0.0)) {
    throw InvalidConfigError("grad_clip must be positive when set");
  }
  if (cfg.init_scale < 0.0 || !std::isfinite(cfg.init_scale)) {
    throw InvalidConfigError("init_scale must be finite and nonnegative");
  }
}

struct TrainReport {
  std::vector<double> epoch_mean_loss;  // mean loss per predicted word
  Parameters params;
  double wall_seconds = 0.0;
};

// -sum_t log p_t(target_t), the negative log-likelihood of the sentence
// under the already-computed forward pass. Nonnegative because every
// probability is <= 1.
inline double caption_loss(const ForwardTrace& trace, const std::vector<int>& tokens) {
  if (trace.tokens != tokens ||
      trace.word_steps.size() + 1 != tokens.size()) {
    throw InconsistentTraceError("trace does not match the token sequence");
  }
  double loss = 0.0;
  for (int t = 0; t < trace.num_predictions(); ++t) {
    loss -= std::log(trace.word_steps[t].p[tokens[t + 1]]);
  }
  return loss;
}

// Standalone inverted dropout: entries zeroed with probability rate,
// survivors scaled by 1/(1-rate) so the expectation is unchanged.
inline Vector apply_dropout(const Vector& x, double rate, RngState& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw InvalidConfigError("dropout rate must lie in [0, 1)");
  }
  if (rate == 0.0) return x;
  Vector out(x.size());
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = rng.next_double() < rate ? 0.0 : x[i] * keep;
  }
  return out;
}

inline double global_grad_norm(const Gradients& grads) {
  double sq = 0.0;
  grads.for_each([&](const char*, const Matrix& m) {
    for (double v : m.data) sq += v * v;
  });
  return std::sqrt(sq);
}

// Scales all gradients by max_norm / ||g|| when the global norm exceeds the
// bound; otherwise leaves them untouched.
inline void clip_gradients(Gradients& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw InvalidConfigError("clip norm must be positive");
  const double norm = global_grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  grads.for_each([&](const char*, Matrix& m) {
    for (double& v : m.data) v *= scale;
  });
}

// w <- w - lr * g on every entry.
inline void sgd_step(Parameters& params, const Gradients& grads, double lr) {
  if (params.dims != grads.dims) {
    throw ShapeError("sgd_step: parameter and gradient dims differ");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw InvalidConfigError("learning rate must be finite and >= 0");
  }
  const Matrix* g[11];
  int slot = 0;
  grads.for_each([&](const char*, const Matrix& m) { g[slot++] = &m; });
  slot = 0;
  params.for_each([&](const char* name, Matrix& m) {
    const Matrix& gm = *g[slot++];
    if (m.rows != gm.rows || m.cols != gm.cols) {
      throw ShapeError(std::string("sgd_step: shape mismatch for ") + name);
    }
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] -= lr * gm.data[i];
  });
}

// One encoded training pair.
struct TrainExample {
  const Vector* features;
  std::vector<int> tokens;  // [START, ..., STOP]
};

namespace detail {

inline std::vector<TrainExample> make_examples(const CaptionDataset& dataset,
                                               const Vocabulary& vocab) {
  std::vector<TrainExample> examples;
  for (const CaptionRecord& rec : dataset.records) {
    for (const std::string& caption : rec.captions) {
      examples.push_back(TrainExample{&rec.features, encode(tokenize(caption), vocab)});
    }
  }
  return examples;
}

}  // namespace detail

// Full training run. Logs one `epoch<TAB>mean-loss` line per epoch to *log
// when a stream is given. The reported per-epoch loss is the training loss
// observed during the epoch (before each step's update), averaged per
// predicted word.
inline TrainReport train(const CaptionDataset& dataset, const Vocabulary& vocab,
                         const Dims& dims, const TrainConfig& config,
                         std::ostream* log = nullptr) {
  validate(config);
  validate(dims);
  if (dataset.records.empty()) throw InvalidInputError("train: empty dataset");
  if (dims.feature_dim != dataset.feature_dim) {
    throw ShapeError("train: model feature dim " + std::to_string(dims.feature_dim) +
                     " != dataset feature dim " + std::to_string(dataset.feature_dim));
  }
  if (dims.vocab_size != vocab.size()) {
    throw ShapeError("train: model vocab size " + std::to_string(dims.vocab_size) +
                     " != vocabulary size " + std::to_string(vocab.size()));
  }

  const auto start = std::chrono::steady_clock::now();
  RngState rng{config.seed, 0};
  TrainReport report;
  report.params = init_parameters(dims, config.init_scale, rng);

  std::vector<TrainExample> examples = detail::make_examples(dataset, vocab);
  std::vector<int> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
            rng.next_below(static_cast<std::uint64_t>(order.size() - i)));
        std::swap(order[i], order[j]);
      }
    }
    double epoch_loss = 0.0;
    long long epoch_words = 0;
    for (int idx : order) {
      const TrainExample& ex = examples[idx];
      ForwardTrace trace =
          config.dropout_rate > 0.0
              ? forward_sequence_dropout(*ex.features, ex.tokens, report.params,
                                         config.dropout_rate, rng)
              : forward_sequence(*ex.features, ex.tokens, report.params);
      const double loss = caption_loss(trace, ex.tokens);
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;
      epoch_words += trace.num_predictions();

      Gradients grads = backward_sequence(trace, ex.tokens, report.params);
      if (config.grad_clip) clip_gradients(grads, *config.grad_clip);
      sgd_step(report.params, grads, config.learning_rate);
    }
    const double mean_loss = epoch_loss / static_cast<double>(epoch_words);
    if (!std::isfinite(mean_loss)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
    }
    report.epoch_mean_loss.push_back(mean_loss);
    if (log) {
      *log << epoch << '\t' << std::setprecision(12) << mean_loss << '\n';
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// Mean loss per predicted word over a whole dataset, without updating
// anything. Used for perplexity reports.
inline std::pair<double, long long> corpus_log_prob(const CaptionDataset& dataset,
                                                    const Vocabulary& vocab,
                                                    const Parameters& params) {
  if (dataset.records.empty()) throw InvalidInputError("empty dataset");
  double total_log_prob = 0.0;
  long long words = 0;
  for (const CaptionRecord& rec : dataset.records) {
    for (const std::string& caption : rec.captions) {
      const std::vector<int> tokens = encode(tokenize(caption), vocab);
      total_log_prob += sequence_log_prob(rec.features, tokens, params);
      words += static_cast<long long>(tokens.size()) - 1;
    }
  }
  return {total_log_prob, words};
}

}  // namespace capgen
