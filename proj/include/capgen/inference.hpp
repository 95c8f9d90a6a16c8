// capgen/inference.hpp
//
// Caption generation from trained parameters: greedy argmax decoding,
// stochastic sampling, and beam search over accumulated log-probability.
// All three work over an ensemble of same-vocabulary models by averaging
// the per-step word distributions; a single model is the one-element case.
//
// Beam search, per step: every vocabulary continuation of every live
// hypothesis is scored by accumulated log-probability, the best k survive
// (ties broken by lexicographic token-id order), survivors that just
// emitted the stop token retire into a completed pool and are never
// extended, and survivors still alive at max_len generated tokens retire
// as truncated. The final result is the best k of the pool under the same
// ordering. With k queues wider than the candidate set nothing is ever
// pruned, so the result equals exhaustive enumeration; with k = 1 each
// step keeps exactly the argmax continuation, which is greedy decoding.

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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "capgen/errors.hpp"
#include "capgen/model.hpp"
#include "capgen/numerics.hpp"

namespace capgen {

enum class DecodeMode { beam, greedy, sample };

struct DecodeConfig {
  int beam_width = 20;
  int max_len = 30;  // maximum generated tokens after the start sentinel
  DecodeMode mode = DecodeMode::beam;
  std::uint64_t seed = 0;
};

inline void validate(const DecodeConfig& cfg) {
  if (cfg.beam_width < 1) throw InvalidConfigError("beam width must be >= 1");
  if (cfg.max_len < 1) throw InvalidConfigError("max_len must be >= 1");
}

struct BeamHypothesis {
  std::vector<int> tokens;  // starts with the START sentinel
  double log_prob = 0.0;
  std::vector<LstmState> states;  // one per ensemble member, post last token
  bool finished = false;
};

using ModelRefs = std::vector<const Parameters*>;

// Arithmetic mean of normalized distributions; the ensemble combination
// rule. Stays a distribution by convexity.
inline Vector ensemble_distribution(const std::vector<Vector>& dists) {
  if (dists.empty()) throw InvalidInputError("ensemble of zero distributions");
  const std::size_t dim = dists[0].size();
  Vector mean(dim, 0.0);
  for (const Vector& d : dists) {
    if (d.size() != dim) throw ShapeError("ensemble distributions disagree on dim");
    double sum = 0.0;
    for (double v : d) {
      if (v < 0.0) throw InvalidInputError("distribution has a negative entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw InvalidInputError("distribution does not sum to 1");
    }
    for (std::size_t i = 0; i < dim; ++i) mean[i] += d[i];
  }
  const double inv = 1.0 / static_cast<double>(dists.size());
  for (double& v : mean) v *= inv;
  return mean;
}

namespace detail {

inline void check_ensemble(const ModelRefs& models) {
  if (models.empty()) throw InvalidInputError("decoding needs at least one model");
  for (const Parameters* p : models) {
    if (p == nullptr) throw InvalidInputError("null model in ensemble");
    if (p->dims.vocab_size != models[0]->dims.vocab_size ||
        p->dims.feature_dim != models[0]->dims.feature_dim) {
      throw ShapeError("ensemble members disagree on vocab or feature dim");
    }
  }
}

// States after the image step (the only time the image is fed).
inline std::vector<LstmState> start_states(const Vector& features,
                                           const ModelRefs& models) {
  std::vector<LstmState> states;
  states.reserve(models.size());
  for (const Parameters* p : models) {
    states.push_back(lstm_step(encode_image(features, *p),
                               initial_state(p->dims.hidden_dim), *p));
  }
  return states;
}

inline std::vector<LstmState> advance_states(const std::vector<LstmState>& states,
                                             int token, const ModelRefs& models) {
  std::vector<LstmState> next;
  next.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    next.push_back(lstm_step(embed_word(token, *models[i]), states[i], *models[i]));
  }
  return next;
}

inline Vector step_distribution(const std::vector<LstmState>& states,
                                const ModelRefs& models) {
  if (models.size() == 1) return word_distribution(states[0], *models[0]);
  std::vector<Vector> dists;
  dists.reserve(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    dists.push_back(word_distribution(states[i], *models[i]));
  }
  return ensemble_distribution(dists);
}

// One proposed extension: live hypothesis `parent` continued by `token`.
struct Candidate {
  int parent;
  int token;
  double score;
};

// Orders by score descending, then by the full extended token sequence
// ascending. The extended sequences share nothing but their parents'
// prefixes, so compare those first and the new token last.
inline bool candidate_before(const Candidate& a, const Candidate& b,
                             const std::vector<BeamHypothesis>& live) {
  if (a.score != b.score) return a.score > b.score;
  const std::vector<int>& ta = live[a.parent].tokens;
  const std::vector<int>& tb = live[b.parent].tokens;
  const std::size_t common = std::min(ta.size(), tb.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (ta[i] != tb[i]) return ta[i] < tb[i];
  }
  // Equal-score candidates always have equal-length parents (same step),
  // but stay total anyway for safety.
  if (ta.size() != tb.size()) return ta.size() < tb.size();
  return a.token < b.token;
}

inline bool hypothesis_before(const BeamHypothesis& a, const BeamHypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace detail

// Returns up to beam_width finished hypotheses, best first. A hypothesis
// finishes by emitting STOP or by reaching max_len generated tokens.
inline std::vector<BeamHypothesis> beam_search(const Vector& features,
                                               const ModelRefs& models,
                                               const DecodeConfig& config) {
  validate(config);
  detail::check_ensemble(models);
  const int vocab = models[0]->dims.vocab_size;
  const int k = config.beam_width;

  std::vector<BeamHypothesis> live;
  live.push_back(BeamHypothesis{{kStartId},
                                0.0,
                                detail::advance_states(
                                    detail::start_states(features, models),
                                    kStartId, models),
                                false});
  std::vector<BeamHypothesis> completed;

  for (int step = 0; step < config.max_len && !live.empty(); ++step) {
    std::vector<Vector> dists;
    dists.reserve(live.size());
    for (const BeamHypothesis& hyp : live) {
      dists.push_back(detail::step_distribution(hyp.states, models));
    }
    std::vector<detail::Candidate> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(vocab));
    for (int h = 0; h < static_cast<int>(live.size()); ++h) {
      for (int w = 0; w < vocab; ++w) {
        candidates.push_back(
            detail::Candidate{h, w, live[h].log_prob + std::log(dists[h][w])});
      }
    }
    const std::size_t keep = std::min<std::size_t>(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(),
                      [&](const detail::Candidate& a, const detail::Candidate& b) {
                        return detail::candidate_before(a, b, live);
                      });
    candidates.resize(keep);

    std::vector<BeamHypothesis> next_live;
    const bool last_step = step + 1 == config.max_len;
    for (const detail::Candidate& cand : candidates) {
      const BeamHypothesis& parent = live[cand.parent];
      BeamHypothesis hyp;
      hyp.tokens = parent.tokens;
      hyp.tokens.push_back(cand.token);
      hyp.log_prob = cand.score;
      if (cand.token == kStopId) {
        hyp.states = parent.states;  // STOP is never fed back in
        hyp.finished = true;
        completed.push_back(std::move(hyp));
      } else if (last_step) {
        hyp.states = parent.states;
        hyp.finished = true;  // truncated at max_len
        completed.push_back(std::move(hyp));
      } else {
        hyp.states = detail::advance_states(parent.states, cand.token, models);
        next_live.push_back(std::move(hyp));
      }
    }
    live = std::move(next_live);
  }

  std::sort(completed.begin(), completed.end(), detail::hypothesis_before);
  if (completed.size() > static_cast<std::size_t>(k)) completed.resize(k);
  return completed;
}

inline std::vector<BeamHypothesis> beam_search(const Vector& features,
                                               const Parameters& params,
                                               const DecodeConfig& config) {
  return beam_search(features, ModelRefs{&params}, config);
}

// Argmax decoding; ties go to the smallest token id, matching the beam
// search tie rule so that beam width 1 and greedy agree exactly.
inline std::vector<int> greedy_caption(const Vector& features,
                                       const ModelRefs& models, int max_len) {
  if (max_len < 1) throw InvalidConfigError("max_len must be >= 1");
  detail::check_ensemble(models);
  std::vector<LstmState> states = detail::advance_states(
      detail::start_states(features, models), kStartId, models);
  std::vector<int> tokens{kStartId};
  for (int step = 0; step < max_len; ++step) {
    const Vector dist = detail::step_distribution(states, models);
    const int w = static_cast<int>(
        std::max_element(dist.begin(), dist.end()) - dist.begin());
    tokens.push_back(w);
    if (w == kStopId) break;
    if (step + 1 < max_len) states = detail::advance_states(states, w, models);
  }
  return tokens;
}

inline std::vector<int> greedy_caption(const Vector& features,
                                       const Parameters& params, int max_len) {
  return greedy_caption(features, ModelRefs{&params}, max_len);
}

// Ancestral sampling: draw each word from the step distribution until STOP
// or max_len generated tokens. Deterministic per generator state.
inline std::vector<int> sample_caption(const Vector& features,
                                       const ModelRefs& models, int max_len,
                                       RngState& rng) {
  if (max_len < 1) throw InvalidConfigError("max_len must be >= 1");
  detail::check_ensemble(models);
  std::vector<LstmState> states = detail::advance_states(
      detail::start_states(features, models), kStartId, models);
  std::vector<int> tokens{kStartId};
  for (int step = 0; step < max_len; ++step) {
    const Vector dist = detail::step_distribution(states, models);
    const int w = sample_categorical(dist, rng);
    tokens.push_back(w);
    if (w == kStopId) break;
    if (step + 1 < max_len) states = detail::advance_states(states, w, models);
  }
  return tokens;
}

inline std::vector<int> sample_caption(const Vector& features,
                                       const Parameters& params, int max_len,
                                       RngState& rng) {
  return sample_caption(features, ModelRefs{&params}, max_len, rng);
}

}  // namespace capgen
