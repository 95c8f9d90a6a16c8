// capgen/tests/support/oracles.hpp
//
// Independent reference implementations the tests check the library
// against: central finite differences for gradients, a straight-line
// scalar forward pass, and an exhaustive decode enumerator. Plus process
// and tempdir helpers for driving the CLI binary.

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

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "capgen/capgen.hpp"

namespace capgen_test {

using namespace capgen;

// ------------------------------------------------------------ instances --

inline Vector random_features(int dim, RngState& rng) {
  Vector f(dim);
  for (double& v : f) v = rng.next_uniform(-1.0, 1.0);
  return f;
}

// [START, w..., STOP] with interior ids drawn from the non-sentinel range.
inline std::vector<int> random_sentence(int words, int vocab_size, RngState& rng) {
  std::vector<int> tokens{kStartId};
  for (int i = 0; i < words; ++i) {
    tokens.push_back(3 + static_cast<int>(rng.next_below(
        static_cast<std::uint64_t>(vocab_size - 3))));
  }
  tokens.push_back(kStopId);
  return tokens;
}

// ----------------------------------------------- finite-difference oracle --

// Central finite differences of the sentence loss with respect to every
// parameter entry. Slow and exact up to O(eps^2); the ground truth for
// backward_sequence.
inline Gradients fd_gradients(const Vector& features, const std::vector<int>& tokens,
                              const Parameters& params, double eps = 1e-5) {
  Gradients fd = Gradients::zeros(params.dims);
  Parameters work = params;
  Matrix* fd_mats[11];
  int slot = 0;
  fd.for_each([&](const char*, Matrix& m) { fd_mats[slot++] = &m; });
  slot = 0;
  work.for_each([&](const char*, Matrix& m) {
    Matrix& out = *fd_mats[slot++];
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      const double saved = m.data[i];
      m.data[i] = saved + eps;
      const double loss_plus = caption_loss(forward_sequence(features, tokens, work), tokens);
      m.data[i] = saved - eps;
      const double loss_minus = caption_loss(forward_sequence(features, tokens, work), tokens);
      m.data[i] = saved;
      out.data[i] = (loss_plus - loss_minus) / (2.0 * eps);
    }
  });
  return fd;
}

// Largest relative error between analytic and finite-difference gradients,
// with an absolute floor so near-zero entries do not blow up the ratio.
inline double max_relative_error(const Gradients& analytic, const Gradients& fd,
                                 double floor = 1e-6) {
  const Matrix* a_mats[11];
  const Matrix* f_mats[11];
  int slot = 0;
  analytic.for_each([&](const char*, const Matrix& m) { a_mats[slot++] = &m; });
  slot = 0;
  fd.for_each([&](const char*, const Matrix& m) { f_mats[slot++] = &m; });
  double worst = 0.0;
  for (int k = 0; k < 11; ++k) {
    for (std::size_t i = 0; i < a_mats[k]->data.size(); ++i) {
      const double a = a_mats[k]->data[i];
      const double f = f_mats[k]->data[i];
      const double denom = std::max({std::fabs(a), std::fabs(f), floor});
      worst = std::max(worst, std::fabs(a - f) / denom);
    }
  }
  return worst;
}

// --------------------------------------------------- scalar forward oracle --

// Straight-line scalar re-derivation of the unrolled forward pass: explicit
// index arithmetic, no shared linear-algebra helpers. Returns the summed
// log-probability of the sentence.
inline double scalar_sequence_log_prob(const Vector& features,
                                       const std::vector<int>& tokens,
                                       const Parameters& P) {
  const int E = P.dims.embed_dim;
  const int H = P.dims.hidden_dim;
  const int V = P.dims.vocab_size;
  const int F = P.dims.feature_dim;

  std::vector<double> c(H, 0.0), m(H, 0.0);

  auto step = [&](const std::vector<double>& x) {
    std::vector<double> c_new(H), m_new(H);
    for (int j = 0; j < H; ++j) {
      double ai = 0.0, af = 0.0, ao = 0.0, ag = 0.0;
      for (int e = 0; e < E; ++e) {
        ai += P.w_ix.data[j * E + e] * x[e];
        af += P.w_fx.data[j * E + e] * x[e];
        ao += P.w_ox.data[j * E + e] * x[e];
        ag += P.w_cx.data[j * E + e] * x[e];
      }
      for (int h = 0; h < H; ++h) {
        ai += P.w_im.data[j * H + h] * m[h];
        af += P.w_fm.data[j * H + h] * m[h];
        ao += P.w_om.data[j * H + h] * m[h];
        ag += P.w_cm.data[j * H + h] * m[h];
      }
      const double gi = 1.0 / (1.0 + std::exp(-ai));
      const double gf = 1.0 / (1.0 + std::exp(-af));
      const double go = 1.0 / (1.0 + std::exp(-ao));
      const double gg = std::tanh(ag);
      c_new[j] = gf * c[j] + gi * gg;
      m_new[j] = go * c_new[j];
    }
    c = c_new;
    m = m_new;
  };

  std::vector<double> x(E);
  for (int e = 0; e < E; ++e) {
    double acc = 0.0;
    for (int f = 0; f < F; ++f) acc += P.w_enc.data[e * F + f] * features[f];
    x[e] = acc;
  }
  step(x);

  double log_prob = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    for (int e = 0; e < E; ++e) x[e] = P.w_e.data[e * V + tokens[t]];
    step(x);
    std::vector<double> logits(V);
    double max_logit = -1e300;
    for (int v = 0; v < V; ++v) {
      double acc = 0.0;
      for (int h = 0; h < H; ++h) acc += P.w_d.data[v * H + h] * m[h];
      logits[v] = acc;
      max_logit = std::max(max_logit, acc);
    }
    double z = 0.0;
    for (int v = 0; v < V; ++v) z += std::exp(logits[v] - max_logit);
    log_prob += (logits[tokens[t + 1]] - max_logit) - std::log(z);
  }
  return log_prob;
}

// ------------------------------------------------- exhaustive decode oracle --

struct ScoredSequence {
  std::vector<int> tokens;
  double log_prob;
};

namespace detail {

inline void enumerate_from(const LstmState& state, std::vector<int>& tokens,
                           double log_prob, int generated, int max_len,
                           const Parameters& params,
                           std::vector<ScoredSequence>& out) {
  const Vector dist = word_distribution(state, params);
  for (int w = 0; w < params.dims.vocab_size; ++w) {
    tokens.push_back(w);
    const double lp = log_prob + std::log(dist[w]);
    if (w == kStopId || generated + 1 == max_len) {
      out.push_back(ScoredSequence{tokens, lp});
    } else {
      const LstmState next = lstm_step(embed_word(w, params), state, params);
      enumerate_from(next, tokens, lp, generated + 1, max_len, params, out);
    }
    tokens.pop_back();
  }
}

}  // namespace detail

// Every sequence the decoder could finish: [START, ...] continued until STOP
// or max_len generated tokens, scored by accumulated log-probability, best
// first (ties by lexicographic token order). Exponential in max_len; only
// for tiny vocabularies.
inline std::vector<ScoredSequence> enumerate_decodes(const Vector& features,
                                                     const Parameters& params,
                                                     int max_len) {
  std::vector<ScoredSequence> out;
  const LstmState after_image = lstm_step(
      encode_image(features, params), initial_state(params.dims.hidden_dim), params);
  const LstmState after_start =
      lstm_step(embed_word(kStartId, params), after_image, params);
  std::vector<int> tokens{kStartId};
  detail::enumerate_from(after_start, tokens, 0.0, 0, max_len, params, out);
  std::sort(out.begin(), out.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return out;
}

// ------------------------------------------------------- process helpers --

// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t nonce = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("capgen-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(nonce++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

// Runs the built CLI binary with the given argument string. Arguments are
// passed through the shell; paths used in tests contain no spaces.
inline CliResult run_cli(const std::string& args, const TempDir& dir) {
#ifndef CAPGEN_CLI_PATH
#error "CAPGEN_CLI_PATH must name the CLI binary"
#endif
  const std::string out_file = dir.file("cli-stdout.txt");
  const std::string err_file = dir.file("cli-stderr.txt");
  const std::string command = std::string(CAPGEN_CLI_PATH) + " " + args + " >" +
                              out_file + " 2>" + err_file;
  const int raw = std::system(command.c_str());
  CliResult result;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  if (raw == -1) {
    result.status = -1;
  } else {
    result.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  }
  return result;
}

}  // namespace capgen_test
