// capgen/embedding.hpp
//
// Nearest-neighbor queries over the learned word-embedding space (the
// columns of w_e), by cosine similarity. Cosine rather than Euclidean
// distance: it is scale-invariant, and embedding norms absorb arbitrary
// scale during training.

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
#include <string>
#include <utility>
#include <vector>

#include "capgen/data.hpp"
#include "capgen/errors.hpp"
#include "capgen/model.hpp"

namespace capgen {

struct NeighborReport {
  std::string query;
  std::vector<std::pair<std::string, double>> neighbors;  // similarity desc
};

inline double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateEmbeddingError("cosine of a zero-norm vector");
  }
  return dot(a, b) / (na * nb);
}

// Top-k non-reserved vocabulary tokens closest to `word` in embedding
// space; the query itself is excluded, ties break by token id.
inline NeighborReport nearest_neighbors(const std::string& word, int k,
                                        const Parameters& params,
                                        const Vocabulary& vocab) {
  const auto it = vocab.token_to_id.find(word);
  if (it == vocab.token_to_id.end()) {
    throw InvalidTokenError("word not in vocabulary: " + word);
  }
  if (vocab.size() != params.dims.vocab_size) {
    throw ShapeError("vocabulary size does not match the model");
  }
  if (k < 1 || k >= vocab.size()) {
    throw InvalidConfigError("k must satisfy 1 <= k < vocab size");
  }
  const int query_id = it->second;
  const Vector query_vec = embed_word(query_id, params);
  if (std::sqrt(dot(query_vec, query_vec)) == 0.0) {
    throw DegenerateEmbeddingError("zero-norm embedding for token '" + word + "'");
  }

  std::vector<std::pair<double, int>> scored;  // (similarity, id)
  for (int id = 3; id < vocab.size(); ++id) {
    if (id == query_id) continue;
    const Vector v = embed_word(id, params);
    if (std::sqrt(dot(v, v)) == 0.0) {
      throw DegenerateEmbeddingError("zero-norm embedding for token '" +
                                     vocab.token_of(id) + "'");
    }
    scored.emplace_back(cosine_similarity(query_vec, v), id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (static_cast<int>(scored.size()) > k) scored.resize(k);

  NeighborReport report;
  report.query = word;
  for (const auto& [sim, id] : scored) {
    report.neighbors.emplace_back(vocab.token_of(id), sim);
  }
  return report;
}

}  // namespace capgen
