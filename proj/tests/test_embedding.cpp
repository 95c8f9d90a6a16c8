// capgen/tests/test_embedding.cpp
//
// Cosine geometry and nearest-neighbor lookups over embedding columns.

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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "support/oracles.hpp"

using namespace capgen;
using namespace capgen_test;

namespace {

// Vocabulary {a..e} as ids 3..7 plus the sentinels, embed dim 2, with a
// hand-chosen embedding column per token.
struct Fixture {
  Vocabulary vocab;
  Parameters params;

  Fixture() {
    vocab = build_vocab({{"a", "b", "c", "d", "e"}}, 1);
    Dims dims;
    dims.feature_dim = 2;
    dims.embed_dim = 2;
    dims.hidden_dim = 2;
    dims.vocab_size = vocab.size();
    params = Parameters::zeros(dims);
    set("a", 1.0, 0.0);
    set("b", 2.0, 0.0);   // same direction as a
    set("c", 0.9, 0.1);
    set("d", 0.0, 1.0);   // orthogonal to a
    set("e", -1.0, 0.0);  // opposite to a
    // Sentinel columns deliberately share a's direction: they must still
    // never appear among the neighbors.
    for (int id = 0; id < 3; ++id) {
      params.w_e(0, id) = 1.0;
      params.w_e(1, id) = 0.0;
    }
  }

  void set(const std::string& word, double x, double y) {
    const int id = vocab.id_of(word);
    params.w_e(0, id) = x;
    params.w_e(1, id) = y;
  }
};

}  // namespace

TEST_CASE("cosine_similarity") {
  CHECK(std::fabs(cosine_similarity({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) - 1.0) < 1e-12);
  CHECK(cosine_similarity({1.0, 0.0}, {0.0, 1.0}) == 0.0);
  CHECK(std::fabs(cosine_similarity({2.0, -1.0}, {-2.0, 1.0}) + 1.0) < 1e-12);

  SECTION("scale invariance") {
    RngState rng{201, 0};
    for (int trial = 0; trial < 20; ++trial) {
      const Vector a = random_features(4, rng);
      const Vector b = random_features(4, rng);
      Vector a2 = a, b3 = b;
      for (double& v : a2) v *= 2.0;
      for (double& v : b3) v *= 3.0;
      REQUIRE(std::fabs(cosine_similarity(a2, b3) - cosine_similarity(a, b)) < 1e-12);
    }
  }

  SECTION("symmetry") {
    RngState rng{203, 0};
    for (int trial = 0; trial < 20; ++trial) {
      const Vector a = random_features(5, rng);
      const Vector b = random_features(5, rng);
      REQUIRE(cosine_similarity(a, b) == cosine_similarity(b, a));
    }
  }

  SECTION("bounded by one") {
    RngState rng{207, 0};
    for (int trial = 0; trial < 50; ++trial) {
      const double sim =
          cosine_similarity(random_features(6, rng), random_features(6, rng));
      REQUIRE(sim <= 1.0 + 1e-12);
      REQUIRE(sim >= -1.0 - 1e-12);
    }
  }

  CHECK_THROWS_AS(cosine_similarity({0.0, 0.0}, {1.0, 0.0}), DegenerateEmbeddingError);
  CHECK_THROWS_AS(cosine_similarity({1.0, 0.0}, {0.0, 0.0}), DegenerateEmbeddingError);
  CHECK_THROWS_AS(dot(Vector{1.0}, Vector{1.0, 2.0}), ShapeError);
}

TEST_CASE("nearest_neighbors ranks by similarity") {
  const Fixture fix;
  const NeighborReport report = nearest_neighbors("a", 4, fix.params, fix.vocab);
  REQUIRE(report.query == "a");
  REQUIRE(report.neighbors.size() == 4);
  // b shares a's direction exactly and precedes c; d is orthogonal; e is
  // anti-aligned and comes last.
  CHECK(report.neighbors[0].first == "b");
  CHECK(std::fabs(report.neighbors[0].second - 1.0) < 1e-12);
  CHECK(report.neighbors[1].first == "c");
  CHECK(report.neighbors[2].first == "d");
  CHECK(std::fabs(report.neighbors[2].second) < 1e-12);
  CHECK(report.neighbors[3].first == "e");
  CHECK(std::fabs(report.neighbors[3].second + 1.0) < 1e-12);

  const NeighborReport top1 = nearest_neighbors("a", 1, fix.params, fix.vocab);
  REQUIRE(top1.neighbors.size() == 1);
  CHECK(top1.neighbors[0].first == "b");
}

TEST_CASE("neighbor ties break toward the smaller token id") {
  Fixture fix;
  fix.set("b", 3.0, 0.0);
  fix.set("c", 5.0, 0.0);  // b and c now both have similarity 1 with a
  const NeighborReport report = nearest_neighbors("a", 2, fix.params, fix.vocab);
  CHECK(report.neighbors[0].first == "b");
  CHECK(report.neighbors[1].first == "c");
}

TEST_CASE("reserved tokens never appear as neighbors") {
  const Fixture fix;
  const NeighborReport report = nearest_neighbors("a", 4, fix.params, fix.vocab);
  for (const auto& [word, sim] : report.neighbors) {
    REQUIRE(word != kStartToken);
    REQUIRE(word != kStopToken);
    REQUIRE(word != kUnkToken);
  }
}

TEST_CASE("nearest_neighbors validation") {
  const Fixture fix;
  CHECK_THROWS_AS(nearest_neighbors("zzz", 2, fix.params, fix.vocab),
                  InvalidTokenError);
  CHECK_THROWS_AS(nearest_neighbors("a", 0, fix.params, fix.vocab),
                  InvalidConfigError);
  CHECK_THROWS_AS(nearest_neighbors("a", fix.vocab.size(), fix.params, fix.vocab),
                  InvalidConfigError);

  RngState rng{1, 0};
  const Parameters other = init_parameters(Dims{2, 2, 2, 4}, 0.1, rng);
  CHECK_THROWS_AS(nearest_neighbors("a", 2, other, fix.vocab), ShapeError);
}

TEST_CASE("zero-norm embeddings are reported with the offending token") {
  Fixture fix;
  fix.set("d", 0.0, 0.0);
  try {
    nearest_neighbors("a", 2, fix.params, fix.vocab);
    FAIL("expected DegenerateEmbeddingError");
  } catch (const DegenerateEmbeddingError& e) {
    CHECK(std::string(e.what()).find("'d'") != std::string::npos);
  }

  fix.set("d", 0.0, 1.0);
  fix.set("a", 0.0, 0.0);
  try {
    nearest_neighbors("a", 2, fix.params, fix.vocab);
    FAIL("expected DegenerateEmbeddingError");
  } catch (const DegenerateEmbeddingError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
}
