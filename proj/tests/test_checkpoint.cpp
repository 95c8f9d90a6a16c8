// capgen/tests/test_checkpoint.cpp
//
// Binary checkpoint round trips and corruption handling.

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

#include <fstream>
#include <string>

#include "support/oracles.hpp"

using namespace capgen;
using namespace capgen_test;

namespace {

Parameters sample_params(std::uint64_t seed) {
  RngState rng{seed, 0};
  return init_parameters(Dims{3, 4, 5, 7}, 0.5, rng);
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  TempDir dir("ckpt");
  const Parameters params = sample_params(11);
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(params, 0xDEADBEEFCAFEF00DULL, path);

  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.params == params);  // bit-exact doubles
  CHECK(loaded.vocab_hash == 0xDEADBEEFCAFEF00DULL);
  CHECK(loaded.params.dims == params.dims);
}

TEST_CASE("checkpoint files are byte-identical across saves") {
  TempDir dir("ckpt-bytes");
  const Parameters params = sample_params(13);
  save_checkpoint(params, 42, dir.file("a.ckpt"));
  save_checkpoint(params, 42, dir.file("b.ckpt"));
  CHECK(slurp(dir.file("a.ckpt")) == slurp(dir.file("b.ckpt")));
}

TEST_CASE("vocabulary hash guard") {
  TempDir dir("ckpt-hash");
  const Parameters params = sample_params(17);
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(params, 1234, path);

  CHECK(load_checkpoint_checked(path, 1234) == params);
  CHECK_THROWS_AS(load_checkpoint_checked(path, 1235), InvalidInputError);
}

TEST_CASE("corrupted checkpoints raise parse errors") {
  TempDir dir("ckpt-bad");
  const Parameters params = sample_params(19);
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(params, 7, path);
  const std::string good = slurp(path);

  SECTION("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(dir.file("magic.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(dir.file("magic.ckpt")), ParseError);
  }

  SECTION("unsupported version") {
    std::string bad = good;
    bad[8] = 2;  // little-endian version field
    write_bytes(dir.file("version.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(dir.file("version.ckpt")), ParseError);
  }

  SECTION("zeroed dimension") {
    std::string bad = good;
    for (int i = 12; i < 16; ++i) bad[i] = 0;  // feature_dim = 0
    write_bytes(dir.file("dims.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(dir.file("dims.ckpt")), ParseError);
  }

  SECTION("inconsistent matrix header") {
    std::string bad = good;
    ++bad[36];  // first matrix's row count no longer matches the dims
    write_bytes(dir.file("shape.ckpt"), bad);
    CHECK_THROWS_AS(load_checkpoint(dir.file("shape.ckpt")), ParseError);
  }

  SECTION("truncation") {
    for (std::size_t keep : {4ul, 11ul, 30ul, good.size() / 2, good.size() - 1}) {
      write_bytes(dir.file("short.ckpt"), good.substr(0, keep));
      REQUIRE_THROWS_AS(load_checkpoint(dir.file("short.ckpt")), ParseError);
    }
  }

  SECTION("trailing bytes") {
    write_bytes(dir.file("long.ckpt"), good + "x");
    CHECK_THROWS_AS(load_checkpoint(dir.file("long.ckpt")), ParseError);
  }

  SECTION("empty file") {
    write_bytes(dir.file("empty.ckpt"), "");
    CHECK_THROWS_AS(load_checkpoint(dir.file("empty.ckpt")), ParseError);
  }

  CHECK_THROWS_AS(load_checkpoint(dir.file("never-written.ckpt")), InvalidInputError);
}
