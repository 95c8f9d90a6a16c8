// capgen/checkpoint.hpp
//
// Versioned binary model container.
//
// Layout, all integers little-endian:
//   bytes 0..7   magic "CAPGEN\0\1"
//   u32          format version (currently 1)
//   u32 x 4      feature_dim, embed_dim, hidden_dim, vocab_size
//   u64          FNV-1a hash of the vocabulary the model was trained against
//   11 matrices in the canonical parameter order (see WeightsT::for_each),
//   each as  u32 rows, u32 cols, rows*cols doubles (IEEE-754 binary64,
//   row-major).
//
// Loading verifies magic, version, dims, per-matrix shapes and byte count.
// The vocabulary hash binds checkpoint to vocabulary: callers that hold the
// vocabulary pass its hash and a mismatch is an error, because token ids
// would silently mean different words.

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

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "capgen/errors.hpp"
#include "capgen/model.hpp"

namespace capgen {

inline constexpr std::array<char, 8> kCheckpointMagic = {'C', 'A', 'P', 'G',
                                                         'E', 'N', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<unsigned char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ParseError("checkpoint truncated reading " + what);
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ParseError("checkpoint truncated reading " + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in, const std::string& what) {
  const std::uint64_t bits = get_u64(in, what);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace detail

struct Checkpoint {
  Parameters params;
  std::uint64_t vocab_hash = 0;
};

inline void save_checkpoint(const Parameters& params, std::uint64_t vocab_hash,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open file for writing: " + path);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(params.dims.feature_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(params.dims.embed_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(params.dims.hidden_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(params.dims.vocab_size));
  detail::put_u64(out, vocab_hash);
  params.for_each([&](const char*, const Matrix& m) {
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) detail::put_f64(out, v);
  });
  if (!out) throw InvalidInputError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open checkpoint file: " + path);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw ParseError("not a model checkpoint: " + path);
  }
  const std::uint32_t version = detail::get_u32(in, "version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  Dims dims;
  dims.feature_dim = static_cast<int>(detail::get_u32(in, "feature_dim"));
  dims.embed_dim = static_cast<int>(detail::get_u32(in, "embed_dim"));
  dims.hidden_dim = static_cast<int>(detail::get_u32(in, "hidden_dim"));
  dims.vocab_size = static_cast<int>(detail::get_u32(in, "vocab_size"));
  try {
    validate(dims);
  } catch (const InvalidConfigError& e) {
    throw ParseError(std::string("checkpoint holds invalid dims: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.vocab_hash = detail::get_u64(in, "vocab_hash");
  ckpt.params = Parameters::zeros(dims);
  ckpt.params.for_each([&](const char* name, Matrix& m) {
    const std::uint32_t rows = detail::get_u32(in, std::string(name) + " rows");
    const std::uint32_t cols = detail::get_u32(in, std::string(name) + " cols");
    if (rows != static_cast<std::uint32_t>(m.rows) ||
        cols != static_cast<std::uint32_t>(m.cols)) {
      throw ParseError(std::string("checkpoint shape mismatch for ") + name);
    }
    for (double& v : m.data) v = detail::get_f64(in, name);
  });
  char extra;
  if (in.read(&extra, 1)) {
    throw ParseError("trailing bytes after checkpoint payload: " + path);
  }
  return ckpt;
}

// Convenience wrapper for callers that already hold the vocabulary.
inline Parameters load_checkpoint_checked(const std::string& path,
                                          std::uint64_t expected_vocab_hash) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.vocab_hash != expected_vocab_hash) {
    throw InvalidInputError(
        "checkpoint was trained against a different vocabulary (hash mismatch)");
  }
  return std::move(ckpt.params);
}

}  // namespace capgen
