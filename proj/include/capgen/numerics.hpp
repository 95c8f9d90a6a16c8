// capgen/numerics.hpp

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

namespace capgen {

// All real arithmetic is 64-bit floating point.
using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols entries, row-major

  Matrix() = default;

  Matrix(int r, int c) : rows(r), cols(c) {
    if (r <= 0 || c <= 0) {
      throw InvalidInputError("matrix dimensions must be positive, got " +
                              std::to_string(r) + "x" + std::to_string(c));
    }
    data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0);
  }

  double& operator()(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool operator==(const Matrix& other) const = default;
};

// Deterministic counter-based generator. The stream is fixed bit-exactly so
// two runs (or two implementations) with the same seed draw the same values:
//
//   draw n (1-based):
//     z  = seed + n * 0x9E3779B97F4A7C15
//     z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//     z ^= z >> 27;  z *= 0x94D049BB133111EB
//     u64 output = z ^ (z >> 31)
//
// (the splitmix64 finalizer over a Weyl sequence). Doubles take the top 53
// bits: next_double() = (u64 >> 11) * 2^-53, uniform on [0, 1).
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  std::uint64_t next_u64() {
    ++counter;
    std::uint64_t z = seed + counter * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, bound), bias-free by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw InvalidInputError("next_below: bound must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }
};

enum class Activation { sigmoid, tanh };

inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Elementwise sigmoid or tanh. Rejects non-finite inputs.
inline Vector activate(Activation kind, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw InvalidInputError("activate: non-finite input at index " +
                              std::to_string(i));
    }
    out[i] = kind == Activation::sigmoid ? sigmoid_scalar(x[i]) : std::tanh(x[i]);
  }
  return out;
}

// Shift-invariant softmax: the max logit is subtracted before
// exponentiation, so arbitrarily large logits cannot overflow.
inline Vector softmax(const Vector& logits) {
  if (logits.empty()) throw InvalidInputError("softmax: empty input");
  double max_logit = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInputError("softmax: non-finite logit");
    max_logit = std::max(max_logit, v);
  }
  Vector out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline Vector matvec(const Matrix& w, const Vector& x) {
  if (w.cols != static_cast<int>(x.size())) {
    throw ShapeError("matvec: " + std::to_string(w.rows) + "x" +
                     std::to_string(w.cols) + " times vector of dim " +
                     std::to_string(x.size()));
  }
  Vector out(static_cast<std::size_t>(w.rows), 0.0);
  const double* row = w.data.data();
  for (int r = 0; r < w.rows; ++r, row += w.cols) {
    double acc = 0.0;
    for (int c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

// w^T y, used by backprop to push gradients through a matvec.
inline Vector matvec_transposed(const Matrix& w, const Vector& y) {
  if (w.rows != static_cast<int>(y.size())) {
    throw ShapeError("matvec_transposed: " + std::to_string(w.rows) + "x" +
                     std::to_string(w.cols) + " transposed times vector of dim " +
                     std::to_string(y.size()));
  }
  Vector out(static_cast<std::size_t>(w.cols), 0.0);
  const double* row = w.data.data();
  for (int r = 0; r < w.rows; ++r, row += w.cols) {
    const double yr = y[r];
    for (int c = 0; c < w.cols; ++c) out[c] += row[c] * yr;
  }
  return out;
}

// acc += u v^T
inline void accumulate_outer(Matrix& acc, const Vector& u, const Vector& v) {
  if (acc.rows != static_cast<int>(u.size()) ||
      acc.cols != static_cast<int>(v.size())) {
    throw ShapeError("accumulate_outer: shape mismatch");
  }
  double* row = acc.data.data();
  for (int r = 0; r < acc.rows; ++r, row += acc.cols) {
    const double ur = u[r];
    for (int c = 0; c < acc.cols; ++c) row[c] += ur * v[c];
  }
}

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Draws index i with probability dist[i]. dist must be a probability
// distribution (nonnegative, sums to 1 within 1e-9). Consumes exactly one
// draw from the generator.
inline int sample_categorical(const Vector& dist, RngState& rng) {
  if (dist.empty()) throw InvalidInputError("sample_categorical: empty distribution");
  double sum = 0.0;
  for (double p : dist) {
    if (!std::isfinite(p) || p < 0.0) {
      throw InvalidInputError("sample_categorical: entries must be finite and nonnegative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw InvalidInputError("sample_categorical: distribution sums to " +
                            std::to_string(sum) + ", expected 1");
  }
  const double u = rng.next_double();
  double cum = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0) last_positive = static_cast<int>(i);
    cum += dist[i];
    if (u < cum) return static_cast<int>(i);
  }
  // u landed in the rounding gap at the top of the cumulative sum.
  return last_positive;
}

}  // namespace capgen
