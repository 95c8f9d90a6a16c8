// capgen/errors.hpp

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

#include <stdexcept>
#include <string>

namespace capgen {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values: non-finite inputs, empty corpora, out-of-range k, ...
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatches between matrices, vectors and model dims.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad configuration values (dims, rates, widths).
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

// Token id outside the vocabulary, or unknown surface form.
class InvalidTokenError : public Error {
 public:
  using Error::Error;
};

// Token sequence missing its start/stop framing.
class MalformedSequenceError : public Error {
 public:
  using Error::Error;
};

// A forward trace handed to a consumer that does not match its tokens/params.
class InconsistentTraceError : public Error {
 public:
  using Error::Error;
};

// Unreadable or syntactically malformed input file. Carries a line number
// where one makes sense.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates the schema (caption count, feature
// dim, checkpoint/vocabulary mismatch, ...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// An embedding column with zero norm cannot be ranked by cosine similarity.
class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

}  // namespace capgen
