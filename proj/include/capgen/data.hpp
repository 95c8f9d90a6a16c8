// capgen/data.hpp
//
// Tokenization, vocabulary construction, sentence encoding with
// start/stop/unknown sentinels, dataset file I/O, and a synthetic dataset
// generator for desk-scale experiments.
//
// Tokenization rule (fixed so scores are comparable across runs): lowercase
// ASCII letters, split on whitespace, and detach . , ! ? ; : " ( ) as
// standalone single-character tokens.

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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "capgen/errors.hpp"
#include "capgen/hash.hpp"
#include "capgen/model.hpp"
#include "capgen/numerics.hpp"

namespace capgen {

// Reserved surface forms. Uppercase on purpose: tokenize() lowercases, so a
// corpus token can never collide with these.
inline constexpr const char* kStartToken = "<START>";
inline constexpr const char* kStopToken = "<STOP>";
inline constexpr const char* kUnkToken = "<UNK>";

inline std::vector<std::string> tokenize(const std::string& text) {
  static const std::string punct = ".,!?;:\"()";
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (char raw : text) {
    const unsigned char ch = static_cast<unsigned char>(raw);
    if (std::isspace(ch)) {
      flush();
    } else if (punct.find(raw) != std::string::npos) {
      flush();
      tokens.emplace_back(1, raw);
    } else {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return tokens;
}

// Dense ids 0..size-1. Ids 0/1/2 are the sentinels; corpus tokens start at 3.
struct Vocabulary {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;
  std::uint64_t content_hash = 0;

  int size() const { return static_cast<int>(id_to_token.size()); }

  // Unknown tokens map to UNK rather than erroring; that is the whole point
  // of the sentinel.
  int id_of(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnkId : it->second;
  }

  const std::string& token_of(int id) const {
    if (id < 0 || id >= size()) {
      throw InvalidTokenError("token id " + std::to_string(id) +
                              " out of range [0, " + std::to_string(size()) + ")");
    }
    return id_to_token[id];
  }

  bool operator==(const Vocabulary& other) const {
    return id_to_token == other.id_to_token;
  }
};

namespace detail {

inline void seal_vocab(Vocabulary& vocab) {
  vocab.token_to_id.clear();
  for (int id = 0; id < vocab.size(); ++id) {
    vocab.token_to_id.emplace(vocab.id_to_token[id], id);
  }
  std::string joined;
  for (const std::string& t : vocab.id_to_token) {
    joined += t;
    joined += '\n';
  }
  vocab.content_hash = fnv1a64(joined);
}

inline Vocabulary empty_vocab() {
  Vocabulary vocab;
  vocab.id_to_token = {kStartToken, kStopToken, kUnkToken};
  detail::seal_vocab(vocab);
  return vocab;
}

}  // namespace detail

// Tokens with corpus frequency >= min_count, ordered by descending frequency
// with lexicographic tie-break, assigned ids from 3 upward. Everything rarer
// maps to UNK at encode time.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                              int min_count = 5) {
  if (min_count < 1) throw InvalidConfigError("min_count must be >= 1");
  if (corpus.empty()) throw InvalidInputError("build_vocab: empty corpus");
  std::map<std::string, long long> freq;
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence) ++freq[token];
  }
  std::vector<std::pair<std::string, long long>> kept;
  for (const auto& [token, count] : freq) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary vocab = detail::empty_vocab();
  for (const auto& [token, count] : kept) {
    (void)count;
    vocab.id_to_token.push_back(token);
  }
  detail::seal_vocab(vocab);
  return vocab;
}

// [START] ++ ids ++ [STOP]; out-of-vocabulary tokens become UNK.
inline std::vector<int> encode(const std::vector<std::string>& tokens,
                               const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kStartId);
  for (const auto& token : tokens) ids.push_back(vocab.id_of(token));
  ids.push_back(kStopId);
  return ids;
}

// Strips one leading START and one trailing STOP if present; a missing STOP
// is legal (truncated decoder output). Interior sentinels render literally.
inline std::vector<std::string> decode(const std::vector<int>& ids,
                                       const Vocabulary& vocab) {
  for (int id : ids) (void)vocab.token_of(id);  // range check first
  std::size_t begin = 0;
  std::size_t end = ids.size();
  if (begin < end && ids[begin] == kStartId) ++begin;
  if (begin < end && ids[end - 1] == kStopId) --end;
  std::vector<std::string> tokens;
  tokens.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) tokens.push_back(vocab.token_of(ids[i]));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct CaptionRecord {
  std::string image_id;
  Vector features;
  std::vector<std::string> captions;  // raw text; tokenized on demand

  bool operator==(const CaptionRecord&) const = default;
};

struct CaptionDataset {
  int feature_dim = 0;
  std::vector<CaptionRecord> records;

  int size() const { return static_cast<int>(records.size()); }
  bool operator==(const CaptionDataset&) const = default;
};

inline constexpr int kMaxCaptionsPerRecord = 5;

namespace detail {

inline void validate_record(const CaptionRecord& rec, int feature_dim,
                            bool allow_empty_captions, const std::string& where) {
  if (rec.image_id.empty()) throw SchemaError(where + ": empty image_id");
  if (static_cast<int>(rec.features.size()) != feature_dim) {
    throw SchemaError(where + ": feature dim " + std::to_string(rec.features.size()) +
                      " != " + std::to_string(feature_dim));
  }
  for (double v : rec.features) {
    if (!std::isfinite(v)) throw SchemaError(where + ": non-finite feature value");
  }
  if (!allow_empty_captions && rec.captions.empty()) {
    throw SchemaError(where + ": record has no captions");
  }
  if (static_cast<int>(rec.captions.size()) > kMaxCaptionsPerRecord) {
    throw SchemaError(where + ": " + std::to_string(rec.captions.size()) +
                      " captions; at most " + std::to_string(kMaxCaptionsPerRecord) +
                      " allowed");
  }
}

}  // namespace detail

// Line-delimited records: {"image_id": ..., "features": [...], "captions":
// [...]} per line. feature_dim is inferred from the first record and
// enforced on the rest. allow_empty_captions admits caption-less records
// (inputs for captioning, where references do not exist yet).
inline CaptionDataset load_dataset(const std::string& path,
                                   bool allow_empty_captions = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open dataset file: " + path);
  CaptionDataset dataset;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    CaptionRecord rec;
    try {
      if (!obj.is_object()) throw SchemaError(where + ": record is not an object");
      rec.image_id = obj.at("image_id").get<std::string>();
      rec.features = obj.at("features").get<Vector>();
      rec.captions = obj.at("captions").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(where + ": " + e.what());
    }
    if (dataset.records.empty()) {
      if (rec.features.empty()) throw SchemaError(where + ": empty feature vector");
      dataset.feature_dim = static_cast<int>(rec.features.size());
    }
    detail::validate_record(rec, dataset.feature_dim, allow_empty_captions, where);
    dataset.records.push_back(std::move(rec));
  }
  if (dataset.records.empty()) {
    throw InvalidInputError("dataset file has no records: " + path);
  }
  return dataset;
}

inline void save_dataset(const CaptionDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open file for writing: " + path);
  for (const CaptionRecord& rec : dataset.records) {
    nlohmann::json obj;
    obj["image_id"] = rec.image_id;
    obj["features"] = rec.features;
    obj["captions"] = rec.captions;
    out << obj.dump() << '\n';
  }
  if (!out) throw InvalidInputError("failed writing dataset file: " + path);
}

// Vocabulary file: one token per line, line number = id - 3; the three
// sentinels are implicit and never written.
inline void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open file for writing: " + path);
  for (int id = 3; id < vocab.size(); ++id) {
    out << vocab.id_to_token[id] << '\n';
  }
  if (!out) throw InvalidInputError("failed writing vocabulary file: " + path);
}

inline Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open vocabulary file: " + path);
  Vocabulary vocab = detail::empty_vocab();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = path + ":" + std::to_string(line_no);
    if (line.empty()) throw ParseError(where + ": empty vocabulary line");
    if (line == kStartToken || line == kStopToken || line == kUnkToken) {
      throw ParseError(where + ": reserved sentinel in vocabulary file");
    }
    if (std::find(vocab.id_to_token.begin(), vocab.id_to_token.end(), line) !=
        vocab.id_to_token.end()) {
      throw ParseError(where + ": duplicate token '" + line + "'");
    }
    vocab.id_to_token.push_back(line);
  }
  detail::seal_vocab(vocab);
  return vocab;
}

// ---------------------------------------------------------------------------
// Synthetic dataset.
//
// Captions come from the fixed template
//   the [adjective]* <noun> <verb> in the <place> .
// where (noun, verb, place) is one grammar branch. feature[0] encodes the
// branch exactly: feature[0] = -1 + 2 * (branch + 0.5) / num_branches, so
// caption content correlates deterministically with that coordinate.
// Remaining coordinates are uniform noise in (-1, 1). When num_images does
// not exceed the branch count, branches are sampled without replacement, so
// every record gets a distinct caption family.

struct SynthConfig {
  int num_images = 8;
  int feature_dim = 16;
  int vocab_words = 18;       // distinct surface words the grammar may use
  int min_sentence_len = 7;   // template without adjectives is 7 tokens
  int max_sentence_len = 7;
  int captions_per_image = 1;
};

namespace detail {

struct GrammarPools {
  std::vector<std::string> nouns, verbs, places, adjectives;
  int branches() const {
    return static_cast<int>(nouns.size() * verbs.size() * places.size());
  }
};

// Word budget: vocab_words counts the distinct surface words available to
// the grammar, including the three fixed words "the", "in", ".".
inline GrammarPools grammar_pools(int vocab_words) {
  static const std::vector<std::string> nouns = {
      "cat", "dog", "bird", "horse", "boy", "girl",
      "man", "woman", "robot", "turtle", "fox", "bear"};
  static const std::vector<std::string> verbs = {
      "sits", "runs", "sleeps", "jumps", "plays", "waits", "stands", "walks"};
  static const std::vector<std::string> places = {
      "park", "house", "field", "street", "garden", "kitchen", "beach", "forest"};
  static const std::vector<std::string> adjectives = {
      "small", "big", "red", "blue", "old", "young", "happy", "quiet"};

  if (vocab_words < 6) {
    throw InvalidConfigError("vocab_words must be >= 6 (three fixed words plus "
                             "at least one noun, verb and place)");
  }
  const int n = vocab_words - 3;
  auto clamp = [](int want, int cap) { return std::min(cap, std::max(1, want)); };
  const int num_nouns = clamp(2 * n / 5, static_cast<int>(nouns.size()));
  const int num_verbs = clamp(n / 5, static_cast<int>(verbs.size()));
  const int num_places = clamp(n / 5, static_cast<int>(places.size()));
  const int num_adj = std::min(static_cast<int>(adjectives.size()),
                               std::max(0, n - num_nouns - num_verbs - num_places));
  GrammarPools pools;
  pools.nouns.assign(nouns.begin(), nouns.begin() + num_nouns);
  pools.verbs.assign(verbs.begin(), verbs.begin() + num_verbs);
  pools.places.assign(places.begin(), places.begin() + num_places);
  pools.adjectives.assign(adjectives.begin(), adjectives.begin() + num_adj);
  return pools;
}

inline std::string branch_caption(const GrammarPools& pools, int branch,
                                  int num_adjectives, RngState& rng) {
  const int places = static_cast<int>(pools.places.size());
  const int verbs = static_cast<int>(pools.verbs.size());
  const int place_idx = branch % places;
  const int verb_idx = (branch / places) % verbs;
  const int noun_idx = branch / (places * verbs);
  std::string caption = "the";
  for (int a = 0; a < num_adjectives; ++a) {
    caption += ' ';
    caption += pools.adjectives[rng.next_below(
        static_cast<std::uint64_t>(pools.adjectives.size()))];
  }
  caption += ' ';
  caption += pools.nouns[noun_idx];
  caption += ' ';
  caption += pools.verbs[verb_idx];
  caption += " in the ";
  caption += pools.places[place_idx];
  caption += " .";
  return caption;
}

}  // namespace detail

inline CaptionDataset synth_dataset(const SynthConfig& cfg, RngState& rng) {
  if (cfg.num_images <= 0 || cfg.feature_dim <= 0) {
    throw InvalidConfigError("num_images and feature_dim must be positive");
  }
  if (cfg.min_sentence_len < 7 || cfg.max_sentence_len < cfg.min_sentence_len) {
    throw InvalidConfigError(
        "sentence length range must satisfy 7 <= min <= max (the adjective-free "
        "template is 7 tokens)");
  }
  if (cfg.captions_per_image < 1 || cfg.captions_per_image > kMaxCaptionsPerRecord) {
    throw InvalidConfigError("captions_per_image must lie in [1, 5]");
  }
  const detail::GrammarPools pools = detail::grammar_pools(cfg.vocab_words);
  if (cfg.max_sentence_len > 7 && pools.adjectives.empty()) {
    throw InvalidConfigError(
        "sentence lengths above 7 need an adjective pool; raise vocab_words");
  }
  const int branches = pools.branches();

  // Branch assignment: a partial Fisher-Yates shuffle when every image can
  // get a distinct branch, independent draws otherwise.
  const bool distinct = cfg.num_images <= branches;
  std::vector<int> pool(branches);
  for (int i = 0; i < branches; ++i) pool[i] = i;

  CaptionDataset dataset;
  dataset.feature_dim = cfg.feature_dim;
  for (int i = 0; i < cfg.num_images; ++i) {
    int branch;
    if (distinct) {
      const int j = i + static_cast<int>(rng.next_below(
          static_cast<std::uint64_t>(branches - i)));
      std::swap(pool[i], pool[j]);
      branch = pool[i];
    } else {
      branch = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(branches)));
    }
    CaptionRecord rec;
    rec.image_id = "synth-" + std::to_string(i);
    rec.features.resize(cfg.feature_dim);
    rec.features[0] = -1.0 + 2.0 * (branch + 0.5) / branches;
    for (int d = 1; d < cfg.feature_dim; ++d) {
      rec.features[d] = rng.next_uniform(-1.0, 1.0);
    }
    for (int s = 0; s < cfg.captions_per_image; ++s) {
      const int len = cfg.min_sentence_len + static_cast<int>(rng.next_below(
          static_cast<std::uint64_t>(cfg.max_sentence_len - cfg.min_sentence_len + 1)));
      rec.captions.push_back(detail::branch_caption(pools, branch, len - 7, rng));
    }
    dataset.records.push_back(std::move(rec));
  }
  return dataset;
}

inline CaptionDataset synth_dataset(int num_images, int feature_dim,
                                    int vocab_words,
                                    std::pair<int, int> sentence_len_range,
                                    RngState& rng) {
  SynthConfig cfg;
  cfg.num_images = num_images;
  cfg.feature_dim = feature_dim;
  cfg.vocab_words = vocab_words;
  cfg.min_sentence_len = sentence_len_range.first;
  cfg.max_sentence_len = sentence_len_range.second;
  return synth_dataset(cfg, rng);
}

}  // namespace capgen
