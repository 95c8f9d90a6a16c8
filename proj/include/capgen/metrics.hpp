// capgen/metrics.hpp
//
// Automatic evaluation: corpus BLEU with clipped n-gram precision and the
// standard brevity penalty, perplexity, recall@k / median rank over score
// matrices, and the leave-one-out human-agreement BLEU protocol.
//
// All metrics operate on surface token sequences (sentinels already
// stripped); nothing here depends on the model.

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
#include <map>
#include <string>
#include <vector>

#include "capgen/errors.hpp"
#include "capgen/numerics.hpp"

namespace capgen {

using TokenSeq = std::vector<std::string>;

struct EvalPair {
  TokenSeq candidate;
  std::vector<TokenSeq> references;  // 1 to 5
};

inline constexpr int kMaxReferences = 5;

namespace detail {

inline void check_pairs(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw InvalidInputError("empty evaluation corpus");
  for (const EvalPair& pair : pairs) {
    if (pair.references.empty() ||
        static_cast<int>(pair.references.size()) > kMaxReferences) {
      throw InvalidInputError("every pair needs 1 to 5 references");
    }
  }
}

// n-gram multiset of a sequence, keyed by the tokens joined with an
// unprintable separator (tokens never contain it).
inline std::map<std::string, long long> ngram_counts(const TokenSeq& tokens, int n) {
  std::map<std::string, long long> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Corpus-level clipped n-gram counts: every candidate n-gram counts at most
// as often as it appears in the most generous reference. Candidates shorter
// than n contribute zero to both totals.
inline std::pair<long long, long long> modified_precision(
    const std::vector<EvalPair>& pairs, int n) {
  if (n < 1) throw InvalidConfigError("n-gram order must be >= 1");
  detail::check_pairs(pairs);
  long long matched = 0;
  long long total = 0;
  for (const EvalPair& pair : pairs) {
    const auto cand = detail::ngram_counts(pair.candidate, n);
    std::map<std::string, long long> best_ref;
    for (const TokenSeq& ref : pair.references) {
      for (const auto& [key, count] : detail::ngram_counts(ref, n)) {
        long long& cur = best_ref[key];
        cur = std::max(cur, count);
      }
    }
    for (const auto& [key, count] : cand) {
      total += count;
      const auto it = best_ref.find(key);
      if (it != best_ref.end()) matched += std::min(count, it->second);
    }
  }
  return {matched, total};
}

// Corpus BLEU: BP * exp(mean of ln p_i over i=1..max_n), where p_i is the
// corpus modified precision and BP = min(1, e^(1 - r/c)) with c the total
// candidate length and r the summed closest-reference length (ties toward
// the shorter reference). Zero if any p_i is zero. The smoothing switch
// adds one to numerator and denominator of orders >= 2, for sentence-level
// diagnostics only; it is never the default.
inline double bleu(const std::vector<EvalPair>& pairs, int max_n,
                   bool smooth = false) {
  if (max_n < 1) throw InvalidConfigError("max_n must be >= 1");
  detail::check_pairs(pairs);

  long long c_total = 0;
  long long r_total = 0;
  for (const EvalPair& pair : pairs) {
    const long long c_len = static_cast<long long>(pair.candidate.size());
    c_total += c_len;
    long long best_len = static_cast<long long>(pair.references[0].size());
    for (const TokenSeq& ref : pair.references) {
      const long long len = static_cast<long long>(ref.size());
      const long long d_new = std::llabs(len - c_len);
      const long long d_best = std::llabs(best_len - c_len);
      if (d_new < d_best || (d_new == d_best && len < best_len)) best_len = len;
    }
    r_total += best_len;
  }
  if (c_total == 0) return 0.0;

  double log_prec_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    auto [matched, total] = modified_precision(pairs, n);
    if (smooth && n >= 2) {
      ++matched;
      ++total;
    }
    if (matched == 0 || total == 0) return 0.0;
    log_prec_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  const double bp =
      c_total >= r_total
          ? 1.0
          : std::exp(1.0 - static_cast<double>(r_total) / static_cast<double>(c_total));
  return bp * std::exp(log_prec_sum / max_n);
}

// exp(-total_log_prob / word_count): the geometric mean of the inverse
// per-word probability.
inline double perplexity(double total_log_prob, long long word_count) {
  if (word_count < 1) throw InvalidInputError("perplexity needs >= 1 word");
  return std::exp(-total_log_prob / static_cast<double>(word_count));
}

// Rows are queries, columns are candidates, higher scores are better; each
// row designates the column holding its ground truth.
struct ScoreMatrix {
  Matrix scores{1, 1};
  std::vector<int> ground_truth;
};

inline void validate(const ScoreMatrix& m) {
  if (static_cast<int>(m.ground_truth.size()) != m.scores.rows) {
    throw InvalidInputError("one ground-truth column per row required");
  }
  for (int g : m.ground_truth) {
    if (g < 0 || g >= m.scores.cols) {
      throw InvalidInputError("ground-truth column out of range");
    }
  }
}

// Rank of the ground-truth entry in a row, 1 = best. Ties break by column
// index ascending: the lower index wins.
inline int rank_in_row(const ScoreMatrix& m, int row) {
  const int gt = m.ground_truth[row];
  const double gt_score = m.scores(row, gt);
  int rank = 1;
  for (int col = 0; col < m.scores.cols; ++col) {
    if (col == gt) continue;
    const double s = m.scores(row, col);
    if (s > gt_score || (s == gt_score && col < gt)) ++rank;
  }
  return rank;
}

inline double recall_at_k(const ScoreMatrix& m, int k) {
  validate(m);
  if (k < 1 || k > m.scores.cols) {
    throw InvalidInputError("recall@k needs 1 <= k <= number of columns");
  }
  int hits = 0;
  for (int row = 0; row < m.scores.rows; ++row) {
    if (rank_in_row(m, row) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m.scores.rows);
}

// Lower-middle median of the ground-truth ranks.
inline double median_rank(const ScoreMatrix& m) {
  validate(m);
  std::vector<int> ranks;
  ranks.reserve(m.scores.rows);
  for (int row = 0; row < m.scores.rows; ++row) ranks.push_back(rank_in_row(m, row));
  std::sort(ranks.begin(), ranks.end());
  return static_cast<double>(ranks[(ranks.size() - 1) / 2]);
}

// Agreement among 5 reference captions: hold each position out in turn as
// the candidate, score it against the remaining four over the whole corpus,
// and average the five corpus BLEU values.
inline double human_baseline_bleu(const std::vector<std::vector<TokenSeq>>& groups,
                                  int max_n) {
  if (groups.empty()) throw InvalidInputError("empty reference-group corpus");
  for (const auto& group : groups) {
    if (group.size() != 5) {
      throw InvalidInputError("every group must hold exactly 5 references");
    }
  }
  double sum = 0.0;
  for (int held_out = 0; held_out < 5; ++held_out) {
    std::vector<EvalPair> pairs;
    pairs.reserve(groups.size());
    for (const auto& group : groups) {
      EvalPair pair;
      pair.candidate = group[held_out];
      for (int i = 0; i < 5; ++i) {
        if (i != held_out) pair.references.push_back(group[i]);
      }
      pairs.push_back(std::move(pair));
    }
    sum += bleu(pairs, max_n);
  }
  return sum / 5.0;
}

}  // namespace capgen
