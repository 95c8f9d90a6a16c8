// capgen/cli.hpp
//
// The operator surface. One subcommand per experiment family:
//
//   synth           generate a synthetic caption dataset
//   train           fit a model, writing checkpoint + vocabulary + loss log
//   caption         decode captions for a feature file (beam/greedy/sample)
//   evaluate        corpus BLEU and perplexity of a model on a dataset
//   rank            image-annotation and image-search ranking metrics
//   neighbors       nearest tokens in the learned embedding space
//   human-baseline  leave-one-out agreement BLEU among 5 references
//
// Exit status: 0 success, 1 module error (message on stderr), 2 usage error.
// All randomness flows from --seed. Every file-producing run writes a
// manifest (<output>.manifest) listing the resolved configuration and FNV-1a
// content hashes of inputs and outputs, so any run can be replayed and
// checked. Manifests carry no timestamps: identical runs are byte-identical.

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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "capgen/checkpoint.hpp"
#include "capgen/data.hpp"
#include "capgen/embedding.hpp"
#include "capgen/errors.hpp"
#include "capgen/hash.hpp"
#include "capgen/inference.hpp"
#include "capgen/metrics.hpp"
#include "capgen/model.hpp"
#include "capgen/training.hpp"

namespace capgen {
namespace cli {

inline std::string fmt_double(double v, int precision = 12) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

namespace detail {

inline std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open file for hashing: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return to_hex(fnv1a64(buf.str()));
}

// Key/value manifest written next to a command's primary output. Keys are
// emitted in insertion order so the file reads like the invocation.
class Manifest {
 public:
  explicit Manifest(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, long long value) {
    add(key, std::to_string(value));
  }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, double value) { add(key, fmt_double(value)); }
  void add(const std::string& key, std::uint64_t value) {
    add(key, std::to_string(value));
  }
  void add_input(const std::string& path) {
    add("input:" + path, file_hash_hex(path));
  }
  void add_output(const std::string& path) {
    add("output:" + path, file_hash_hex(path));
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write manifest: " + path);
    for (const auto& [key, value] : entries_) out << key << '=' << value << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw InvalidInputError("failed writing file: " + path);
}

struct LoadedModels {
  std::vector<Parameters> params;
  Vocabulary vocab;
  ModelRefs refs() const {
    ModelRefs r;
    for (const Parameters& p : params) r.push_back(&p);
    return r;
  }
};

// Loads one or more checkpoints plus the vocabulary they were trained
// against, and verifies every checkpoint's vocabulary hash. The default
// vocabulary path is <first model>.vocab, which is where train puts it.
inline LoadedModels load_models(const std::vector<std::string>& model_paths,
                                std::string vocab_path) {
  if (vocab_path.empty()) vocab_path = model_paths.at(0) + ".vocab";
  LoadedModels loaded;
  loaded.vocab = load_vocab(vocab_path);
  for (const std::string& path : model_paths) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.vocab_hash != loaded.vocab.content_hash) {
      throw InvalidInputError("checkpoint " + path +
                              " was trained against a different vocabulary than " +
                              vocab_path);
    }
    if (ckpt.params.dims.vocab_size != loaded.vocab.size()) {
      throw ShapeError("checkpoint vocab size does not match vocabulary file");
    }
    loaded.params.push_back(std::move(ckpt.params));
  }
  return loaded;
}

// Tokenized references of every record, in file order.
inline std::vector<std::vector<TokenSeq>> reference_tokens(const CaptionDataset& ds) {
  std::vector<std::vector<TokenSeq>> refs;
  refs.reserve(ds.records.size());
  for (const CaptionRecord& rec : ds.records) {
    std::vector<TokenSeq> record_refs;
    for (const std::string& caption : rec.captions) {
      record_refs.push_back(tokenize(caption));
    }
    refs.push_back(std::move(record_refs));
  }
  return refs;
}

}  // namespace detail

// ----------------------------------------------------------------- synth --

inline int cmd_synth(const std::string& out_path, const SynthConfig& cfg,
                     std::uint64_t seed) {
  RngState rng{seed, 0};
  const CaptionDataset dataset = synth_dataset(cfg, rng);
  save_dataset(dataset, out_path);

  detail::Manifest manifest("synth");
  manifest.add("num_images", cfg.num_images);
  manifest.add("feature_dim", cfg.feature_dim);
  manifest.add("vocab_words", cfg.vocab_words);
  manifest.add("min_sentence_len", cfg.min_sentence_len);
  manifest.add("max_sentence_len", cfg.max_sentence_len);
  manifest.add("captions_per_image", cfg.captions_per_image);
  manifest.add("seed", seed);
  manifest.add_output(out_path);
  manifest.write(out_path + ".manifest");
  return 0;
}

// ----------------------------------------------------------------- train --

struct TrainArgs {
  std::string data_path;
  std::string out_path;
  std::string vocab_out;  // default <out>.vocab
  std::string log_out;    // default <out>.log
  int hidden = 32;
  int embed = 32;
  int min_count = 1;  // desk-scale corpora are tiny; raise for real data
  TrainConfig config;
};

inline int cmd_train(TrainArgs args, std::ostream& out) {
  if (args.vocab_out.empty()) args.vocab_out = args.out_path + ".vocab";
  if (args.log_out.empty()) args.log_out = args.out_path + ".log";

  const CaptionDataset dataset = load_dataset(args.data_path);
  std::vector<std::vector<std::string>> corpus;
  for (const CaptionRecord& rec : dataset.records) {
    for (const std::string& caption : rec.captions) {
      corpus.push_back(tokenize(caption));
    }
  }
  const Vocabulary vocab = build_vocab(corpus, args.min_count);

  Dims dims;
  dims.feature_dim = dataset.feature_dim;
  dims.embed_dim = args.embed;
  dims.hidden_dim = args.hidden;
  dims.vocab_size = vocab.size();

  std::ostringstream log;
  const TrainReport report = train(dataset, vocab, dims, args.config, &log);
  detail::write_text_file(args.log_out, log.str());
  save_vocab(vocab, args.vocab_out);
  save_checkpoint(report.params, vocab.content_hash, args.out_path);

  out << "final_mean_loss_per_word=" << fmt_double(report.epoch_mean_loss.back())
      << '\n';
  out << "epochs=" << args.config.epochs << '\n';
  out << "vocab_size=" << vocab.size() << '\n';

  detail::Manifest manifest("train");
  manifest.add("data", args.data_path);
  manifest.add("hidden", args.hidden);
  manifest.add("embed", args.embed);
  manifest.add("min_count", args.min_count);
  manifest.add("lr", args.config.learning_rate);
  manifest.add("epochs", args.config.epochs);
  manifest.add("dropout", args.config.dropout_rate);
  manifest.add("clip", args.config.grad_clip ? fmt_double(*args.config.grad_clip)
                                             : std::string("none"));
  manifest.add("shuffle", args.config.shuffle ? "true" : "false");
  manifest.add("init_scale", args.config.init_scale);
  manifest.add("seed", args.config.seed);
  manifest.add_input(args.data_path);
  manifest.add_output(args.out_path);
  manifest.add_output(args.vocab_out);
  manifest.add_output(args.log_out);
  manifest.write(args.out_path + ".manifest");
  return 0;
}

// --------------------------------------------------------------- caption --

struct CaptionArgs {
  std::vector<std::string> model_paths;
  std::string vocab_path;
  std::string features_path;
  std::string out_path;  // empty: stdout only
  DecodeConfig config;
  int nbest = 1;
};

inline int cmd_caption(const CaptionArgs& args, std::ostream& out) {
  validate(args.config);
  if (args.nbest < 1) throw InvalidConfigError("--nbest must be >= 1");
  if (args.nbest > 1 && args.config.mode != DecodeMode::beam) {
    throw InvalidConfigError("--nbest needs beam mode");
  }
  if (args.nbest > args.config.beam_width) {
    throw InvalidConfigError("--nbest cannot exceed the beam width");
  }
  const detail::LoadedModels loaded =
      detail::load_models(args.model_paths, args.vocab_path);
  const CaptionDataset inputs =
      load_dataset(args.features_path, /*allow_empty_captions=*/true);
  const ModelRefs models = loaded.refs();

  RngState rng{args.config.seed, 0};
  std::ostringstream lines;
  for (const CaptionRecord& rec : inputs.records) {
    switch (args.config.mode) {
      case DecodeMode::greedy: {
        const std::vector<int> ids =
            greedy_caption(rec.features, models, args.config.max_len);
        lines << rec.image_id << '\t'
              << join_tokens(decode(ids, loaded.vocab)) << '\n';
        break;
      }
      case DecodeMode::sample: {
        const std::vector<int> ids =
            sample_caption(rec.features, models, args.config.max_len, rng);
        lines << rec.image_id << '\t'
              << join_tokens(decode(ids, loaded.vocab)) << '\n';
        break;
      }
      case DecodeMode::beam: {
        const std::vector<BeamHypothesis> hyps =
            beam_search(rec.features, models, args.config);
        if (args.nbest == 1) {
          lines << rec.image_id << '\t'
                << join_tokens(decode(hyps.at(0).tokens, loaded.vocab)) << '\n';
        } else {
          for (std::size_t i = 0; i < hyps.size() &&
                                  i < static_cast<std::size_t>(args.nbest); ++i) {
            lines << rec.image_id << '\t' << i + 1 << '\t'
                  << fmt_double(hyps[i].log_prob) << '\t'
                  << join_tokens(decode(hyps[i].tokens, loaded.vocab)) << '\n';
          }
        }
        break;
      }
    }
  }
  out << lines.str();

  if (!args.out_path.empty()) {
    detail::write_text_file(args.out_path, lines.str());
    detail::Manifest manifest("caption");
    for (const std::string& m : args.model_paths) manifest.add("model", m);
    manifest.add("features", args.features_path);
    manifest.add("mode", args.config.mode == DecodeMode::beam     ? "beam"
                         : args.config.mode == DecodeMode::greedy ? "greedy"
                                                                  : "sample");
    manifest.add("beam", args.config.beam_width);
    manifest.add("max_len", args.config.max_len);
    manifest.add("nbest", args.nbest);
    manifest.add("seed", args.config.seed);
    for (const std::string& m : args.model_paths) manifest.add_input(m);
    manifest.add_input(args.features_path);
    manifest.add_output(args.out_path);
    manifest.write(args.out_path + ".manifest");
  }
  return 0;
}

// -------------------------------------------------------------- evaluate --

struct EvaluateArgs {
  std::vector<std::string> model_paths;
  std::string vocab_path;
  std::string data_path;
  std::string out_path;  // empty: stdout only
  int max_n = 4;
  bool smooth = false;
  DecodeConfig config;  // beam settings for candidate generation
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  validate(args.config);
  if (args.max_n < 1) throw InvalidConfigError("--max-n must be >= 1");
  const detail::LoadedModels loaded =
      detail::load_models(args.model_paths, args.vocab_path);
  const CaptionDataset dataset = load_dataset(args.data_path);
  const ModelRefs models = loaded.refs();

  const std::vector<std::vector<TokenSeq>> refs = detail::reference_tokens(dataset);
  std::vector<EvalPair> pairs;
  pairs.reserve(dataset.records.size());
  for (int i = 0; i < dataset.size(); ++i) {
    const std::vector<BeamHypothesis> hyps =
        beam_search(dataset.records[i].features, models, args.config);
    EvalPair pair;
    pair.candidate = decode(hyps.at(0).tokens, loaded.vocab);
    pair.references = refs[i];
    pairs.push_back(std::move(pair));
  }

  std::ostringstream report;
  for (int n = 1; n <= args.max_n; ++n) {
    report << "bleu" << n << '=' << fmt_double(bleu(pairs, n, args.smooth)) << '\n';
  }
  // Perplexity of the reference captions under the first model.
  const auto [log_prob, words] =
      corpus_log_prob(dataset, loaded.vocab, loaded.params[0]);
  report << "perplexity=" << fmt_double(perplexity(log_prob, words)) << '\n';
  out << report.str();

  if (!args.out_path.empty()) {
    detail::write_text_file(args.out_path, report.str());
    detail::Manifest manifest("evaluate");
    for (const std::string& m : args.model_paths) manifest.add("model", m);
    manifest.add("data", args.data_path);
    manifest.add("max_n", args.max_n);
    manifest.add("smooth", args.smooth ? "true" : "false");
    manifest.add("beam", args.config.beam_width);
    manifest.add("max_len", args.config.max_len);
    for (const std::string& m : args.model_paths) manifest.add_input(m);
    manifest.add_input(args.data_path);
    manifest.add_output(args.out_path);
    manifest.write(args.out_path + ".manifest");
  }
  return 0;
}

// ------------------------------------------------------------------ rank --

struct RankArgs {
  std::vector<std::string> model_paths;
  std::string vocab_path;
  std::string data_path;
  std::string out_path;     // empty: stdout only
  std::string matrix_path;  // default <out>.scores when out given
  // Per-word score normalization per direction. Raw summed log-probability
  // favors short captions; normalization divides by predicted-word count.
  bool normalize_annotation = true;
  bool normalize_search = false;
};

namespace detail {

// One caption per record (the first) keeps the candidate pool square with
// the image pool, so both ranking directions use the same n x n layout.
inline ScoreMatrix rank_scores(const CaptionDataset& dataset,
                               const Vocabulary& vocab, const Parameters& params,
                               bool images_as_queries, bool normalize) {
  const int n = dataset.size();
  std::vector<std::vector<int>> captions;
  captions.reserve(n);
  for (const CaptionRecord& rec : dataset.records) {
    captions.push_back(encode(tokenize(rec.captions.at(0)), vocab));
  }
  ScoreMatrix m;
  m.scores = Matrix(n, n);
  m.ground_truth.assign(n, 0);
  for (int i = 0; i < n; ++i) m.ground_truth[i] = i;
  for (int img = 0; img < n; ++img) {
    for (int cap = 0; cap < n; ++cap) {
      double score = sequence_log_prob(dataset.records[img].features,
                                       captions[cap], params);
      if (normalize) {
        score /= static_cast<double>(captions[cap].size() - 1);
      }
      if (images_as_queries) {
        m.scores(img, cap) = score;
      } else {
        m.scores(cap, img) = score;
      }
    }
  }
  return m;
}

inline void append_rank_block(std::ostream& report, const std::string& prefix,
                              const ScoreMatrix& m, bool normalized) {
  report << prefix << "_normalized=" << (normalized ? "true" : "false") << '\n';
  for (int k : {1, 5, 10}) {
    if (k <= m.scores.cols) {
      report << prefix << "_r@" << k << '=' << fmt_double(recall_at_k(m, k)) << '\n';
    }
  }
  report << prefix << "_medr=" << fmt_double(median_rank(m)) << '\n';
}

inline void append_matrix(std::ostream& out, const std::string& prefix,
                          const ScoreMatrix& m) {
  for (int row = 0; row < m.scores.rows; ++row) {
    out << prefix << '\t' << row << '\t' << m.ground_truth[row] << '\t';
    for (int col = 0; col < m.scores.cols; ++col) {
      if (col > 0) out << ' ';
      out << fmt_double(m.scores(row, col), 17);
    }
    out << '\n';
  }
}

}  // namespace detail

inline int cmd_rank(RankArgs args, std::ostream& out) {
  const detail::LoadedModels loaded =
      detail::load_models(args.model_paths, args.vocab_path);
  const CaptionDataset dataset = load_dataset(args.data_path);
  const Parameters& params = loaded.params[0];

  // Annotation: rank all captions for each image. Search: rank all images
  // for each caption.
  const ScoreMatrix annotation = detail::rank_scores(
      dataset, loaded.vocab, params, /*images_as_queries=*/true,
      args.normalize_annotation);
  const ScoreMatrix search = detail::rank_scores(
      dataset, loaded.vocab, params, /*images_as_queries=*/false,
      args.normalize_search);

  std::ostringstream report;
  detail::append_rank_block(report, "annotation", annotation,
                            args.normalize_annotation);
  detail::append_rank_block(report, "search", search, args.normalize_search);
  out << report.str();

  if (!args.out_path.empty()) {
    detail::write_text_file(args.out_path, report.str());
    if (args.matrix_path.empty()) args.matrix_path = args.out_path + ".scores";
    std::ostringstream matrix;
    detail::append_matrix(matrix, "annotation", annotation);
    detail::append_matrix(matrix, "search", search);
    detail::write_text_file(args.matrix_path, matrix.str());

    detail::Manifest manifest("rank");
    for (const std::string& m : args.model_paths) manifest.add("model", m);
    manifest.add("data", args.data_path);
    manifest.add("normalize_annotation", args.normalize_annotation ? "true" : "false");
    manifest.add("normalize_search", args.normalize_search ? "true" : "false");
    for (const std::string& m : args.model_paths) manifest.add_input(m);
    manifest.add_input(args.data_path);
    manifest.add_output(args.out_path);
    manifest.add_output(args.matrix_path);
    manifest.write(args.out_path + ".manifest");
  }
  return 0;
}

// ------------------------------------------------------------- neighbors --

struct NeighborsArgs {
  std::vector<std::string> model_paths;
  std::string vocab_path;
  std::string word;
  std::string out_path;  // empty: stdout only
  int k = 5;
};

inline int cmd_neighbors(const NeighborsArgs& args, std::ostream& out) {
  const detail::LoadedModels loaded =
      detail::load_models(args.model_paths, args.vocab_path);
  const NeighborReport report =
      nearest_neighbors(args.word, args.k, loaded.params[0], loaded.vocab);
  std::ostringstream lines;
  for (const auto& [token, sim] : report.neighbors) {
    lines << token << '\t' << fmt_double(sim) << '\n';
  }
  out << lines.str();
  if (!args.out_path.empty()) {
    detail::write_text_file(args.out_path, lines.str());
    detail::Manifest manifest("neighbors");
    manifest.add("model", args.model_paths[0]);
    manifest.add("word", args.word);
    manifest.add("k", args.k);
    manifest.add_input(args.model_paths[0]);
    manifest.add_output(args.out_path);
    manifest.write(args.out_path + ".manifest");
  }
  return 0;
}

// -------------------------------------------------------- human-baseline --

inline int cmd_human_baseline(const std::string& data_path, int max_n,
                              const std::string& out_path, std::ostream& out) {
  if (max_n < 1) throw InvalidConfigError("--max-n must be >= 1");
  const CaptionDataset dataset = load_dataset(data_path);
  std::vector<std::vector<TokenSeq>> groups;
  groups.reserve(dataset.records.size());
  for (const CaptionRecord& rec : dataset.records) {
    std::vector<TokenSeq> group;
    for (const std::string& caption : rec.captions) {
      group.push_back(tokenize(caption));
    }
    groups.push_back(std::move(group));
  }
  std::ostringstream report;
  report << "human_bleu=" << fmt_double(human_baseline_bleu(groups, max_n)) << '\n';
  out << report.str();
  if (!out_path.empty()) {
    detail::write_text_file(out_path, report.str());
    detail::Manifest manifest("human-baseline");
    manifest.add("data", data_path);
    manifest.add("max_n", max_n);
    manifest.add_input(data_path);
    manifest.add_output(out_path);
    manifest.write(out_path + ".manifest");
  }
  return 0;
}

// ------------------------------------------------------------ dispatcher --

inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"caption engine: train, decode and evaluate image-caption models"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  SynthConfig synth_cfg;
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output dataset file")->required();
  synth->add_option("--num-images", synth_cfg.num_images);
  synth->add_option("--feature-dim", synth_cfg.feature_dim);
  synth->add_option("--vocab-words", synth_cfg.vocab_words);
  synth->add_option("--min-len", synth_cfg.min_sentence_len);
  synth->add_option("--max-len", synth_cfg.max_sentence_len);
  synth->add_option("--captions-per-image", synth_cfg.captions_per_image);
  synth->add_option("--seed", synth_seed);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  TrainArgs train_args;
  double train_clip = 0.0;
  bool no_shuffle = false;
  train_cmd->add_option("--data", train_args.data_path, "training dataset")->required();
  train_cmd->add_option("--out", train_args.out_path, "checkpoint path")->required();
  train_cmd->add_option("--hidden", train_args.hidden);
  train_cmd->add_option("--embed", train_args.embed);
  train_cmd->add_option("--lr", train_args.config.learning_rate);
  train_cmd->add_option("--epochs", train_args.config.epochs);
  train_cmd->add_option("--dropout", train_args.config.dropout_rate);
  train_cmd->add_option("--clip", train_clip, "global grad-norm bound, 0 = off");
  train_cmd->add_option("--seed", train_args.config.seed);
  train_cmd->add_option("--min-count", train_args.min_count);
  train_cmd->add_option("--init-scale", train_args.config.init_scale);
  train_cmd->add_option("--vocab-out", train_args.vocab_out);
  train_cmd->add_option("--log", train_args.log_out, "loss log path");
  train_cmd->add_flag("--no-shuffle", no_shuffle);

  // shared decode flags builder
  auto add_model_flags = [](CLI::App* cmd, std::vector<std::string>& models,
                            std::string& vocab) {
    cmd->add_option("--model", models, "checkpoint (repeat to ensemble)")
        ->required();
    cmd->add_option("--vocab", vocab, "vocabulary file (default <model>.vocab)");
  };

  // caption
  auto* caption = app.add_subcommand("caption", "decode captions for features");
  CaptionArgs caption_args;
  std::string caption_mode = "beam";
  add_model_flags(caption, caption_args.model_paths, caption_args.vocab_path);
  caption->add_option("--features", caption_args.features_path, "feature file")
      ->required();
  caption->add_option("--beam", caption_args.config.beam_width);
  caption->add_option("--max-len", caption_args.config.max_len);
  caption->add_option("--mode", caption_mode)
      ->check(CLI::IsMember({"beam", "greedy", "sample"}));
  caption->add_option("--nbest", caption_args.nbest);
  caption->add_option("--seed", caption_args.config.seed);
  caption->add_option("--out", caption_args.out_path);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score a model on a dataset");
  EvaluateArgs eval_args;
  add_model_flags(evaluate, eval_args.model_paths, eval_args.vocab_path);
  evaluate->add_option("--data", eval_args.data_path)->required();
  evaluate->add_option("--max-n", eval_args.max_n);
  evaluate->add_option("--beam", eval_args.config.beam_width);
  evaluate->add_option("--max-len", eval_args.config.max_len);
  evaluate->add_flag("--smooth", eval_args.smooth,
                     "add-one smoothing on orders >= 2 (diagnostic only)");
  evaluate->add_option("--out", eval_args.out_path);

  // rank
  auto* rank = app.add_subcommand("rank", "annotation and search ranking");
  RankArgs rank_args;
  std::string normalize = "annotation";
  add_model_flags(rank, rank_args.model_paths, rank_args.vocab_path);
  rank->add_option("--data", rank_args.data_path)->required();
  rank->add_option("--normalize", normalize,
                   "which direction uses per-word scores")
      ->check(CLI::IsMember({"annotation", "search", "both", "none"}));
  rank->add_option("--out", rank_args.out_path);
  rank->add_option("--matrix-out", rank_args.matrix_path);

  // neighbors
  auto* neighbors = app.add_subcommand("neighbors", "embedding nearest neighbors");
  NeighborsArgs nb_args;
  add_model_flags(neighbors, nb_args.model_paths, nb_args.vocab_path);
  neighbors->add_option("--word", nb_args.word)->required();
  neighbors->add_option("--k", nb_args.k);
  neighbors->add_option("--out", nb_args.out_path);

  // human-baseline
  auto* human = app.add_subcommand("human-baseline",
                                   "leave-one-out BLEU among 5 references");
  std::string human_data, human_out;
  int human_max_n = 4;
  human->add_option("--data", human_data)->required();
  human->add_option("--max-n", human_max_n);
  human->add_option("--out", human_out);

  try {
    // CLI11's vector overload consumes the arguments back to front.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_cfg, synth_seed);
    if (*train_cmd) {
      if (train_clip > 0.0) train_args.config.grad_clip = train_clip;
      train_args.config.shuffle = !no_shuffle;
      return cmd_train(std::move(train_args), out);
    }
    if (*caption) {
      caption_args.config.mode = caption_mode == "greedy" ? DecodeMode::greedy
                                 : caption_mode == "sample"
                                     ? DecodeMode::sample
                                     : DecodeMode::beam;
      return cmd_caption(caption_args, out);
    }
    if (*evaluate) return cmd_evaluate(eval_args, out);
    if (*rank) {
      rank_args.normalize_annotation =
          normalize == "annotation" || normalize == "both";
      rank_args.normalize_search = normalize == "search" || normalize == "both";
      return cmd_rank(std::move(rank_args), out);
    }
    if (*neighbors) return cmd_neighbors(nb_args, out);
    if (*human) return cmd_human_baseline(human_data, human_max_n, human_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << "no subcommand given\n";
  return 2;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace cli
}  // namespace capgen
