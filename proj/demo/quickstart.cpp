// capgen/demo/quickstart.cpp
//
// End-to-end library walkthrough on a synthetic dataset: generate data,
// train a small model, decode with beam search, score with BLEU, and list
// embedding neighbors. Everything runs in a few seconds and prints to
// stdout; no files are written.

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

#include <iostream>

#include "capgen/capgen.hpp"

int main() {
  using namespace capgen;

  // A tiny dataset: 8 images, one caption each, from the fixed grammar.
  RngState rng{7, 0};
  SynthConfig synth_cfg;
  synth_cfg.num_images = 8;
  synth_cfg.feature_dim = 16;
  const CaptionDataset dataset = synth_dataset(synth_cfg, rng);

  std::vector<std::vector<std::string>> corpus;
  for (const CaptionRecord& rec : dataset.records) {
    for (const std::string& caption : rec.captions) {
      corpus.push_back(tokenize(caption));
    }
  }
  const Vocabulary vocab = build_vocab(corpus, /*min_count=*/1);
  std::cout << "dataset: " << dataset.size() << " images, vocab "
            << vocab.size() << " tokens\n";

  Dims dims;
  dims.feature_dim = dataset.feature_dim;
  dims.embed_dim = 32;
  dims.hidden_dim = 32;
  dims.vocab_size = vocab.size();

  TrainConfig train_cfg;
  train_cfg.learning_rate = 0.2;
  train_cfg.epochs = 300;
  train_cfg.seed = 7;
  std::cout << "training " << train_cfg.epochs << " epochs...\n";
  const TrainReport report = train(dataset, vocab, dims, train_cfg);
  std::cout << "final mean loss per word: " << report.epoch_mean_loss.back()
            << "\n\n";

  // Decode every training image and compare against its reference.
  DecodeConfig decode_cfg;
  decode_cfg.beam_width = 5;
  std::vector<EvalPair> pairs;
  for (const CaptionRecord& rec : dataset.records) {
    const auto hyps = beam_search(rec.features, report.params, decode_cfg);
    EvalPair pair;
    pair.candidate = decode(hyps.at(0).tokens, vocab);
    pair.references.push_back(tokenize(rec.captions[0]));
    std::cout << rec.image_id << ": " << join_tokens(pair.candidate) << '\n';
    pairs.push_back(std::move(pair));
  }
  std::cout << "\ntraining-set bleu1=" << bleu(pairs, 1)
            << " bleu4=" << bleu(pairs, 4) << '\n';

  // Sample a caption and inspect the embedding space.
  RngState sample_rng{13, 0};
  const auto sampled =
      sample_caption(dataset.records[0].features, report.params, 30, sample_rng);
  std::cout << "sampled: " << join_tokens(decode(sampled, vocab)) << '\n';

  const std::string probe = vocab.token_of(3);  // most frequent corpus token
  const NeighborReport nb = nearest_neighbors(probe, 3, report.params, vocab);
  std::cout << "neighbors of '" << probe << "':";
  for (const auto& [token, sim] : nb.neighbors) {
    std::cout << ' ' << token << '(' << sim << ')';
  }
  std::cout << '\n';
  return 0;
}
