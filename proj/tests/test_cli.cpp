// capgen/tests/test_cli.cpp
//
// End-to-end subprocess tests for the command-line tool: the full
// synth/train/decode/evaluate pipeline, exit codes, and manifest contents.

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

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"

using namespace capgen;
using namespace capgen_test;

namespace {

std::map<std::string, std::string> kv_map(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool is_hex16(const std::string& s) {
  if (s.size() != 16) return false;
  for (char c : s) {
    if (!std::isxdigit(static_cast<unsigned char>(c)) ||
        (std::isalpha(static_cast<unsigned char>(c)) &&
         !std::islower(static_cast<unsigned char>(c)))) {
      return false;
    }
  }
  return true;
}

// Rebuilds one direction's score matrix from the tab-separated matrix dump.
ScoreMatrix parse_matrix(const std::string& text, const std::string& prefix) {
  std::vector<std::vector<double>> rows;
  std::vector<int> ground_truth;
  for (const std::string& line : split_lines(text)) {
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 4 || fields[0] != prefix) continue;
    ground_truth.push_back(std::stoi(fields[2]));
    std::vector<double> row;
    std::istringstream cells(fields[3]);
    double v = 0.0;
    while (cells >> v) row.push_back(v);
    rows.push_back(std::move(row));
  }
  REQUIRE(!rows.empty());
  ScoreMatrix m;
  m.scores = Matrix(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  m.ground_truth = ground_truth;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == rows[0].size());
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.scores(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
  }
  return m;
}

// Shared pipeline artifacts. Built once; subprocess training is the slow part.
struct Pipeline {
  TempDir dir{"cli"};
  std::string data = dir.file("data.json");
  std::string ckpt = dir.file("model.ckpt");

  Pipeline() {
    CliResult synth = run_cli("synth --out " + data +
                                  " --num-images 6 --feature-dim 3"
                                  " --vocab-words 12 --captions-per-image 5"
                                  " --seed 5",
                              dir);
    REQUIRE(synth.status == 0);
    CliResult train = run_cli("train --data " + data + " --out " + ckpt +
                                  " --hidden 8 --embed 8 --lr 0.1 --epochs 10"
                                  " --seed 3",
                              dir);
    REQUIRE(train.status == 0);
    train_stdout = train.out;
  }

  std::string train_stdout;
};

}  // namespace

TEST_CASE("cli full pipeline produces consistent reports", "[cli]") {
  Pipeline p;

  SECTION("train reports loss and writes checkpoint, vocab and log") {
    const auto report = kv_map(p.train_stdout);
    REQUIRE(report.count("final_mean_loss_per_word") == 1);
    CHECK(std::stod(report.at("final_mean_loss_per_word")) > 0.0);
    CHECK(report.at("epochs") == "10");
    // Realized vocabulary: words that occur in the corpus plus the three
    // reserved ids, bounded by the 12-word grammar budget.
    const int vocab_size = std::stoi(report.at("vocab_size"));
    CHECK(vocab_size >= 6);
    CHECK(vocab_size <= 15);

    CHECK(std::filesystem::file_size(p.ckpt) > 0);
    CHECK(std::filesystem::file_size(p.ckpt + ".vocab") > 0);
    const std::vector<std::string> log_lines = split_lines(slurp(p.ckpt + ".log"));
    REQUIRE(log_lines.size() == 10);
    for (std::size_t i = 0; i < log_lines.size(); ++i) {
      CHECK(log_lines[i].rfind(std::to_string(i) + "\t", 0) == 0);
    }
  }

  SECTION("train manifest lists inputs and outputs by content hash") {
    const auto manifest = kv_map(slurp(p.ckpt + ".manifest"));
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("seed") == "3");
    CHECK(manifest.at("lr") == "0.1");
    CHECK(manifest.at("shuffle") == "true");
    REQUIRE(manifest.count("input:" + p.data) == 1);
    REQUIRE(manifest.count("output:" + p.ckpt) == 1);
    REQUIRE(manifest.count("output:" + p.ckpt + ".vocab") == 1);
    REQUIRE(manifest.count("output:" + p.ckpt + ".log") == 1);
    int hashed = 0;
    for (const auto& [key, value] : manifest) {
      if (key.rfind("input:", 0) == 0 || key.rfind("output:", 0) == 0) {
        CHECK(is_hex16(value));
        ++hashed;
      }
      // Manifests must be reproducible byte for byte: no clocks, no pids.
      CHECK(key.find("time") == std::string::npos);
      CHECK(key.find("date") == std::string::npos);
      CHECK(key.find("pid") == std::string::npos);
    }
    CHECK(hashed == 4);
  }

  SECTION("beam width one reproduces greedy decoding") {
    const std::string shared = "caption --model " + p.ckpt + " --features " + p.data;
    CliResult beam1 = run_cli(shared + " --beam 1", p.dir);
    CliResult greedy = run_cli(shared + " --mode greedy", p.dir);
    REQUIRE(beam1.status == 0);
    REQUIRE(greedy.status == 0);
    CHECK(!beam1.out.empty());
    CHECK(beam1.out == greedy.out);
    const std::vector<std::string> lines = split_lines(beam1.out);
    REQUIRE(lines.size() == 6);
    for (const std::string& line : lines) {
      const std::vector<std::string> fields = split_tabs(line);
      REQUIRE(fields.size() == 2);
      CHECK(fields[0].rfind("synth-", 0) == 0);
    }
  }

  SECTION("n-best listing is ranked by log-probability") {
    CliResult nbest = run_cli("caption --model " + p.ckpt + " --features " +
                                  p.data + " --beam 3 --nbest 3",
                              p.dir);
    REQUIRE(nbest.status == 0);
    const std::vector<std::string> lines = split_lines(nbest.out);
    REQUIRE(lines.size() == 18);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::vector<std::string> fields = split_tabs(lines[i]);
      REQUIRE(fields.size() == 4);
      CHECK(fields[1] == std::to_string(i % 3 + 1));
      if (i % 3 != 0) {
        CHECK(std::stod(fields[2]) <= std::stod(split_tabs(lines[i - 1])[2]));
      }
    }
  }

  SECTION("sampling is reproducible per seed") {
    const std::string cmd = "caption --model " + p.ckpt + " --features " +
                            p.data + " --mode sample --seed 4";
    CliResult a = run_cli(cmd, p.dir);
    CliResult b = run_cli(cmd, p.dir);
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    CHECK(split_lines(a.out).size() == 6);
  }

  SECTION("evaluate reports bleu orders and perplexity") {
    const std::string out = p.dir.file("eval.txt");
    CliResult eval = run_cli("evaluate --model " + p.ckpt + " --data " + p.data +
                                 " --out " + out,
                             p.dir);
    REQUIRE(eval.status == 0);
    const auto report = kv_map(eval.out);
    for (int n = 1; n <= 4; ++n) {
      const double v = std::stod(report.at("bleu" + std::to_string(n)));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::stod(report.at("perplexity")) >= 1.0);
    CHECK(slurp(out) == eval.out);
    const auto manifest = kv_map(slurp(out + ".manifest"));
    CHECK(manifest.at("command") == "evaluate");
    CHECK(manifest.count("input:" + p.ckpt) == 1);
    CHECK(manifest.count("output:" + out) == 1);
  }

  SECTION("rank report agrees with the emitted score matrix") {
    const std::string out = p.dir.file("rank.txt");
    CliResult rank = run_cli("rank --model " + p.ckpt + " --data " + p.data +
                                 " --out " + out,
                             p.dir);
    REQUIRE(rank.status == 0);
    const auto report = kv_map(rank.out);
    CHECK(report.at("annotation_normalized") == "true");
    CHECK(report.at("search_normalized") == "false");
    CHECK(slurp(out) == rank.out);

    const std::string matrix_text = slurp(out + ".scores");
    for (const std::string prefix : {"annotation", "search"}) {
      const ScoreMatrix m = parse_matrix(matrix_text, prefix);
      CHECK(m.scores.rows == 6);
      CHECK(m.scores.cols == 6);
      for (int i = 0; i < 6; ++i) CHECK(m.ground_truth[i] == i);
      for (int k : {1, 5}) {
        const double reported =
            std::stod(report.at(prefix + "_r@" + std::to_string(k)));
        CHECK(reported == Catch::Approx(recall_at_k(m, k)).margin(1e-9));
      }
      const double medr = std::stod(report.at(prefix + "_medr"));
      CHECK(medr == Catch::Approx(median_rank(m)).margin(1e-9));
    }
  }

  SECTION("neighbors lists k similar words with valid cosines") {
    CliResult nb = run_cli("neighbors --model " + p.ckpt + " --word the --k 3",
                           p.dir);
    REQUIRE(nb.status == 0);
    const std::vector<std::string> lines = split_lines(nb.out);
    REQUIRE(lines.size() == 3);
    double prev = 1.0;
    for (const std::string& line : lines) {
      const std::vector<std::string> fields = split_tabs(line);
      REQUIRE(fields.size() == 2);
      CHECK(fields[0] != "the");
      const double sim = std::stod(fields[1]);
      CHECK(sim <= prev + 1e-12);
      CHECK(sim >= -1.0 - 1e-12);
      CHECK(sim <= 1.0 + 1e-12);
      prev = sim;
    }
  }

  SECTION("identical reference groups give a leave-one-out bleu of one") {
    // Fixed-length sentences make all five captions of a record identical.
    CliResult human = run_cli("human-baseline --data " + p.data, p.dir);
    REQUIRE(human.status == 0);
    const auto report = kv_map(human.out);
    CHECK(std::stod(report.at("human_bleu")) == 1.0);
  }

  SECTION("ensembling a checkpoint with itself matches the single model") {
    const std::string shared = " --features " + p.data + " --beam 1";
    CliResult solo = run_cli("caption --model " + p.ckpt + shared, p.dir);
    CliResult duo = run_cli("caption --model " + p.ckpt + " --model " + p.ckpt +
                                shared,
                            p.dir);
    REQUIRE(solo.status == 0);
    REQUIRE(duo.status == 0);
    CHECK(solo.out == duo.out);
  }
}

TEST_CASE("cli synth output is byte-identical across reruns", "[cli]") {
  TempDir dir("cli-synth");
  const std::string data = dir.file("d.json");
  const std::string args = "synth --out " + data +
                           " --num-images 4 --feature-dim 2 --vocab-words 10"
                           " --seed 9";
  REQUIRE(run_cli(args, dir).status == 0);
  const std::string bytes1 = slurp(data);
  const std::string manifest1 = slurp(data + ".manifest");
  REQUIRE(run_cli(args, dir).status == 0);
  CHECK(slurp(data) == bytes1);
  CHECK(slurp(data + ".manifest") == manifest1);

  REQUIRE(run_cli("synth --out " + data +
                      " --num-images 4 --feature-dim 2 --vocab-words 10"
                      " --seed 10",
                  dir)
              .status == 0);
  CHECK(slurp(data) != bytes1);
}

TEST_CASE("cli usage errors exit with status two", "[cli]") {
  TempDir dir("cli-usage");

  SECTION("no subcommand") {
    CliResult r = run_cli("", dir);
    CHECK(r.status == 2);
    CHECK(!r.err.empty());
  }
  SECTION("unknown flag") {
    CliResult r = run_cli("synth --out x.json --bogus 3", dir);
    CHECK(r.status == 2);
    CHECK(!r.err.empty());
  }
  SECTION("missing required option") {
    CliResult r = run_cli("caption --features f.json", dir);
    CHECK(r.status == 2);
  }
  SECTION("value outside the allowed set") {
    CliResult r = run_cli("caption --model m --features f --mode walrus", dir);
    CHECK(r.status == 2);
  }
  SECTION("help exits clean and names the subcommands") {
    CliResult r = run_cli("--help", dir);
    CHECK(r.status == 0);
    CHECK(r.out.find("train") != std::string::npos);
    CHECK(r.out.find("caption") != std::string::npos);
    CHECK(r.out.find("evaluate") != std::string::npos);
  }
}

TEST_CASE("cli module errors exit with status one", "[cli]") {
  TempDir dir("cli-module");

  SECTION("missing checkpoint") {
    CliResult r = run_cli("caption --model " + dir.file("absent.ckpt") +
                              " --features " + dir.file("absent.json"),
                          dir);
    CHECK(r.status == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
  }
  SECTION("unparseable dataset") {
    const std::string bad = dir.file("bad.json");
    std::ofstream(bad) << "this is not a dataset\n";
    CliResult r = run_cli("train --data " + bad + " --out " + dir.file("m.ckpt"),
                          dir);
    CHECK(r.status == 1);
    CHECK(r.err.rfind("error:", 0) == 0);
  }
  SECTION("n-best outside beam mode") {
    CliResult r = run_cli("caption --model m --features f --mode greedy"
                          " --nbest 2",
                          dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("nbest") != std::string::npos);
  }
  SECTION("invalid synthetic grammar size") {
    CliResult r = run_cli("synth --out " + dir.file("d.json") + " --vocab-words 5",
                          dir);
    CHECK(r.status == 1);
  }
}
