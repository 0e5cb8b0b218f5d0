#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtnmt/cli.hpp"
#include "mtnmt/corpus.hpp"
#include "mtnmt/experiments.hpp"
#include "mtnmt/scheduling.hpp"
#include "../support/tmpdir.hpp"

using namespace mtnmt;
using test_support::TmpDir;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

struct CerrCapture {
  std::ostringstream text;
  std::streambuf* old = std::cerr.rdbuf(text.rdbuf());
  ~CerrCapture() { std::cerr.rdbuf(old); }
};

int run_cli(const std::vector<std::string>& args,
            std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::vector<const char*> argv;
  argv.push_back("mtnmt");
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  CerrCapture cap;
  int rc = cli_main(int(argv.size()), argv.data(), out);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = cap.text.str();
  return rc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

size_t line_count(const std::string& path) {
  std::string text = slurp(path);
  size_t n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

std::string write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
  return path;
}

// A small aligned corpus the train/translate cases share.
std::string toy_manifest(const std::string& dir) {
  ToyCorpusConfig cfg;
  cfg.languages = {"aa", "en"};
  cfg.concepts = 20;
  cfg.bitext_sizes = {{{"aa", "en"}, 30}};
  cfg.mono_sizes = {{"en", {MonoSide::Both, 20}}};
  return write_toy_corpus(cfg, dir, 11);
}

const std::vector<std::string> kTinyModel{
    "--accumulation", "1", "--batch-tokens", "64",  "--d-model",   "16",
    "--d-ff",         "32", "--heads",        "2",   "--enc-layers", "1",
    "--dec-layers",   "1",  "--vocab-size",   "120", "--no-mlm",
    "--no-dae",       "--warmup-steps", "8"};

std::vector<std::string> tiny_train(const std::string& manifest,
                                    const std::string& out_dir,
                                    std::vector<std::string> extra) {
  std::vector<std::string> args{"train",  "--manifest", manifest,
                                "--out",  out_dir,      "--seed",
                                "4"};
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

TEST_CASE("top-level help enumerates every subcommand flag") {
  std::string text;
  CHECK(run_cli({"--help"}, &text) == 0);
  for (const char* name :
       {"prepare-data", "train", "backtranslate", "translate", "score-bleu",
        "inspect-schedule", "run-experiment"})
    CHECK(text.find(name) != std::string::npos);
  for (const char* flag :
       {"--manifest", "--config", "--seed", "--out", "--model", "--mono",
        "--src", "--tgt-lang", "--beam", "--alpha", "--hyp", "--ref",
        "--workers", "--preset", "--tsv", "--epochs", "--vocab-size",
        "--updates", "--peak-lr", "--max-per-pair", "--norm", "--resume",
        "--t0", "--tm", "--t-warmup", "--mlm-r0", "--dae-rm"})
    CHECK(text.find(flag) != std::string::npos);

  SUBCASE("subcommand help stands alone") {
    std::string sub;
    CHECK(run_cli({"train", "--help"}, &sub) == 0);
    CHECK(sub.find("--peak-lr") != std::string::npos);
    CHECK(sub.find("score-bleu") == std::string::npos);
  }
}

TEST_CASE("argument mistakes exit with the usage code") {
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"score-bleu", "--hyp", "x"}) == 1);          // --ref missing
  CHECK(run_cli({"train", "--manifest", "m"}) == 1);          // --out missing
  CHECK(run_cli({"no-such-command"}) == 1);
  CHECK(run_cli({"run-experiment", "--preset", "nope", "--out", "x"}) == 1);
  TmpDir tmp("cliusage");
  std::string m = toy_manifest(tmp.path().string() + "/corpus");
  CHECK(run_cli(tiny_train(m, tmp.path().string() + "/t", {"--preset", "nope"})) == 1);
  CHECK(run_cli({"backtranslate", "--model", "x", "--out", "y"}) == 1);
  CHECK(run_cli({"backtranslate", "--model", "x", "--out", "y", "--manifest",
                 "m", "--mono", "f"}) == 1);
  CHECK(run_cli({"backtranslate", "--model", "x", "--out", "y", "--mono",
                 "f"}) == 1);  // languages missing
  CHECK(run_cli({"inspect-schedule", "--epochs", "0"}) == 1);
}

TEST_CASE("unreadable inputs exit with the data code") {
  TmpDir tmp("clidata");
  CHECK(run_cli({"score-bleu", "--hyp", tmp.path().string() + "/no.txt", "--ref",
                 tmp.path().string() + "/no.txt"}) == 2);
  CHECK(run_cli({"train", "--manifest", tmp.path().string() + "/no.json", "--out",
                 tmp.path().string() + "/t"}) == 2);
  CHECK(run_cli({"translate", "--model", tmp.path().string() + "/no.ckpt", "--src",
                 "x", "--tgt-lang", "en"}) == 2);
}

TEST_CASE("bleu scoring reads files and reports the full breakdown") {
  TmpDir tmp("clibleu");
  std::string hyp = write_file(tmp.path().string() + "/hyp.txt",
                               "the cat sat on the mat\nhello world\n");
  std::string text;
  CHECK(run_cli({"score-bleu", "--hyp", hyp, "--ref", hyp}, &text) == 0);
  CHECK(text.find("BLEU = 100.00") != std::string::npos);
  CHECK(text.find("precisions = 100.0/100.0/100.0/100.0") !=
        std::string::npos);
  CHECK(text.find("brevity_penalty = 1.000") != std::string::npos);
}

TEST_CASE("schedule table matches the closed-form ramps") {
  std::string text;
  CHECK(run_cli({"inspect-schedule", "--epochs", "8", "--t0", "1", "--tm",
                 "5", "--t-warmup", "5", "--mlm-r0", "0.1", "--mlm-rm", "0.2",
                 "--mlm-warmup", "5", "--dae-r0", "0.2", "--dae-rm", "0.4",
                 "--dae-warmup", "5", "--tsv"},
                &text) == 0);
  TemperatureSchedule ts{1.0, 5.0, 5};
  NoiseSchedule mlm{0.1, 0.2, 5}, dae{0.2, 0.4, 5};

  std::istringstream lines(text);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "k\ttemperature\tmlm_ratio\tdae_ratio");
  for (int64_t k = 1; k <= 8; ++k) {
    REQUIRE(std::getline(lines, line));
    std::istringstream cols(line);
    std::string c0, c1, c2, c3;
    REQUIRE(std::getline(cols, c0, '\t'));
    REQUIRE(std::getline(cols, c1, '\t'));
    REQUIRE(std::getline(cols, c2, '\t'));
    REQUIRE(std::getline(cols, c3, '\t'));
    CHECK(std::stoll(c0) == k);
    // %.17g round-trips doubles, so exact equality is the right bar
    CHECK(std::strtod(c1.c_str(), nullptr) == temperature_at(ts, k));
    CHECK(std::strtod(c2.c_str(), nullptr) == noise_ratio_at(mlm, k));
    CHECK(std::strtod(c3.c_str(), nullptr) == noise_ratio_at(dae, k));
  }
  CHECK_FALSE(std::getline(lines, line));

  SUBCASE("a manifest adds per-pair sampling probability columns") {
    TmpDir tmp("clisched");
    ToyCorpusConfig cfg;
    cfg.languages = {"aa", "bb", "en"};
    cfg.concepts = 20;
    cfg.bitext_sizes = {{{"aa", "en"}, 40}, {{"bb", "en"}, 10}};
    std::string m = write_toy_corpus(cfg, tmp.path().string(), 5);

    std::string ptext;
    CHECK(run_cli({"inspect-schedule", "--epochs", "2", "--t0", "1", "--tm",
                   "3", "--t-warmup", "2", "--manifest", m, "--tsv"},
                  &ptext) == 0);
    auto sizes = corpus_sizes(load_manifest(m));
    REQUIRE(sizes.size() == 2);

    std::istringstream plines(ptext);
    std::string pline;
    REQUIRE(std::getline(plines, pline));
    CHECK(pline == "k\ttemperature\tmlm_ratio\tdae_ratio\tp(aa-en)\tp(bb-en)");
    TemperatureSchedule ts2{1.0, 3.0, 2};
    for (int64_t k = 1; k <= 2; ++k) {
      REQUIRE(std::getline(plines, pline));
      std::vector<std::string> cells;
      std::istringstream cols(pline);
      std::string c;
      while (std::getline(cols, c, '\t')) cells.push_back(c);
      REQUIRE(cells.size() == 6);
      auto probs = pair_sampling_probs(sizes, temperature_at(ts2, k));
      CHECK(std::strtod(cells[4].c_str(), nullptr) ==
            probs.at({"aa", "en"}));
      CHECK(std::strtod(cells[5].c_str(), nullptr) ==
            probs.at({"bb", "en"}));
    }
  }
}

TEST_CASE("prepare-data writes the vocabulary and corpus statistics") {
  TmpDir tmp("cliprep");
  std::string m = toy_manifest(tmp.path().string() + "/corpus");
  std::string text;
  CHECK(run_cli({"prepare-data", "--manifest", m, "--out", tmp.path().string() + "/p",
                 "--vocab-size", "120", "--workers", "2"},
                &text) == 0);
  CHECK(fs::exists(tmp.path().string() + "/p/vocab.txt"));
  CHECK(fs::exists(tmp.path().string() + "/p/stats.json"));
  CHECK(text.find("vocabulary:") != std::string::npos);

  std::string stats = slurp(tmp.path().string() + "/p/stats.json");
  CHECK(stats.find("\"tokens\"") != std::string::npos);
  CHECK(stats.find("aa-en") != std::string::npos);

  SUBCASE("the worker count does not change the statistics") {
    std::string t2;
    CHECK(run_cli({"prepare-data", "--manifest", m, "--out",
                   tmp.path().string() + "/q", "--vocab-size", "120", "--workers",
                   "1"},
                  &t2) == 0);
    CHECK(slurp(tmp.path().string() + "/q/stats.json") == stats);
    CHECK(slurp(tmp.path().string() + "/q/vocab.txt") ==
          slurp(tmp.path().string() + "/p/vocab.txt"));
  }
}

TEST_CASE("train, resume, translate, back-translate and score end to end") {
  TmpDir tmp("cliflow");
  std::string m = toy_manifest(tmp.path().string() + "/corpus");
  std::string run = tmp.path().string() + "/run";

  std::string text;
  CHECK(run_cli(tiny_train(m, run, {"--updates", "4"}), &text) == 0);
  CHECK(text.find("trained 4 updates") != std::string::npos);
  CHECK(fs::exists(run + "/vocab.txt"));
  CHECK(fs::exists(run + "/model.ckpt"));
  CHECK(line_count(run + "/metrics.jsonl") == 4);

  SUBCASE("resume picks up at the saved update and extends the log") {
    std::string rtext;
    CHECK(run_cli(tiny_train(m, run, {"--updates", "6", "--resume"}),
                  &rtext) == 0);
    CHECK(rtext.find("resuming") != std::string::npos);
    CHECK(rtext.find("through update 6") != std::string::npos);
    CHECK(line_count(run + "/metrics.jsonl") == 6);
  }

  SUBCASE("translate decodes a file and score-bleu accepts the output") {
    std::string src = write_file(tmp.path().string() + "/src.aa",
                                 "aa1 aa2 aa3\naa7 aa8 aa9 aa10\n");
    std::string hyp = tmp.path().string() + "/hyp.en";
    CHECK(run_cli({"translate", "--model", run + "/model.ckpt", "--src", src,
                   "--tgt-lang", "en", "--beam", "2", "--out", hyp}) == 0);
    CHECK(line_count(hyp) == 2);

    std::string stdout_text;
    CHECK(run_cli({"translate", "--model", run + "/model.ckpt", "--src", src,
                   "--tgt-lang", "en", "--beam", "1"},
                  &stdout_text) == 0);
    size_t newlines = 0;
    for (char c : stdout_text) newlines += c == '\n' ? 1 : 0;
    CHECK(newlines == 2);

    std::string score;
    CHECK(run_cli({"score-bleu", "--hyp", hyp, "--ref", src}, &score) == 0);
    CHECK(score.find("BLEU = ") != std::string::npos);
  }

  SUBCASE("single-file back-translation writes an aligned pair of files") {
    std::string mono = write_file(tmp.path().string() + "/mono.en",
                                  "en1 en2 en3\nen4 en5 en6\nen7 en8 en9\n");
    std::string prefix = tmp.path().string() + "/bt";
    std::string bttext;
    CHECK(run_cli({"backtranslate", "--model", run + "/model.ckpt", "--mono",
                   mono, "--src-lang", "aa", "--tgt-lang", "en", "--out",
                   prefix, "--beam", "2", "--max-per-pair", "2"},
                  &bttext) == 0);
    CHECK(line_count(prefix + ".aa") == line_count(prefix + ".en"));
    CHECK(line_count(prefix + ".en") <= 2);
  }
}

TEST_CASE("config files sit between presets and flags") {
  TmpDir tmp("clicfg");
  std::string m = toy_manifest(tmp.path().string() + "/corpus");

  std::string cfg3 = write_file(tmp.path().string() + "/c3.json",
                                "{\"train\": {\"updates\": 3}}");
  CHECK(run_cli(tiny_train(m, tmp.path().string() + "/a", {"--config", cfg3})) == 0);
  CHECK(line_count(tmp.path().string() + "/a/metrics.jsonl") == 3);

  SUBCASE("a flag overrides the config file") {
    CHECK(run_cli(tiny_train(m, tmp.path().string() + "/b",
                             {"--config", cfg3, "--updates", "2"})) == 0);
    CHECK(line_count(tmp.path().string() + "/b/metrics.jsonl") == 2);
  }

  SUBCASE("the config file overrides a preset") {
    // toy-overfit alone would run 2000 updates; the file cuts it to 3 and
    // the flags shrink the model so the case stays quick
    CHECK(run_cli(tiny_train(m, tmp.path().string() + "/c",
                             {"--preset", "toy-overfit", "--config", cfg3})) ==
          0);
    CHECK(line_count(tmp.path().string() + "/c/metrics.jsonl") == 3);
  }

  SUBCASE("unknown config keys are rejected") {
    std::string bad = write_file(tmp.path().string() + "/bad.json",
                                 "{\"model\": {\"width\": 64}}");
    CHECK(run_cli(tiny_train(m, tmp.path().string() + "/d", {"--config", bad})) == 1);
  }

  SUBCASE("malformed config JSON is a data error") {
    std::string broken = write_file(tmp.path().string() + "/broken.json", "{");
    CHECK(run_cli(tiny_train(m, tmp.path().string() + "/e", {"--config", broken})) ==
          2);
  }
}

TEST_CASE("a diverging run exits with the numerical code") {
  TmpDir tmp("cliboom");
  std::string m = toy_manifest(tmp.path().string() + "/corpus");
  std::string err;
  CHECK(run_cli(tiny_train(m, tmp.path().string() + "/t",
                           {"--updates", "30", "--peak-lr", "inf"}),
                nullptr, &err) == 3);
  CHECK(err.find("non-finite") != std::string::npos);
}

TEST_CASE("run-experiment reports a failed threshold through the exit code") {
  TmpDir tmp("cliexp");
  std::string text;
  int rc = run_cli({"run-experiment", "--preset", "toy-overfit", "--seed",
                    "1", "--out", tmp.path().string() + "/e", "--updates", "2"},
                   &text);
  CHECK(rc == 4);
  CHECK(text.find("FAIL") != std::string::npos);
  CHECK(text.find("toy-overfit") != std::string::npos);
  CHECK(fs::exists(tmp.path().string() + "/e/summary.txt"));
  CHECK(fs::exists(tmp.path().string() + "/e/summary.json"));
}

TEST_SUITE_END();
