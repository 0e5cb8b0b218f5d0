#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mtnmt/error.hpp"
#include "mtnmt/scheduling.hpp"
#include "../support/stats.hpp"
#include "../support/tmpdir.hpp"

using namespace mtnmt;
using test_support::TmpDir;

TEST_SUITE_BEGIN("scheduling");

TEST_CASE("temperature ramp matches the closed form to 1e-12") {
  TemperatureSchedule s{1.0, 5.0, 5};
  CHECK(temperature_at(s, 1) == 1.0);
  CHECK(temperature_at(s, 3) == doctest::Approx(2.6).epsilon(1e-13));
  CHECK(temperature_at(s, 100) == 5.0);
  CHECK(temperature_at(s, 6) == 5.0);

  double prev = 0;
  for (int k = 1; k <= 50; ++k) {
    double expect = std::min(s.tm, (k - 1) * (s.tm - s.t0) / s.warmup + s.t0);
    double got = temperature_at(s, k);
    CHECK(std::abs(got - expect) <= 1e-12);
    CHECK(got >= prev);
    prev = got;
  }
  CHECK_THROWS_AS(temperature_at(s, 0), UsageError);
}

TEST_CASE("noise ratio ramp hits its endpoints") {
  NoiseSchedule mlm{0.10, 0.20, 5};
  CHECK(noise_ratio_at(mlm, 1) == 0.10);
  CHECK(noise_ratio_at(mlm, 6) == doctest::Approx(0.20).epsilon(1e-13));
  CHECK(noise_ratio_at(mlm, 60) == 0.20);

  NoiseSchedule dae{0.20, 0.40, 5};
  CHECK(noise_ratio_at(dae, 1) == 0.20);

  NoiseSchedule m4{0.10, 0.20, 4};
  CHECK(noise_ratio_at(m4, 3) == doctest::Approx(0.15).epsilon(1e-13));

  for (int k = 1; k <= 40; ++k) {
    double expect = std::min(dae.rm, (k - 1) * (dae.rm - dae.r0) / dae.warmup + dae.r0);
    CHECK(std::abs(noise_ratio_at(dae, k) - expect) <= 1e-12);
  }
  CHECK_THROWS_AS(noise_ratio_at(mlm, 0), UsageError);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(temperature_at({0.0, 5.0, 5}, 1), UsageError);
  CHECK_THROWS_AS(temperature_at({2.0, 1.0, 5}, 1), UsageError);
  CHECK_THROWS_AS(temperature_at({1.0, 5.0, 0}, 1), UsageError);
  CHECK_THROWS_AS(noise_ratio_at({0.3, 0.2, 5}, 1), UsageError);
  CHECK_THROWS_AS(noise_ratio_at({0.1, 1.2, 5}, 1), UsageError);
}

TEST_CASE("sampling probabilities at named temperatures") {
  std::map<PairKey, size_t> sizes{{{"a", "en"}, 9}, {{"b", "en"}, 1}};
  auto p1 = pair_sampling_probs(sizes, 1.0);
  CHECK(p1.at({"a", "en"}) == doctest::Approx(0.9).epsilon(1e-13));
  CHECK(p1.at({"b", "en"}) == doctest::Approx(0.1).epsilon(1e-13));

  // (9/10)^(1/2) : (1/10)^(1/2) = 3 : 1
  auto p2 = pair_sampling_probs(sizes, 2.0);
  CHECK(p2.at({"a", "en"}) == doctest::Approx(0.75).epsilon(1e-13));
  CHECK(p2.at({"b", "en"}) == doctest::Approx(0.25).epsilon(1e-13));

  std::map<PairKey, size_t> even{{{"a", "en"}, 5}, {{"b", "en"}, 5}};
  for (double t : {0.5, 1.0, 3.0, 100.0}) {
    auto p = pair_sampling_probs(even, t);
    CHECK(p.at({"a", "en"}) == doctest::Approx(0.5).epsilon(1e-13));
  }
}

TEST_CASE("probabilities normalize, flatten with temperature, keep argmax") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<LanguageId, size_t> sizes;
    int n = 2 + static_cast<int>(rng.uniform_int(6));
    for (int i = 0; i < n; ++i)
      sizes["l" + std::to_string(i)] = 1 + rng.uniform_int(100000);

    LanguageId size_argmax;
    size_t best = 0;
    for (auto& [lang, sz] : sizes)
      if (sz > best) best = sz, size_argmax = lang;

    double prev_entropy = -1;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0, 32.0}) {
      auto probs = lang_sampling_probs(sizes, t);
      double sum = 0, entropy = 0;
      LanguageId prob_argmax;
      double pbest = -1;
      for (auto& [lang, p] : probs) {
        sum += p;
        if (p > 0) entropy -= p * std::log(p);
        if (p > pbest) pbest = p, prob_argmax = lang;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      CHECK(entropy >= prev_entropy - 1e-12);
      CHECK(prob_argmax == size_argmax);
      prev_entropy = entropy;
    }
  }
}

TEST_CASE("sampling distribution errors") {
  CHECK_THROWS_AS(pair_sampling_probs({}, 1.0), UsageError);
  std::map<PairKey, size_t> z{{{"a", "en"}, 0}};
  CHECK_THROWS_AS(pair_sampling_probs(z, 1.0), DataError);
  std::map<PairKey, size_t> ok{{{"a", "en"}, 3}};
  CHECK_THROWS_AS(pair_sampling_probs(ok, 0.0), UsageError);
}

TEST_CASE("sentence pool cycles every index once per pass") {
  SentencePool pool("t", 17, 42);
  for (int pass = 0; pass < 3; ++pass) {
    std::set<size_t> seen;
    for (int i = 0; i < 17; ++i) seen.insert(pool.next_index());
    CHECK(seen.size() == 17);
  }
}

TEST_CASE("sentence pool state round-trips mid-cycle") {
  SentencePool a("t", 31, 7);
  for (int i = 0; i < 11; ++i) {
    a.next_index();
    a.next_noise_seed();
  }
  auto st = a.state();

  SentencePool b("t", 31, 7);
  b.restore(st);
  for (int i = 0; i < 80; ++i) {
    CHECK(a.next_index() == b.next_index());
    CHECK(a.next_noise_seed() == b.next_noise_seed());
  }
  SentencePool c("other", 31, 7);
  CHECK_THROWS_AS(c.restore(st), DataError);
}

namespace {

// Two-pair x2en setup with a 9:1 size skew, plus mono on both sides.
std::string mixer_manifest(TmpDir& dir, int big = 90, int small = 10) {
  std::ostringstream a_src, a_tgt, b_src, b_tgt, mono_a, mono_b, mono_en;
  for (int i = 0; i < big; ++i) {
    a_src << "ka s" << i << " t" << (i % 7) << "\n";
    a_tgt << "en s" << i << " t" << (i % 7) << "\n";
    mono_en << "en m" << i << " u" << (i % 5) << "\n";
  }
  for (int i = 0; i < small; ++i) {
    b_src << "bo s" << i << " t" << (i % 3) << "\n";
    b_tgt << "en r" << i << " t" << (i % 3) << "\n";
    mono_b << "bo m" << i << " w" << (i % 2) << "\n";
  }
  for (int i = 0; i < 40; ++i) mono_a << "ka m" << i << " v" << (i % 5) << "\n";
  dir.write("a.src", a_src.str());
  dir.write("a.tgt", a_tgt.str());
  dir.write("b.src", b_src.str());
  dir.write("b.tgt", b_tgt.str());
  dir.write("mono.aa", mono_a.str());
  dir.write("mono.bb", mono_b.str());
  dir.write("mono.en", mono_en.str());
  return dir.write("manifest.json", R"({
    "version": 1,
    "languages": ["aa", "bb", "en"],
    "direction": "x2en",
    "bitext": [
      {"src": "aa", "tgt": "en", "src_file": "a.src", "tgt_file": "a.tgt"},
      {"src": "bb", "tgt": "en", "src_file": "b.src", "tgt_file": "b.tgt"}
    ],
    "mono": [
      {"lang": "aa", "side": "source", "file": "mono.aa"},
      {"lang": "bb", "side": "source", "file": "mono.bb"},
      {"lang": "en", "side": "target", "file": "mono.en"}
    ]
  })");
}

SubwordVocab mixer_vocab(const CorpusManifest& m) {
  std::vector<std::string> all;
  for (const auto& b : m.bitext)
    for (const auto& [s, t] : b.pairs) {
      all.push_back(s);
      all.push_back(t);
    }
  for (const auto& mo : m.mono)
    all.insert(all.end(), mo.sentences.begin(), mo.sentences.end());
  return train_vocab(all, m.languages, 400);
}

}  // namespace

TEST_CASE("mixer emits one batch per task and respects task data sides") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir));
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 24;
  BatchMixer mixer(m, v, cfg, 5);

  for (int step = 0; step < 50; ++step) {
    auto batches = mixer.next_batches();
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].task == Task::MT);
    CHECK(batches[1].task == Task::MLM);
    CHECK(batches[2].task == Task::DAE);
    CHECK(batches[1].lang != "en");  // source-side mono only
    CHECK(batches[2].lang == "en");  // target-side mono only
    for (const auto& b : batches) CHECK(!b.examples.empty());

    for (const auto& ex : batches[0].examples) {
      CHECK(ex.input_ids.back() == v.lid("en"));
      CHECK(ex.loss_mask.size() == ex.target_ids.size());
    }
    for (const auto& ex : batches[1].examples) CHECK(ex.lid == -1);
    for (const auto& ex : batches[2].examples)
      CHECK(ex.input_ids.back() == v.lid("en"));
  }
}

TEST_CASE("mixer pair draws follow the temperature-adjusted distribution") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir));
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 1;  // one sentence per batch keeps draws cheap
  cfg.temperature = {2.0, 2.0, 1};  // fixed T = 2
  cfg.use_mlm = false;
  cfg.use_dae = false;
  BatchMixer mixer(m, v, cfg, 11);

  const int draws = 20000;
  std::map<PairKey, double> counts;
  for (int i = 0; i < draws; ++i)
    counts[mixer.next_batches()[0].pair] += 1;

  // sizes 90:10 at T=2 -> 3:1
  std::vector<double> observed{counts[{"aa", "en"}], counts[{"bb", "en"}]};
  std::vector<double> expected{0.75 * draws, 0.25 * draws};
  CHECK(test_support::chi_square_p(observed, expected) > 0.001);
}

TEST_CASE("mixer advances epochs by bitext consumption") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir, 6, 4));  // epoch = 10 sentences
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 1;  // one sentence per MT batch
  BatchMixer mixer(m, v, cfg, 3);
  CHECK(mixer.epoch() == 1);
  for (int i = 0; i < 10; ++i) mixer.next_batches();
  CHECK(mixer.epoch() == 2);
  for (int i = 0; i < 10; ++i) mixer.next_batches();
  CHECK(mixer.epoch() == 3);
  CHECK(mixer.updates_done() == 20);
}

TEST_CASE("mixer ramps its schedules with the epoch") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir, 6, 4));
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 1;
  cfg.temperature = {1.0, 5.0, 4};
  cfg.mlm_noise = {0.10, 0.20, 4};
  cfg.dae_noise = {0.20, 0.40, 4};
  BatchMixer mixer(m, v, cfg, 3);

  CHECK(mixer.current_temperature() == doctest::Approx(1.0));
  CHECK(mixer.current_mlm_ratio() == doctest::Approx(0.10));
  for (int i = 0; i < 10; ++i) mixer.next_batches();  // epoch 2
  CHECK(mixer.current_temperature() == doctest::Approx(2.0));
  CHECK(mixer.current_mlm_ratio() == doctest::Approx(0.125));
  CHECK(mixer.current_dae_ratio() == doctest::Approx(0.25));
  for (int i = 0; i < 40; ++i) mixer.next_batches();  // past warmup
  CHECK(mixer.current_temperature() == doctest::Approx(5.0));
  CHECK(mixer.current_dae_ratio() == doctest::Approx(0.40));
}

TEST_CASE("mixer replays exactly under the same seed") {
  TmpDir dir("mixer");
  auto path = mixer_manifest(dir);
  auto m = load_manifest(path);
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 16;
  BatchMixer m1(m, v, cfg, 123);
  BatchMixer m2(m, v, cfg, 123);
  for (int i = 0; i < 30; ++i) {
    auto b1 = m1.next_batches();
    auto b2 = m2.next_batches();
    REQUIRE(b1.size() == b2.size());
    for (size_t j = 0; j < b1.size(); ++j) {
      CHECK(b1[j].pair == b2[j].pair);
      CHECK(b1[j].lang == b2[j].lang);
      REQUIRE(b1[j].examples.size() == b2[j].examples.size());
      for (size_t e = 0; e < b1[j].examples.size(); ++e) {
        CHECK(b1[j].examples[e].input_ids == b2[j].examples[e].input_ids);
        CHECK(b1[j].examples[e].target_ids == b2[j].examples[e].target_ids);
      }
    }
  }

  // a different seed diverges quickly
  BatchMixer m3(m, v, cfg, 124);
  bool any_diff = false;
  auto fresh = BatchMixer(m, v, cfg, 123);
  for (int i = 0; i < 5 && !any_diff; ++i) {
    auto b1 = fresh.next_batches();
    auto b3 = m3.next_batches();
    for (size_t j = 0; j < b1.size() && !any_diff; ++j)
      any_diff = b1[j].examples.size() != b3[j].examples.size() ||
                 b1[j].examples[0].input_ids != b3[j].examples[0].input_ids;
  }
  CHECK(any_diff);
}

TEST_CASE("mixer state restore resumes the exact stream") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir));
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 16;
  BatchMixer gold(m, v, cfg, 77);
  for (int i = 0; i < 17; ++i) gold.next_batches();
  auto snapshot = gold.state();

  BatchMixer resumed(m, v, cfg, 77);
  resumed.restore(snapshot);
  CHECK(resumed.epoch() == gold.epoch());
  CHECK(resumed.updates_done() == gold.updates_done());
  for (int i = 0; i < 25; ++i) {
    auto bg = gold.next_batches();
    auto br = resumed.next_batches();
    REQUIRE(bg.size() == br.size());
    for (size_t j = 0; j < bg.size(); ++j) {
      CHECK(bg[j].pair == br[j].pair);
      CHECK(bg[j].lang == br[j].lang);
      REQUIRE(bg[j].examples.size() == br[j].examples.size());
      for (size_t e = 0; e < bg[j].examples.size(); ++e)
        CHECK(bg[j].examples[e].input_ids == br[j].examples[e].input_ids);
    }
  }
}

TEST_CASE("mixer configuration errors") {
  TmpDir dir("mixer");
  auto m = load_manifest(mixer_manifest(dir));
  auto v = mixer_vocab(m);

  MixConfig cfg;
  cfg.batch_tokens = 0;
  CHECK_THROWS_AS(BatchMixer(m, v, cfg, 1), UsageError);

  // strip mono but keep the masking task enabled
  auto stripped = m;
  stripped.mono.clear();
  MixConfig cfg2;
  CHECK_THROWS_AS(BatchMixer(stripped, v, cfg2, 1), UsageError);
}

TEST_SUITE_END();
