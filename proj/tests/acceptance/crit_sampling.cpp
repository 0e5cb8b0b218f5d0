#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "mtnmt/corpus.hpp"
#include "mtnmt/experiments.hpp"
#include "mtnmt/rng.hpp"
#include "mtnmt/scheduling.hpp"
#include "mtnmt/tokenizer.hpp"
#include "../support/stats.hpp"
#include "../support/tmpdir.hpp"

namespace acceptance {

Outcome check_sampling() {
  using namespace mtnmt;

  // 100k mixer draws against the temperature-adjusted law
  test_support::TmpDir tmp("acc-sampling");
  ToyCorpusConfig tc;
  tc.languages = {"aa", "bb", "cc", "dd", "en"};
  tc.concepts = 40;
  tc.bitext_sizes = {{{"aa", "en"}, 30},
                     {{"bb", "en"}, 60},
                     {{"cc", "en"}, 120},
                     {{"dd", "en"}, 240}};
  CorpusManifest m =
      load_manifest(write_toy_corpus(tc, tmp.path().string(), 91));
  SubwordVocab vocab = train_vocab(manifest_text(m), m.languages, 200);

  MixConfig cfg;
  cfg.batch_tokens = 1;  // one sentence per draw
  cfg.temperature = {3.0, 3.0, 1};
  cfg.use_mlm = false;
  cfg.use_dae = false;
  BatchMixer mixer(m, vocab, cfg, 17);

  const int draws = 100000;
  std::map<PairKey, double> counts;
  for (int i = 0; i < draws; ++i) counts[mixer.next_batches()[0].pair] += 1;

  auto probs = pair_sampling_probs(corpus_sizes(m), 3.0);
  std::vector<double> observed, expected;
  for (const auto& [pk, p] : probs) {
    observed.push_back(counts[pk]);
    expected.push_back(p * draws);
  }
  double p_value = test_support::chi_square_p(observed, expected);

  // flattening: entropy must not decrease as the temperature rises
  bool entropy_ok = true;
  double prev = -1.0;
  for (double T : {1.0, 2.0, 3.0, 5.0}) {
    double H = 0.0;
    for (const auto& [pk, p] : pair_sampling_probs(corpus_sizes(m), T))
      if (p > 0) H -= p * std::log(p);
    if (H < prev - 1e-12) entropy_ok = false;
    prev = H;
  }

  // the largest corpus keeps the largest share at any temperature
  Rng rng(4242);
  int argmax_ok = 0;
  const int maps = 1000;
  for (int i = 0; i < maps; ++i) {
    std::map<PairKey, size_t> sizes;
    int n = 4 + int(rng.uniform_int(5));
    for (int j = 0; j < n; ++j)
      sizes[{"l" + std::to_string(j), "en"}] = 1 + rng.uniform_int(1000000);
    PairKey biggest;
    size_t best = 0;
    for (auto& [pk, sz] : sizes)
      if (sz > best) best = sz, biggest = pk;
    sizes[biggest] = best + 1;  // break ties so the argmax is unique

    double T = 1.0 + 9.0 * rng.uniform_real();
    auto ps = pair_sampling_probs(sizes, T);
    PairKey top;
    double pbest = -1.0;
    double total = 0.0;
    for (const auto& [pk, p] : ps) {
      total += p;
      if (p > pbest) pbest = p, top = pk;
    }
    if (top == biggest && std::fabs(total - 1.0) <= 1e-12) ++argmax_ok;
  }

  bool pass = p_value > 0.001 && entropy_ok && argmax_ok == maps;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "chi-square p=%.4f over %d draws, entropy %s for rising T, "
                "argmax kept in %d/%d size maps",
                p_value, draws, entropy_ok ? "nondecreasing" : "DECREASED",
                argmax_ok, maps);
  return {pass, buf};
}

}  // namespace acceptance
