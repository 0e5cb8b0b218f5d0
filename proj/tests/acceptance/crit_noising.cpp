#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "mtnmt/experiments.hpp"
#include "mtnmt/noising.hpp"
#include "mtnmt/rng.hpp"
#include "mtnmt/tokenizer.hpp"

namespace acceptance {

namespace {

int round_half_up(double x) { return int(std::floor(x + 0.5)); }

bool is_reserved(mtnmt::TokenId id) {
  using V = mtnmt::SubwordVocab;
  return id == V::kPad || id == V::kBos || id == V::kEos;
}

}  // namespace

Outcome check_noising() {
  using namespace mtnmt;

  ToyCorpusConfig tc;
  tc.languages = {"aa", "en"};
  tc.concepts = 30;
  const int n_sentences = 10000;
  auto lines = sample_toy_sentences(tc, "aa", n_sentences, 515);
  SubwordVocab vocab = train_vocab(lines, tc.languages, 160);
  TokenId lid = vocab.lid("aa");

  Rng rng(707);
  long bad = 0;
  std::string first_bad;
  auto flag = [&](const char* what, size_t i) {
    ++bad;
    if (first_bad.empty())
      first_bad = std::string(" first failure: ") + what + " at sentence " +
                  std::to_string(i);
  };

  for (size_t i = 0; i < lines.size(); ++i) {
    TokenizedSentence sent = encode(lines[i], vocab);
    double ratio = 0.05 + 0.45 * rng.uniform_real();

    // whole-unit masking
    MlmConfig mc;
    mc.mask_ratio = ratio;
    mc.level = MlmLevel::Token;
    NoisedExample ex = mask_mlm(sent, mc, vocab, rng);
    if (ex.target_ids != sent.ids) flag("mlm target changed", i);
    if (ex.loss_mask.size() != ex.target_ids.size())
      flag("mlm mask length", i);
    int masked = 0;
    for (size_t p = 0; p < ex.loss_mask.size(); ++p) {
      if (ex.loss_mask[p]) {
        ++masked;
        if (ex.input_ids[p] != SubwordVocab::kMask)
          flag("selected position not replaced", i);
      } else if (ex.input_ids[p] != sent.ids[p]) {
        flag("unselected position changed", i);
      }
    }
    int units = int(sent.ids.size());
    int want = std::max(1, round_half_up(ratio * units));
    if (masked != want) flag("mlm mask count", i);

    // denoising: order noise, deletions and blanks, original as the target
    DaeConfig dc;
    dc.infill_ratio = 0.5 * rng.uniform_real();
    NoisedExample de = make_dae_example(sent, dc, lid, rng);
    if (de.target_ids != sent.ids) flag("dae target changed", i);
    if (de.input_ids.empty() || de.input_ids.back() != lid)
      flag("dae language tag missing", i);
    if (de.loss_mask.size() != de.target_ids.size())
      flag("dae mask length", i);
    for (uint8_t lm : de.loss_mask)
      if (!lm) flag("dae position unscored", i);

    std::map<TokenId, int> budgetm;
    for (TokenId id : sent.ids) budgetm[id] += 1;
    for (size_t p = 0; p + 1 < de.input_ids.size(); ++p) {
      TokenId id = de.input_ids[p];
      if (is_reserved(id)) flag("reserved token in dae input", i);
      if (id == SubwordVocab::kBlank) continue;
      if (--budgetm[id] < 0) flag("dae invented a token", i);
    }
  }

  // local word shuffling moves nothing farther than the window
  Rng srng(808);
  long swap_bad = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + int(srng.uniform_int(12));
    std::vector<std::vector<TokenId>> units;
    for (int j = 0; j < n; ++j)
      units.push_back({TokenId(100 + j)});  // identity tags positions
    int k = int(srng.uniform_int(4));
    auto shuffled = swap_words(units, k, srng);
    if (int(shuffled.size()) != n) ++swap_bad;
    std::vector<bool> seen(size_t(n), false);
    for (size_t pos = 0; pos < shuffled.size(); ++pos) {
      int orig = int(shuffled[pos][0]) - 100;
      if (orig < 0 || orig >= n || seen[size_t(orig)] ||
          std::abs(int(pos) - orig) > k)
        ++swap_bad;
      else
        seen[size_t(orig)] = true;
    }
  }

  // span infilling never removes more words than the sampled budget
  Rng irng(909);
  long infill_bad = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    int n = 1 + int(irng.uniform_int(14));
    std::vector<std::vector<TokenId>> units;
    for (int j = 0; j < n; ++j) units.push_back({TokenId(100 + j)});
    DaeConfig dc;
    dc.infill_ratio = 0.6 * irng.uniform_real();
    auto out = infill_spans(units, dc, irng);
    int kept = 0, blanks = 0;
    int prev = -1;
    for (const auto& u : out) {
      if (u.size() == 1 && u[0] == SubwordVocab::kBlank) {
        ++blanks;
        continue;
      }
      ++kept;
      int orig = int(u[0]) - 100;
      if (orig <= prev) ++infill_bad;  // survivors must keep their order
      prev = orig;
    }
    int removed = n - kept;
    int budget = round_half_up(dc.infill_ratio * n);
    if (removed > budget || blanks > removed) ++infill_bad;
  }

  // the span-length sampler's raw distribution
  Rng prng(1001);
  const int pdraws = 50000;
  double sum = 0.0;
  for (int i = 0; i < pdraws; ++i) sum += double(prng.poisson(3.5));
  double mean = sum / pdraws;
  bool poisson_ok = std::fabs(mean - 3.5) <= 0.01 * 3.5;

  bool pass = bad == 0 && swap_bad == 0 && infill_bad == 0 && poisson_ok;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%d sentences clean (%ld violations%s), swap window kept "
                "(%ld bad), infill budget kept (%ld bad), Poisson mean "
                "%.4f vs 3.5 at %d draws",
                n_sentences, bad, first_bad.c_str(), swap_bad, infill_bad,
                mean, pdraws);
  return {pass, buf};
}

}  // namespace acceptance
