#include "mtnmt/noising.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mtnmt/error.hpp"

namespace mtnmt {

const char* task_name(Task t) {
  switch (t) {
    case Task::MT: return "mt";
    case Task::MLM: return "mlm";
    case Task::DAE: return "dae";
  }
  return "?";
}

void MlmConfig::validate() const {
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw UsageError("mask_ratio must be in [0,1]");
}

void DaeConfig::validate() const {
  auto frac = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw UsageError(std::string(name) + " must be in [0,1]");
  };
  frac(infill_ratio, "infill_ratio");
  frac(drop_prob, "drop_prob");
  frac(blank_prob, "blank_prob");
  if (!(poisson_lambda > 0.0))
    throw UsageError("poisson_lambda must be positive");
  if (swap_distance < 0) throw UsageError("swap_distance must be >= 0");
}

int mlm_mask_count(double ratio, int units) {
  if (units <= 0) return 0;
  int n = static_cast<int>(std::floor(ratio * units + 0.5));
  if (ratio > 0.0 && n < 1) n = 1;
  return std::min(n, units);
}

int infill_word_budget(double ratio, int words) {
  if (words <= 0) return 0;
  int n = static_cast<int>(std::floor(ratio * words + 0.5));
  return std::min(n, words);
}

namespace {

// First `n` entries of a partial Fisher-Yates pass over 0..total-1.
std::vector<int> sample_without_replacement(int total, int n, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < n; ++i) {
    uint64_t j = i + rng.uniform_int(static_cast<uint64_t>(total - i));
    std::swap(idx[static_cast<size_t>(i)], idx[j]);
  }
  idx.resize(static_cast<size_t>(n));
  return idx;
}

}  // namespace

NoisedExample mask_mlm(const TokenizedSentence& sent, const MlmConfig& cfg,
                       const SubwordVocab& vocab, Rng& rng) {
  cfg.validate();
  if (sent.ids.empty()) throw DataError("cannot mask an empty sentence");

  NoisedExample ex;
  ex.task = Task::MLM;
  ex.input_ids = sent.ids;
  ex.target_ids = sent.ids;
  ex.loss_mask.assign(sent.ids.size(), 0);

  int units = cfg.level == MlmLevel::Word
                  ? static_cast<int>(sent.word_spans.size())
                  : static_cast<int>(sent.ids.size());
  int n_mask = mlm_mask_count(cfg.mask_ratio, units);
  if (n_mask == 0) return ex;

  auto chosen = sample_without_replacement(units, n_mask, rng);
  std::sort(chosen.begin(), chosen.end());

  int n_ordinary = static_cast<int>(vocab.size()) - vocab.n_specials();
  for (int unit : chosen) {
    int lo, hi;
    if (cfg.level == MlmLevel::Word) {
      lo = sent.word_spans[static_cast<size_t>(unit)].first;
      hi = sent.word_spans[static_cast<size_t>(unit)].second;
    } else {
      lo = unit;
      hi = unit + 1;
    }
    TokenId replacement = SubwordVocab::kMask;
    bool keep = false;
    if (cfg.bert_style) {
      double u = rng.uniform_real();
      if (u >= 0.9) {
        keep = true;
      } else if (u >= 0.8 && n_ordinary > 0) {
        replacement =
            vocab.n_specials() +
            static_cast<TokenId>(rng.uniform_int(
                static_cast<uint64_t>(n_ordinary)));
      }
    }
    for (int p = lo; p < hi; ++p) {
      if (!keep) ex.input_ids[static_cast<size_t>(p)] = replacement;
      ex.loss_mask[static_cast<size_t>(p)] = 1;
    }
  }
  return ex;
}

std::vector<std::vector<TokenId>> infill_spans(
    const std::vector<std::vector<TokenId>>& units, const DaeConfig& cfg,
    Rng& rng) {
  cfg.validate();
  int n = static_cast<int>(units.size());
  int budget = infill_word_budget(cfg.infill_ratio, n);
  if (budget == 0) return units;

  // -1 marks uncovered words; otherwise the index of the covering span.
  std::vector<int> cover(static_cast<size_t>(n), -1);
  int span_count = 0;
  int remaining = budget;
  while (remaining > 0) {
    int len = static_cast<int>(rng.poisson_positive(cfg.poisson_lambda));
    len = std::min(len, remaining);

    // Valid starts: positions where len consecutive words are uncovered.
    auto starts_for = [&](int l) {
      std::vector<int> starts;
      int run = 0;
      for (int i = 0; i < n; ++i) {
        run = cover[static_cast<size_t>(i)] < 0 ? run + 1 : 0;
        if (run >= l) starts.push_back(i - l + 1);
      }
      return starts;
    };
    std::vector<int> starts = starts_for(len);
    while (starts.empty() && len > 1) {
      --len;
      starts = starts_for(len);
    }
    if (starts.empty()) break;

    int start = starts[rng.uniform_int(starts.size())];
    for (int i = start; i < start + len; ++i)
      cover[static_cast<size_t>(i)] = span_count;
    ++span_count;
    remaining -= len;
  }

  std::vector<std::vector<TokenId>> out;
  out.reserve(units.size());
  int prev_span = -1;
  for (int i = 0; i < n; ++i) {
    int s = cover[static_cast<size_t>(i)];
    if (s < 0)
      out.push_back(units[static_cast<size_t>(i)]);
    else if (s != prev_span)
      out.push_back({SubwordVocab::kBlank});
    prev_span = s;
  }
  return out;
}

std::vector<std::vector<TokenId>> drop_and_blank(
    const std::vector<std::vector<TokenId>>& units, const DaeConfig& cfg,
    Rng& rng) {
  cfg.validate();
  std::vector<std::vector<TokenId>> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    double v = rng.uniform_real();
    if (v < cfg.drop_prob) continue;
    if (v < cfg.drop_prob + cfg.blank_prob)
      out.push_back({SubwordVocab::kBlank});
    else
      out.push_back(u);
  }
  return out;
}

std::vector<std::vector<TokenId>> swap_words(
    const std::vector<std::vector<TokenId>>& units, int k, Rng& rng) {
  if (k < 0) throw UsageError("swap distance must be >= 0");
  size_t n = units.size();
  std::vector<std::pair<double, size_t>> keyed(n);
  for (size_t i = 0; i < n; ++i)
    keyed[i] = {static_cast<double>(i) + rng.uniform_real() * (k + 1), i};
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<TokenId>> out;
  out.reserve(n);
  for (const auto& [key, i] : keyed) out.push_back(units[i]);
  return out;
}

NoisedExample make_dae_example(const TokenizedSentence& sent,
                               const DaeConfig& cfg, TokenId lid, Rng& rng) {
  if (sent.ids.empty()) throw DataError("cannot noise an empty sentence");
  std::vector<std::vector<TokenId>> units;
  units.reserve(sent.word_spans.size());
  for (const auto& [lo, hi] : sent.word_spans)
    units.emplace_back(sent.ids.begin() + lo, sent.ids.begin() + hi);

  auto noised = swap_words(
      drop_and_blank(infill_spans(units, cfg, rng), cfg, rng),
      cfg.swap_distance, rng);

  NoisedExample ex;
  ex.task = Task::DAE;
  ex.lid = lid;
  ex.input_ids = flatten(noised);
  ex.input_ids.push_back(lid);
  ex.target_ids = sent.ids;
  ex.loss_mask.assign(sent.ids.size(), 1);
  return ex;
}

std::string format_example(const NoisedExample& ex,
                           const SubwordVocab& vocab) {
  std::ostringstream os;
  os << task_name(ex.task);
  os << ' ' << (ex.lid >= 0 ? vocab.token_of(ex.lid) : "-");
  for (TokenId id : ex.input_ids) os << ' ' << vocab.token_of(id);
  os << " |";
  for (size_t i = 0; i < ex.target_ids.size(); ++i) {
    os << ' ';
    if (i < ex.loss_mask.size() && ex.loss_mask[i]) os << '*';
    os << vocab.token_of(ex.target_ids[i]);
  }
  return os.str();
}

}  // namespace mtnmt
