#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace mtnmt {

// Short lowercase language code ("de", "en", ...). Validated on manifest load
// and mapped 1:1 to a target-language tag token in the vocabulary.
using LanguageId = std::string;

using PairKey = std::pair<LanguageId, LanguageId>;  // (src, tgt)

inline std::string pair_name(const PairKey& p) {
  return p.first + "-" + p.second;
}

enum class Direction { X2En, En2X, X2X };

enum class MonoSide { Source, Target, Both };

std::string direction_name(Direction d);
Direction parse_direction(const std::string& s);
std::string side_name(MonoSide s);
MonoSide parse_side(const std::string& s);

struct FilterConfig {
  bool dedup = true;
  double max_punct_frac = 0.5;
  int min_words = 1;
  int max_words = 250;
};

struct BitextCorpus {
  LanguageId src_lang;
  LanguageId tgt_lang;
  std::vector<std::pair<std::string, std::string>> pairs;
  // Optional held-out pairs used for validation metrics and model selection.
  std::vector<std::pair<std::string, std::string>> valid_pairs;

  size_t size() const { return pairs.size(); }
};

struct MonoCorpus {
  LanguageId lang;
  MonoSide side = MonoSide::Source;
  std::vector<std::string> sentences;
};

struct CorpusManifest {
  std::vector<LanguageId> languages;
  Direction direction = Direction::X2X;
  std::vector<BitextCorpus> bitext;
  std::vector<MonoCorpus> mono;
  FilterConfig filter;
};

// Reads a manifest file (JSON, versioned; see README for the schema), opens
// every referenced corpus, validates alignment and language declarations, and
// returns the fully loaded manifest. File paths are resolved relative to the
// manifest's directory. Throws DataError on any violation: missing file,
// mismatched bitext line counts, unknown language code, duplicate pair.
CorpusManifest load_manifest(const std::string& path);

// Applies the monolingual filtration rules in a fixed order: whitespace
// normalization, drop empty, drop invalid UTF-8 / control characters, drop
// lines with punctuation fraction above the threshold, drop lines with word
// count outside [min_words, max_words], then drop exact duplicates keeping
// the first occurrence. Survivor order is preserved; the pass is idempotent.
std::vector<std::string> filter_monolingual(
    const std::vector<std::string>& lines, const FilterConfig& rules);

// Retained pair counts per bitext pair; the single source of truth consumed
// by the sampler.
std::map<PairKey, size_t> corpus_sizes(const CorpusManifest& manifest);

std::vector<std::string> read_lines(const std::string& path);

}  // namespace mtnmt
