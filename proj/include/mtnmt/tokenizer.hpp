#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtnmt/corpus.hpp"

namespace mtnmt {

using TokenId = int32_t;

// Shared byte-pair-encoding subword vocabulary over all languages.
//
// Words are whitespace units; non-initial subwords carry the "##"
// continuation prefix, so word boundaries are recoverable from ids alone.
// Reserved symbols occupy the lowest ids and are never produced by merges.
class SubwordVocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr TokenId kMask = 4;
  static constexpr TokenId kBlank = 5;

  SubwordVocab() = default;

  TokenId id_of(const std::string& token) const;  // kUnk if absent
  const std::string& token_of(TokenId id) const;  // throws on out-of-range
  size_t size() const { return id_to_token_.size(); }
  int n_specials() const { return n_specials_; }
  bool is_special(TokenId id) const { return id >= 0 && id < n_specials_; }

  // Target-language tag id for a language code; throws DataError if the
  // language was not declared at training time.
  TokenId lid(const LanguageId& lang) const;
  const std::vector<LanguageId>& languages() const { return languages_; }

  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  // Rank of a learned merge, or -1 if the pair was never merged.
  int merge_rank(const std::string& a, const std::string& b) const;

  void save(std::ostream& os) const;
  void save(const std::string& path) const;
  static SubwordVocab load(std::istream& is);
  static SubwordVocab load(const std::string& path);

  friend SubwordVocab train_vocab(const std::vector<std::string>&,
                                  const std::vector<LanguageId>&, size_t);
  friend struct VocabBuilder;

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> merge_rank_;  // "a\x1fb" -> rank
  std::vector<LanguageId> languages_;
  std::unordered_map<std::string, TokenId> lid_ids_;
  int n_specials_ = 0;

  void index_merges();
};

struct TokenizedSentence {
  std::vector<TokenId> ids;
  // Half-open (start, end) token ranges, one per whitespace word; they
  // partition [0, ids.size()).
  std::vector<std::pair<int, int>> word_spans;

  size_t size() const { return ids.size(); }
  size_t word_count() const { return word_spans.size(); }
};

// Learns a BPE vocabulary of at most `size` entries (specials + base
// characters + merges) from the given sentences. Deterministic: merge
// candidates are ranked by frequency with lexicographic tie-breaking, and
// merging stops early when no pair occurs twice. Throws DataError when `size`
// cannot cover the specials plus the base character set.
SubwordVocab train_vocab(const std::vector<std::string>& sentences,
                         const std::vector<LanguageId>& languages,
                         size_t size);

// Whitespace pre-tokenization, then BPE merges per word. Characters outside
// the trained set map to kUnk. Never emits specials.
TokenizedSentence encode(const std::string& sentence,
                         const SubwordVocab& vocab);

// Inverse of encode up to whitespace normalization. PAD/BOS/EOS and language
// tags are stripped; MASK, BLANK and UNK render as their bracketed names.
// Throws DataError on an out-of-range id.
std::string decode(const std::vector<TokenId>& ids, const SubwordVocab& vocab);

// Groups a token id sequence into word units using the continuation marker;
// specials form single-token units.
std::vector<std::vector<TokenId>> word_units(const std::vector<TokenId>& ids,
                                             const SubwordVocab& vocab);

std::vector<TokenId> flatten(const std::vector<std::vector<TokenId>>& units);

}  // namespace mtnmt
