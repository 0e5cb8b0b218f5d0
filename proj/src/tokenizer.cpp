#include "mtnmt/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mtnmt/error.hpp"
#include "mtnmt/text.hpp"

namespace mtnmt {

namespace {

constexpr const char* kContinuation = "##";

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {
      "[PAD]", "[UNK]", "[BOS]", "[EOS]", "[MASK]", "[BLANK]"};
  return kReserved;
}

std::string lid_token(const LanguageId& lang) { return "[2" + lang + "]"; }

bool has_continuation_prefix(const std::string& s) {
  return s.size() > 2 && s.compare(0, 2, kContinuation) == 0;
}

// Joins two adjacent subwords into one, absorbing the right side's
// continuation marker.
std::string merge_symbols(const std::string& a, const std::string& b) {
  if (has_continuation_prefix(b)) return a + b.substr(2);
  return a + b;
}

std::vector<std::string> word_to_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  size_t i = 0;
  for (const auto& chunk : utf8_chunks(word)) {
    std::string sym = i == 0 ? chunk.bytes : kContinuation + chunk.bytes;
    symbols.push_back(std::move(sym));
    ++i;
  }
  return symbols;
}

std::string pair_key(const std::string& a, const std::string& b) {
  return a + '\x1f' + b;
}

}  // namespace

TokenId SubwordVocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& SubwordVocab::token_of(TokenId id) const {
  if (id < 0 || static_cast<size_t>(id) >= id_to_token_.size())
    throw DataError("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

TokenId SubwordVocab::lid(const LanguageId& lang) const {
  auto it = lid_ids_.find(lang);
  if (it == lid_ids_.end())
    throw DataError("no language tag for '" + lang + "'");
  return it->second;
}

void SubwordVocab::index_merges() {
  merge_rank_.clear();
  for (size_t r = 0; r < merges_.size(); ++r)
    merge_rank_[pair_key(merges_[r].first, merges_[r].second)] =
        static_cast<int>(r);
}

int SubwordVocab::merge_rank(const std::string& a,
                             const std::string& b) const {
  auto it = merge_rank_.find(pair_key(a, b));
  return it == merge_rank_.end() ? -1 : it->second;
}

struct VocabBuilder {
  SubwordVocab v;

  void add_specials(const std::vector<LanguageId>& languages) {
    for (const auto& t : reserved_tokens()) push(t);
    v.languages_ = languages;
    std::sort(v.languages_.begin(), v.languages_.end());
    v.languages_.erase(
        std::unique(v.languages_.begin(), v.languages_.end()),
        v.languages_.end());
    for (const auto& lang : v.languages_) {
      v.lid_ids_[lang] = static_cast<TokenId>(v.id_to_token_.size());
      push(lid_token(lang));
    }
    v.n_specials_ = static_cast<int>(v.id_to_token_.size());
  }

  bool contains(const std::string& token) const {
    return v.token_to_id_.count(token) > 0;
  }

  void push(const std::string& token) {
    if (contains(token)) return;
    v.token_to_id_[token] = static_cast<TokenId>(v.id_to_token_.size());
    v.id_to_token_.push_back(token);
  }
};

SubwordVocab train_vocab(const std::vector<std::string>& sentences,
                         const std::vector<LanguageId>& languages,
                         size_t size) {
  VocabBuilder b;
  b.add_specials(languages);

  // Word type frequencies; each type starts as a codepoint symbol sequence.
  std::map<std::string, long long> word_freq;
  for (const auto& s : sentences)
    for (const auto& w : split_ws(normalize_ws(s))) ++word_freq[w];

  std::vector<std::vector<std::string>> words;
  std::vector<long long> freqs;
  std::set<std::string> charset;
  for (const auto& [word, freq] : word_freq) {
    auto symbols = word_to_symbols(word);
    for (const auto& sym : symbols) charset.insert(sym);
    words.push_back(std::move(symbols));
    freqs.push_back(freq);
  }

  size_t floor_size = b.v.id_to_token_.size() + charset.size();
  if (size < floor_size)
    throw DataError("vocab size " + std::to_string(size) +
                    " below minimum " + std::to_string(floor_size) +
                    " (reserved tokens plus base characters)");
  for (const auto& c : charset) {
    if (b.contains(c))
      throw DataError("corpus text collides with reserved token '" + c + "'");
    b.push(c);
  }

  std::set<std::string> banned;
  while (b.v.id_to_token_.size() < size) {
    // Count adjacent pairs over word types, weighted by frequency. The map
    // iterates in lexicographic order, which fixes tie-breaking.
    std::map<std::pair<std::string, std::string>, long long> pair_freq;
    for (size_t w = 0; w < words.size(); ++w) {
      const auto& syms = words[w];
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        pair_freq[{syms[i], syms[i + 1]}] += freqs[w];
    }

    const std::pair<std::string, std::string>* best = nullptr;
    long long best_freq = 0;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq <= best_freq) continue;
      if (banned.count(pair_key(pair.first, pair.second))) continue;
      best = &pair;
      best_freq = freq;
    }
    if (best == nullptr || best_freq < 2) break;

    std::string merged = merge_symbols(best->first, best->second);
    if (b.contains(merged) &&
        b.v.token_to_id_[merged] < b.v.n_specials_) {
      banned.insert(pair_key(best->first, best->second));
      continue;
    }

    auto chosen = *best;
    b.v.merges_.push_back(chosen);
    b.push(merged);
    for (auto& syms : words) {
      for (size_t i = 0; i + 1 < syms.size();) {
        if (syms[i] == chosen.first && syms[i + 1] == chosen.second) {
          syms[i] = merged;
          syms.erase(syms.begin() + static_cast<long>(i) + 1);
        } else {
          ++i;
        }
      }
    }
  }

  b.v.index_merges();
  return b.v;
}

namespace {

std::vector<std::string> apply_merges(const std::string& word,
                                      const SubwordVocab& vocab) {
  auto syms = word_to_symbols(word);
  while (syms.size() > 1) {
    int best_rank = -1;
    size_t best_i = 0;
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      int rank = vocab.merge_rank(syms[i], syms[i + 1]);
      if (rank < 0) continue;
      if (best_rank < 0 || rank < best_rank) {
        best_rank = rank;
        best_i = i;
      }
    }
    if (best_rank < 0) break;
    syms[best_i] = merge_symbols(syms[best_i], syms[best_i + 1]);
    syms.erase(syms.begin() + static_cast<long>(best_i) + 1);
  }
  return syms;
}

}  // namespace

TokenizedSentence encode(const std::string& sentence,
                         const SubwordVocab& vocab) {
  TokenizedSentence out;
  for (const auto& word : split_ws(normalize_ws(sentence))) {
    int start = static_cast<int>(out.ids.size());
    for (const auto& sym : apply_merges(word, vocab)) {
      TokenId id = vocab.id_of(sym);
      out.ids.push_back(vocab.is_special(id) ? SubwordVocab::kUnk : id);
    }
    out.word_spans.emplace_back(start, static_cast<int>(out.ids.size()));
  }
  return out;
}

std::string decode(const std::vector<TokenId>& ids,
                   const SubwordVocab& vocab) {
  std::string out;
  bool at_word_start = true;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token_of(id);
    if (id == SubwordVocab::kPad || id == SubwordVocab::kBos ||
        id == SubwordVocab::kEos)
      continue;
    if (vocab.is_special(id) && id != SubwordVocab::kUnk &&
        id != SubwordVocab::kMask && id != SubwordVocab::kBlank)
      continue;  // language tags
    if (vocab.is_special(id)) {
      if (!out.empty()) out += ' ';
      out += tok;
      at_word_start = true;
      continue;
    }
    if (has_continuation_prefix(tok) && !at_word_start) {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += has_continuation_prefix(tok) ? tok.substr(2) : tok;
    }
    at_word_start = false;
  }
  return out;
}

std::vector<std::vector<TokenId>> word_units(const std::vector<TokenId>& ids,
                                             const SubwordVocab& vocab) {
  std::vector<std::vector<TokenId>> units;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token_of(id);
    bool continues = !vocab.is_special(id) && has_continuation_prefix(tok) &&
                     !units.empty() && !units.back().empty() &&
                     !vocab.is_special(units.back().back());
    if (continues)
      units.back().push_back(id);
    else
      units.push_back({id});
  }
  return units;
}

std::vector<TokenId> flatten(const std::vector<std::vector<TokenId>>& units) {
  std::vector<TokenId> ids;
  for (const auto& u : units) ids.insert(ids.end(), u.begin(), u.end());
  return ids;
}

void SubwordVocab::save(std::ostream& os) const {
  os << "subword-vocab v1\n";
  os << "languages " << languages_.size();
  for (const auto& l : languages_) os << ' ' << l;
  os << '\n';
  os << "tokens " << id_to_token_.size() << '\n';
  for (const auto& t : id_to_token_) os << t << '\n';
  os << "merges " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) os << a << ' ' << b << '\n';
}

void SubwordVocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write vocab file: " + path);
  save(os);
  if (!os.good()) throw DataError("write failed: " + path);
}

SubwordVocab SubwordVocab::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "subword-vocab v1")
    throw DataError("not a vocab file (bad header)");

  auto expect_counted = [&](const std::string& key) -> std::istringstream {
    if (!std::getline(is, line))
      throw DataError("vocab file truncated before '" + key + "'");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw DataError("vocab file: expected '" + key + "' line");
    return ls;
  };

  SubwordVocab v;
  {
    auto ls = expect_counted("languages");
    size_t n = 0;
    ls >> n;
    for (size_t i = 0; i < n; ++i) {
      LanguageId l;
      if (!(ls >> l)) throw DataError("vocab file: short language list");
      v.languages_.push_back(l);
    }
  }
  size_t n_tokens = 0;
  {
    auto ls = expect_counted("tokens");
    if (!(ls >> n_tokens)) throw DataError("vocab file: bad token count");
  }
  for (size_t i = 0; i < n_tokens; ++i) {
    if (!std::getline(is, line)) throw DataError("vocab file: short token list");
    if (line.empty() || line.find(' ') != std::string::npos ||
        v.token_to_id_.count(line))
      throw DataError("vocab file: bad token entry '" + line + "'");
    v.token_to_id_[line] = static_cast<TokenId>(v.id_to_token_.size());
    v.id_to_token_.push_back(line);
  }
  size_t n_merges = 0;
  {
    auto ls = expect_counted("merges");
    if (!(ls >> n_merges)) throw DataError("vocab file: bad merge count");
  }
  for (size_t i = 0; i < n_merges; ++i) {
    if (!std::getline(is, line)) throw DataError("vocab file: short merge list");
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a >> b) || (ls >> extra))
      throw DataError("vocab file: bad merge entry '" + line + "'");
    v.merges_.emplace_back(a, b);
  }

  const auto& reserved = reserved_tokens();
  if (v.id_to_token_.size() < reserved.size() + v.languages_.size())
    throw DataError("vocab file: too few tokens for header");
  for (size_t i = 0; i < reserved.size(); ++i)
    if (v.id_to_token_[i] != reserved[i])
      throw DataError("vocab file: reserved token mismatch at id " +
                      std::to_string(i));
  for (size_t i = 0; i < v.languages_.size(); ++i) {
    TokenId id = static_cast<TokenId>(reserved.size() + i);
    if (v.id_to_token_[static_cast<size_t>(id)] != lid_token(v.languages_[i]))
      throw DataError("vocab file: language tag mismatch for '" +
                      v.languages_[i] + "'");
    v.lid_ids_[v.languages_[i]] = id;
  }
  v.n_specials_ = static_cast<int>(reserved.size() + v.languages_.size());
  v.index_merges();
  return v;
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open vocab file: " + path);
  return load(is);
}

}  // namespace mtnmt
