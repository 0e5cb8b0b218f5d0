#include "mtnmt/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "mtnmt/error.hpp"
#include "mtnmt/text.hpp"

namespace mtnmt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::X2En: return "x2en";
    case Direction::En2X: return "en2x";
    case Direction::X2X: return "x2x";
  }
  return "x2x";
}

Direction parse_direction(const std::string& s) {
  if (s == "x2en") return Direction::X2En;
  if (s == "en2x") return Direction::En2X;
  if (s == "x2x") return Direction::X2X;
  throw DataError("unknown direction '" + s + "' (expected x2en, en2x or x2x)");
}

std::string side_name(MonoSide s) {
  switch (s) {
    case MonoSide::Source: return "source";
    case MonoSide::Target: return "target";
    case MonoSide::Both: return "both";
  }
  return "source";
}

MonoSide parse_side(const std::string& s) {
  if (s == "source") return MonoSide::Source;
  if (s == "target") return MonoSide::Target;
  if (s == "both") return MonoSide::Both;
  throw DataError("unknown mono side '" + s +
                  "' (expected source, target or both)");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

static bool valid_lang_code(const std::string& code) {
  if (code.empty() || code.size() > 8) return false;
  for (char c : code) {
    if (c < 'a' || c > 'z') return false;
  }
  return true;
}

std::vector<std::string> filter_monolingual(
    const std::vector<std::string>& lines, const FilterConfig& rules) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& raw : lines) {
    std::string s = normalize_ws(raw);
    if (s.empty()) continue;
    if (contains_control_chars(s) || !utf8_valid(s)) continue;
    if (punct_fraction(s) > rules.max_punct_frac) continue;
    int words = static_cast<int>(split_ws(s).size());
    if (words < rules.min_words || words > rules.max_words) continue;
    if (rules.dedup) {
      if (!seen.insert(s).second) continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

static FilterConfig parse_filter(const json& j) {
  FilterConfig f;
  if (j.contains("dedup")) f.dedup = j.at("dedup").get<bool>();
  if (j.contains("max_punct_frac"))
    f.max_punct_frac = j.at("max_punct_frac").get<double>();
  if (j.contains("min_words")) f.min_words = j.at("min_words").get<int>();
  if (j.contains("max_words")) f.max_words = j.at("max_words").get<int>();
  if (f.min_words < 1 || f.max_words < f.min_words)
    throw DataError("filter: need 1 <= min_words <= max_words");
  if (f.max_punct_frac < 0.0 || f.max_punct_frac > 1.0)
    throw DataError("filter: max_punct_frac must be in [0,1]");
  return f;
}

// Loads two line-aligned files into normalized sentence pairs, dropping pairs
// where either side is empty after normalization.
static std::vector<std::pair<std::string, std::string>> load_aligned(
    const std::string& src_path, const std::string& tgt_path,
    const std::string& what) {
  auto src_lines = read_lines(src_path);
  auto tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw DataError(what + ": line count mismatch: " + src_path + " has " +
                    std::to_string(src_lines.size()) + " lines, " + tgt_path +
                    " has " + std::to_string(tgt_lines.size()));
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    std::string s = normalize_ws(src_lines[i]);
    std::string t = normalize_ws(tgt_lines[i]);
    if (s.empty() || t.empty()) continue;
    pairs.emplace_back(std::move(s), std::move(t));
  }
  return pairs;
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest parse error in " + path + ": " + e.what());
  }

  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw DataError("manifest: missing or unsupported version (expected 1)");

  CorpusManifest m;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };

  if (!j.contains("languages") || !j.at("languages").is_array() ||
      j.at("languages").empty())
    throw DataError("manifest: 'languages' must be a nonempty array");
  std::set<std::string> lang_set;
  for (const auto& l : j.at("languages")) {
    std::string code = l.get<std::string>();
    if (!valid_lang_code(code))
      throw DataError("manifest: invalid language code '" + code + "'");
    if (!lang_set.insert(code).second)
      throw DataError("manifest: duplicate language code '" + code + "'");
    m.languages.push_back(code);
  }

  m.direction = parse_direction(j.value("direction", std::string("x2x")));
  if (j.contains("filter")) m.filter = parse_filter(j.at("filter"));

  std::set<PairKey> declared;
  for (const auto& b : j.value("bitext", json::array())) {
    BitextCorpus bc;
    bc.src_lang = b.at("src").get<std::string>();
    bc.tgt_lang = b.at("tgt").get<std::string>();
    for (const auto& lang : {bc.src_lang, bc.tgt_lang}) {
      if (!lang_set.count(lang))
        throw DataError("manifest: bitext references unknown language '" +
                        lang + "'");
    }
    if (bc.src_lang == bc.tgt_lang)
      throw DataError("manifest: bitext pair with identical source and "
                      "target language '" + bc.src_lang + "'");
    PairKey key{bc.src_lang, bc.tgt_lang};
    if (!declared.insert(key).second)
      throw DataError("manifest: duplicate bitext pair declaration " +
                      pair_name(key));
    bc.pairs = load_aligned(resolve(b.at("src_file").get<std::string>()),
                            resolve(b.at("tgt_file").get<std::string>()),
                            "bitext " + pair_name(key));
    if (b.contains("valid_src_file") != b.contains("valid_tgt_file"))
      throw DataError("manifest: bitext " + pair_name(key) +
                      " declares only one of valid_src_file/valid_tgt_file");
    if (b.contains("valid_src_file")) {
      bc.valid_pairs =
          load_aligned(resolve(b.at("valid_src_file").get<std::string>()),
                       resolve(b.at("valid_tgt_file").get<std::string>()),
                       "validation bitext " + pair_name(key));
    }
    m.bitext.push_back(std::move(bc));
  }

  // The hub language of an English-centric setup: the shared target of every
  // pair for x2en, the shared source for en2x.
  LanguageId hub;
  if (m.direction == Direction::X2En && !m.bitext.empty()) {
    hub = m.bitext.front().tgt_lang;
    for (const auto& b : m.bitext) {
      if (b.tgt_lang != hub)
        throw DataError("manifest: direction x2en requires a common target "
                        "language across bitext pairs");
    }
  } else if (m.direction == Direction::En2X && !m.bitext.empty()) {
    hub = m.bitext.front().src_lang;
    for (const auto& b : m.bitext) {
      if (b.src_lang != hub)
        throw DataError("manifest: direction en2x requires a common source "
                        "language across bitext pairs");
    }
  }

  std::set<std::pair<LanguageId, MonoSide>> mono_seen;
  for (const auto& mo : j.value("mono", json::array())) {
    MonoCorpus mc;
    mc.lang = mo.at("lang").get<std::string>();
    if (!lang_set.count(mc.lang))
      throw DataError("manifest: mono references unknown language '" +
                      mc.lang + "'");
    mc.side = parse_side(mo.value("side", std::string("source")));
    if (!mono_seen.insert({mc.lang, mc.side}).second)
      throw DataError("manifest: duplicate mono declaration for '" + mc.lang +
                      "' side '" + side_name(mc.side) + "'");
    if (mc.side == MonoSide::Both && m.direction != Direction::X2X)
      throw DataError("manifest: mono side 'both' is only valid for x2x");
    if (!hub.empty()) {
      // In an English-centric setup the hub language sits on exactly one
      // side, so its monolingual data may only feed the matching task.
      bool is_hub = mc.lang == hub;
      bool hub_is_target = m.direction == Direction::X2En;
      if (is_hub && (mc.side == MonoSide::Target) != hub_is_target)
        throw DataError("manifest: mono for '" + mc.lang +
                        "' declares side '" + side_name(mc.side) +
                        "' which contradicts direction " +
                        direction_name(m.direction));
      if (!is_hub && (mc.side == MonoSide::Target) == hub_is_target)
        throw DataError("manifest: mono for '" + mc.lang +
                        "' declares side '" + side_name(mc.side) +
                        "' which contradicts direction " +
                        direction_name(m.direction));
    }
    mc.sentences =
        filter_monolingual(read_lines(resolve(mo.at("file").get<std::string>())),
                           m.filter);
    m.mono.push_back(std::move(mc));
  }

  return m;
}

std::map<PairKey, size_t> corpus_sizes(const CorpusManifest& manifest) {
  std::map<PairKey, size_t> sizes;
  for (const auto& b : manifest.bitext) {
    sizes[{b.src_lang, b.tgt_lang}] = b.pairs.size();
  }
  return sizes;
}

}  // namespace mtnmt
