#include "mtnmt/text.hpp"

#include <cctype>

namespace mtnmt {

static bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_ws(c)) {
      if (!out.empty()) pending_space = true;
    } else {
      if (pending_space) {
        out.push_back(' ');
        pending_space = false;
      }
      out.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> words;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_ws(s[i])) ++i;
    size_t j = i;
    while (j < s.size() && !is_ws(s[j])) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

std::vector<Utf8Chunk> utf8_chunks(std::string_view s) {
  std::vector<Utf8Chunk> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    size_t len = 0;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      len = 4;
    }
    bool ok = len > 0 && i + len <= s.size();
    if (ok) {
      for (size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      out.push_back({std::string(1, s[i]), false});
      ++i;
    } else {
      out.push_back({std::string(s.substr(i, len)), true});
      i += len;
    }
  }
  return out;
}

bool utf8_valid(std::string_view s) {
  for (const auto& ch : utf8_chunks(s)) {
    if (!ch.valid) return false;
  }
  return true;
}

bool contains_control_chars(std::string_view s) {
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u == '\t' || u == '\n' || u == '\r') continue;  // ordinary whitespace
    if (u < 0x20 || u == 0x7F) return true;
  }
  return false;
}

double punct_fraction(std::string_view s) {
  size_t punct = 0;
  size_t total = 0;
  for (char c : s) {
    if (is_ws(c)) continue;
    ++total;
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) ++punct;
  }
  if (total == 0) return 0.0;
  return static_cast<double>(punct) / static_cast<double>(total);
}

}  // namespace mtnmt
