#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mtnmt {

// Trims leading/trailing whitespace and collapses internal runs (space, tab,
// CR) to a single space. This is the canonical sentence form used everywhere:
// corpora are normalized on load and decode() restores exactly this form.
std::string normalize_ws(std::string_view s);

std::vector<std::string> split_ws(std::string_view s);

// Splits a UTF-8 string into codepoint-sized chunks. Invalid bytes come back
// as single-byte chunks with `valid` set to false.
struct Utf8Chunk {
  std::string bytes;
  bool valid;
};
std::vector<Utf8Chunk> utf8_chunks(std::string_view s);

bool utf8_valid(std::string_view s);

bool contains_control_chars(std::string_view s);

// Fraction of non-whitespace characters that are ASCII punctuation.
double punct_fraction(std::string_view s);

}  // namespace mtnmt
