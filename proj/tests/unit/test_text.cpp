#include "doctest.h"
#include "mtnmt/text.hpp"

using namespace mtnmt;

TEST_SUITE_BEGIN("text");

TEST_CASE("normalize_ws collapses and trims") {
  CHECK(normalize_ws("  a  b\tc \n") == "a b c");
  CHECK(normalize_ws("") == "");
  CHECK(normalize_ws(" \t\n ") == "");
  CHECK(normalize_ws("one") == "one");
  CHECK(normalize_ws(normalize_ws("  x   y ")) == normalize_ws("  x   y "));
}

TEST_CASE("split_ws") {
  CHECK(split_ws("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_ws("").empty());
  CHECK(split_ws("  leading") == std::vector<std::string>{"leading"});
}

TEST_CASE("utf8 chunking handles multibyte sequences") {
  auto chunks = utf8_chunks("aßé中");
  REQUIRE(chunks.size() == 4);
  CHECK(chunks[0].bytes == "a");
  CHECK(chunks[1].bytes == "\xc3\x9f");
  CHECK(chunks[2].bytes == "\xc3\xa9");
  CHECK(chunks[3].bytes == "\xe4\xb8\xad");
  for (const auto& c : chunks) CHECK(c.valid);
}

TEST_CASE("utf8 validity") {
  CHECK(utf8_valid("plain ascii"));
  CHECK(utf8_valid("中文 mixed"));
  CHECK_FALSE(utf8_valid("\xff\xfe"));
  CHECK_FALSE(utf8_valid("trunc \xe4\xb8"));
}

TEST_CASE("control character detection") {
  CHECK_FALSE(contains_control_chars("normal text"));
  CHECK(contains_control_chars(std::string("a\x01b")));
  CHECK_FALSE(contains_control_chars("tabs\tand spaces are fine"));
}

TEST_CASE("punctuation fraction") {
  CHECK(punct_fraction("abcd") == doctest::Approx(0.0));
  CHECK(punct_fraction("!!!!") == doctest::Approx(1.0));
  CHECK(punct_fraction("ab!!") == doctest::Approx(0.5));
  CHECK(punct_fraction("a b !") == doctest::Approx(1.0 / 3.0));
  CHECK(punct_fraction("") == doctest::Approx(0.0));
}

TEST_SUITE_END();
