#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "mtnmt/model.hpp"
#include "mtnmt/tokenizer.hpp"

namespace mtnmt {

enum class LengthNorm { Simple, Gnmt };

struct DecodeConfig {
  int beam_size = 5;
  double alpha = 1.0;          // length penalty exponent; 0 disables
  double max_len_factor = 2.0; // budget = round(factor * source rows) + 5
  LengthNorm norm = LengthNorm::Simple;
  void validate() const;
};

// Hypothesis length includes the end-of-sequence marker, so the penalty
// denominator is never zero. Simple: len^alpha. Gnmt: ((5+len)/6)^alpha.
double length_penalty(const DecodeConfig& cfg, int len);

// Beam search over the next-token distribution. Completed hypotheses are
// ranked by total log-probability divided by the length penalty; a
// hypothesis still open at the length budget is closed with a forced end
// marker. beam_size=1 reproduces greedy argmax decoding exactly.
template <typename T>
std::vector<TokenId> beam_decode(Model<T>& model,
                                 const std::vector<TokenId>& src,
                                 const DecodeConfig& cfg);

struct BleuReport {
  double score = 0.0;  // 0..100
  std::array<double, 4> precisions{};  // fractions in [0,1]
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
};

// mteval-13a style tokenization: entity unescape, punctuation split except
// intra-number periods/commas, digit-dash split. Case is preserved.
std::vector<std::string> tokenize_13a(const std::string& line);

// Corpus-level 4-gram BLEU; zero match counts fall back to exponentially
// decaying precisions (halved once per zero order).
BleuReport bleu(const std::vector<std::string>& hypotheses,
                const std::vector<std::string>& references);

// Fraction of whitespace-separated output words drawn from the requested
// language's word vocabulary. No words emitted scores 0.
double lid_compliance(const std::vector<std::string>& hypotheses,
                      const std::unordered_set<std::string>& target_words);

// Teacher-forced next-token accuracy over scored target positions.
template <typename T>
double token_accuracy(Model<T>& model, const std::vector<NoisedExample>& batch);

extern template std::vector<TokenId> beam_decode<float>(
    Model<float>&, const std::vector<TokenId>&, const DecodeConfig&);
extern template std::vector<TokenId> beam_decode<double>(
    Model<double>&, const std::vector<TokenId>&, const DecodeConfig&);
extern template double token_accuracy<float>(Model<float>&,
                                             const std::vector<NoisedExample>&);
extern template double token_accuracy<double>(
    Model<double>&, const std::vector<NoisedExample>&);

}  // namespace mtnmt
