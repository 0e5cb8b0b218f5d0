#pragma once

#include <cstdint>
#include <vector>

#include "mtnmt/rng.hpp"
#include "mtnmt/tokenizer.hpp"

namespace mtnmt {

enum class Task { MT, MLM, DAE };

const char* task_name(Task t);

enum class MlmLevel { Token, Word };

struct MlmConfig {
  double mask_ratio = 0.15;
  MlmLevel level = MlmLevel::Token;
  // Replace a selected unit with MASK 80% of the time, a random ordinary
  // token 10%, and leave it unchanged 10%. Off by default: every selected
  // unit becomes MASK.
  bool bert_style = false;

  void validate() const;
};

struct DaeConfig {
  double infill_ratio = 0.35;
  double poisson_lambda = 3.5;
  double drop_prob = 0.1;
  double blank_prob = 0.1;
  int swap_distance = 3;

  void validate() const;
};

struct NoisedExample {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> target_ids;
  std::vector<uint8_t> loss_mask;  // per target position
  Task task = Task::MT;
  TokenId lid = -1;  // language tag appended to the input, -1 when none
};

// Number of units to mask: round-half-up of ratio*units, at least one
// whenever the ratio is positive and the sentence is nonempty.
int mlm_mask_count(double ratio, int units);

// Word budget for span infilling: plain round-half-up, no minimum.
int infill_word_budget(double ratio, int words);

// Masks whole units (tokens or words) chosen uniformly without replacement.
// The target keeps the original ids; loss_mask marks exactly the replaced
// positions. No language tag is appended.
NoisedExample mask_mlm(const TokenizedSentence& sent, const MlmConfig& cfg,
                       const SubwordVocab& vocab, Rng& rng);

// Replaces non-overlapping word spans with a single BLANK each. Span lengths
// are Poisson(lambda) resampled at zero and truncated to the remaining word
// budget; placements are uniform over the gaps still open.
std::vector<std::vector<TokenId>> infill_spans(
    const std::vector<std::vector<TokenId>>& units, const DaeConfig& cfg,
    Rng& rng);

// Per word: removed with drop_prob, else turned into a single BLANK with
// blank_prob (one uniform draw partitions the two outcomes, so the stated
// probabilities are unconditional). Survivors keep their order.
std::vector<std::vector<TokenId>> drop_and_blank(
    const std::vector<std::vector<TokenId>>& units, const DaeConfig& cfg,
    Rng& rng);

// Locally permutes words so that every unit moves at most k positions,
// by jittering indices with uniform(0, k+1) keys and stable-sorting.
std::vector<std::vector<TokenId>> swap_words(
    const std::vector<std::vector<TokenId>>& units, int k, Rng& rng);

// Full denoising example: input = swap(drop_and_blank(infill(words))) with
// the language tag appended; target = the original ids.
NoisedExample make_dae_example(const TokenizedSentence& sent,
                               const DaeConfig& cfg, TokenId lid, Rng& rng);

// One line per example: task, tag, input tokens, '|' separator, target
// tokens with '*' on loss-counted positions. For golden-file tests.
std::string format_example(const NoisedExample& ex, const SubwordVocab& vocab);

}  // namespace mtnmt
