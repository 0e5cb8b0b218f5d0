#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mtnmt/corpus.hpp"
#include "mtnmt/model.hpp"
#include "mtnmt/scheduling.hpp"
#include "mtnmt/trainer.hpp"

namespace mtnmt {

// Synthetic languages drawing from a shared concept inventory. Language l
// renders concept c as the word "<l><c>" ("aa17", "en17", ...), so word
// vocabularies are pairwise disjoint while digit subwords are shared, which
// gives the tasks a compositional bridge between languages. Translation is a
// word-for-word relabeling, learnable by a small model.
std::string toy_word(const LanguageId& lang, int concept_id);

// Every surface word of a language; the membership set behind language-tag
// compliance scoring.
std::unordered_set<std::string> toy_word_set(const LanguageId& lang,
                                             int concepts);

struct ToyCorpusConfig {
  std::vector<LanguageId> languages;
  int concepts = 30;
  int min_words = 3;
  int max_words = 8;
  std::map<PairKey, int> bitext_sizes;           // training pairs per entry
  std::map<PairKey, int> valid_sizes;            // held-out pairs per entry
  std::map<LanguageId, std::pair<MonoSide, int>> mono_sizes;
  void validate() const;
};

// Writes aligned corpus files plus a loadable manifest under dir and returns
// the manifest path. Identical config and seed produce identical bytes.
std::string write_toy_corpus(const ToyCorpusConfig& cfg,
                             const std::string& dir, uint64_t seed);

// Fresh concept sentences rendered in one language, for evaluation inputs
// drawn from the same distribution as the corpus.
std::vector<std::string> sample_toy_sentences(const ToyCorpusConfig& cfg,
                                              const LanguageId& lang, int n,
                                              uint64_t seed);

// Every sentence in the manifest (bitext both sides, validation pairs,
// monolingual), in file order. The usual input to train_vocab.
std::vector<std::string> manifest_text(const CorpusManifest& m);

struct SystemResult {
  std::string system;
  // insertion order is the column order of the summary table
  std::vector<std::pair<std::string, double>> metrics;
};

struct ExperimentSummary {
  std::string preset;
  uint64_t seed = 0;
  std::vector<SystemResult> rows;
  bool passed = false;
  std::string verdict;
};

struct ExperimentOptions {
  int updates_override = -1;  // < 0 keeps the preset budget
  int eval_sentences = -1;    // < 0 keeps the preset evaluation size
};

// Preset scenarios; each runs the systems its comparison needs (one row per
// system): "toy-overfit" joint training to high training accuracy,
// "toy-mtl" translation-only baseline vs joint training on a low-resource
// pair, "toy-x2x-zeroshot" language-tag compliance on a pair with no direct
// bitext, "toy-bt" baseline vs joint vs synthetic-data variants.
const std::vector<std::string>& experiment_preset_names();

// Base training settings of a preset; the auxiliary-task toggles are applied
// per system at run time. Also the defaults behind `train --preset`.
struct PresetConfig {
  ModelConfig model;  // vocab_size filled once the vocabulary exists
  MixConfig mix;
  OptimConfig optim;
  int accumulation = 1;
  int64_t updates = 0;
  size_t vocab_size = 320;
};

PresetConfig preset_config(const std::string& name);  // UsageError on unknown

// Full deterministic pipeline for one preset: corpus generation, vocabulary,
// training per system, evaluation, and summary files (summary.txt,
// summary.json, one metrics log per system) under out_dir. The summary's
// passed flag reports the preset's threshold check.
ExperimentSummary run_experiment(const std::string& preset, uint64_t seed,
                                 const std::string& out_dir,
                                 const ExperimentOptions& opts = {});

std::string format_summary(const ExperimentSummary& s);

}  // namespace mtnmt
