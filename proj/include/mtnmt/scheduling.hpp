#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtnmt/corpus.hpp"
#include "mtnmt/noising.hpp"
#include "mtnmt/rng.hpp"
#include "mtnmt/tokenizer.hpp"

namespace mtnmt {

struct TemperatureSchedule {
  double t0 = 1.0;
  double tm = 5.0;
  int warmup = 5;  // epochs (or steps in per-step mode) to reach tm

  void validate() const;
};

struct NoiseSchedule {
  double r0 = 0.0;
  double rm = 0.0;
  int warmup = 5;

  void validate() const;
};

// Linear ramp from the initial value, clamped at the maximum: at k=1 the
// initial value, at k >= warmup+1 the maximum.
double temperature_at(const TemperatureSchedule& s, int64_t k);
double noise_ratio_at(const NoiseSchedule& s, int64_t k);

// Probability of picking each pair, proportional to its corpus share raised
// to 1/T. T=1 recovers raw proportions; large T flattens toward uniform.
std::map<PairKey, double> pair_sampling_probs(
    const std::map<PairKey, size_t>& sizes, double temperature);

// Same exponent-and-normalize rule over per-language monolingual sizes.
std::map<LanguageId, double> lang_sampling_probs(
    const std::map<LanguageId, size_t>& sizes, double temperature);

enum class ScheduleUnit { Epoch, Step };

struct MixConfig {
  int batch_tokens = 512;       // per-task budget, max(input, target) summed
  int max_sentence_tokens = 128;  // longer examples are skipped
  TemperatureSchedule temperature;
  NoiseSchedule mlm_noise{0.10, 0.20, 5};
  NoiseSchedule dae_noise{0.20, 0.40, 5};
  DaeConfig dae;  // infill_ratio is overridden by dae_noise each update
  MlmLevel mlm_level = MlmLevel::Token;
  bool mlm_bert_style = false;
  ScheduleUnit schedule_unit = ScheduleUnit::Epoch;
  bool use_mlm = true;
  bool use_dae = true;

  void validate() const;
};

struct TaskBatch {
  Task task = Task::MT;
  PairKey pair;      // MT only
  LanguageId lang;   // MLM/DAE only
  std::vector<NoisedExample> examples;
};

// Cycles through a shuffled index order, reshuffling on wrap. All randomness
// flows through an owned stream seeded from (master seed, pool name), so a
// pool's draw sequence is independent of its neighbors and replayable.
class SentencePool {
 public:
  SentencePool() = default;
  SentencePool(std::string name, size_t n, uint64_t master_seed);

  size_t next_index();
  uint64_t next_noise_seed();
  size_t size() const { return order_.size(); }
  const std::string& name() const { return name_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& j);

 private:
  std::string name_;
  std::vector<uint32_t> order_;
  size_t cursor_ = 0;
  uint64_t noise_draws_ = 0;
  uint64_t master_seed_ = 0;
  Rng rng_;

  void reshuffle();
};

// Emits one batch per active task per update. The translation batch's pair
// is drawn at the current temperature; masking and infilling ratios follow
// their ramps. The epoch counter advances after a full temperature-weighted
// pass over the bitext (sum of pair sizes).
class BatchMixer {
 public:
  BatchMixer(const CorpusManifest& manifest, const SubwordVocab& vocab,
             const MixConfig& cfg, uint64_t master_seed);

  std::vector<TaskBatch> next_batches();

  int64_t epoch() const { return epoch_; }
  int64_t updates_done() const { return updates_; }
  double current_temperature() const;
  double current_mlm_ratio() const;
  double current_dae_ratio() const;
  const std::map<PairKey, size_t>& pair_sizes() const { return pair_sizes_; }

  nlohmann::json state() const;
  void restore(const nlohmann::json& j);

 private:
  const SubwordVocab& vocab_;
  MixConfig cfg_;
  uint64_t master_seed_;

  // Corpora tokenized once up front; pools index into these.
  std::map<PairKey, std::vector<std::pair<TokenizedSentence, TokenizedSentence>>>
      enc_bitext_;
  std::map<LanguageId, std::vector<TokenizedSentence>> enc_mlm_;
  std::map<LanguageId, std::vector<TokenizedSentence>> enc_dae_;

  std::map<PairKey, size_t> pair_sizes_;
  std::map<PairKey, SentencePool> mt_pools_;
  std::map<LanguageId, SentencePool> mlm_pools_;
  std::map<LanguageId, SentencePool> dae_pools_;
  std::map<LanguageId, size_t> mlm_sizes_;
  std::map<LanguageId, size_t> dae_sizes_;

  Rng pick_rng_;
  int64_t epoch_ = 1;
  int64_t updates_ = 0;
  size_t epoch_size_ = 0;       // MT sentences per epoch
  size_t epoch_consumed_ = 0;

  int64_t schedule_k() const;
  TaskBatch fill_mt_batch();
  TaskBatch fill_mlm_batch();
  TaskBatch fill_dae_batch();
  template <class Key>
  Key draw_key(const std::map<Key, double>& probs);
};

}  // namespace mtnmt
