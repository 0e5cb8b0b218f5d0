#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtnmt/autograd.hpp"
#include "mtnmt/corpus.hpp"
#include "mtnmt/eval.hpp"
#include "mtnmt/model.hpp"
#include "mtnmt/scheduling.hpp"
#include "mtnmt/tokenizer.hpp"

namespace mtnmt {

struct OptimConfig {
  double peak_lr = 5e-4;
  int64_t warmup_steps = 400;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  void validate() const;
};

// peak * min(step / warmup, sqrt(warmup / step)); rises linearly through
// warmup, then decays as inverse square root. step counts from 1.
double lr_at(const OptimConfig& cfg, int64_t step);

template <typename T>
class Adam {
 public:
  Adam(ParamStore<T>& store, const OptimConfig& cfg);
  // applies one update from the accumulated gradients; caller clears them
  void step(double lr);
  int64_t steps_taken() const { return t_; }

  std::vector<T> flat_moments1() const;
  std::vector<T> flat_moments2() const;
  void restore(int64_t t, const std::vector<T>& m1, const std::vector<T>& m2);

 private:
  ParamStore<T>& store_;
  OptimConfig cfg_;
  int64_t t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

struct TrainConfig {
  int64_t total_updates = 0;
  int accumulation = 4;  // micro-rounds per optimizer update
  OptimConfig optim;
  std::string log_path;         // JSONL metrics, one record per update
  std::string checkpoint_path;  // written atomically; empty disables
  int64_t checkpoint_every = 0;  // additionally every N updates when > 0
  void validate() const;
};

struct UpdateRecord {
  int64_t step = 0;
  int64_t epoch = 0;
  double temperature = 0.0;
  double mlm_ratio = 0.0;
  double dae_ratio = 0.0;
  double loss_mt = 0.0;
  double loss_mlm = 0.0;
  double loss_dae = 0.0;
  double lr = 0.0;
};

struct Checkpoint {
  ModelConfig model_cfg;
  std::string vocab_text;
  std::string mixer_state;  // serialized sampler/pool state
  std::string dropout_rng_state;
  int64_t update_count = 0;
  int64_t adam_t = 0;
  std::vector<std::pair<std::string, std::pair<int, int>>> layout;
  std::vector<float> params, adam_m, adam_v;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// Verifies the stored layout against the model's parameters and loads the
// flat value vector; throws DataError on any mismatch.
void apply_checkpoint_params(Model<float>& model, const Checkpoint& ck);

// Single-precision training driver: draws task batches, accumulates
// gradients normalized by each task's token total across the whole update,
// steps the optimizer, and logs one metrics record per update.
class Trainer {
 public:
  Trainer(Model<float>& model, BatchMixer& mixer, const SubwordVocab& vocab,
          const TrainConfig& cfg, uint64_t seed);

  UpdateRecord update();
  void train();  // runs until total_updates, logging and checkpointing
  // same loop; stops early when the callback returns false
  void train(const std::function<bool(const UpdateRecord&)>& keep_going);

  int64_t updates_done() const { return update_count_; }
  Checkpoint make_checkpoint() const;
  void restore(const Checkpoint& ck);
  void save(const std::string& path) const;

 private:
  Model<float>& model_;
  BatchMixer& mixer_;
  const SubwordVocab& vocab_;
  TrainConfig cfg_;
  Adam<float> adam_;
  Rng dropout_rng_;
  int64_t update_count_ = 0;

  void append_log(const UpdateRecord& rec) const;
  [[noreturn]] void abort_nonfinite(const UpdateRecord& rec) const;
};

// Decodes target-side monolingual sentences into each source language and
// writes combined corpora (originals followed by synthetic pairs) plus a
// new manifest under out_dir. Returns the new manifest path.
std::string generate_back_translations(Model<float>& model,
                                       const SubwordVocab& vocab,
                                       const CorpusManifest& manifest,
                                       const std::string& out_dir,
                                       const DecodeConfig& decode_cfg,
                                       int64_t max_per_pair = -1);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mtnmt
