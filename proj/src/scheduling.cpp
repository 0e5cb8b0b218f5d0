#include "mtnmt/scheduling.hpp"

#include <algorithm>
#include <cmath>

#include "mtnmt/error.hpp"

namespace mtnmt {

void TemperatureSchedule::validate() const {
  if (!(t0 > 0.0)) throw UsageError("initial temperature must be positive");
  if (!(tm >= t0))
    throw UsageError("max temperature must be >= initial temperature");
  if (warmup < 1) throw UsageError("temperature warmup must be >= 1");
}

void NoiseSchedule::validate() const {
  if (!(r0 >= 0.0 && r0 <= 1.0 && rm >= 0.0 && rm <= 1.0))
    throw UsageError("noise ratios must be in [0,1]");
  if (!(rm >= r0)) throw UsageError("max noise ratio must be >= initial");
  if (warmup < 1) throw UsageError("noise warmup must be >= 1");
}

namespace {

double linear_ramp(double v0, double vm, int warmup, int64_t k) {
  if (k < 1) throw UsageError("schedule index must be >= 1");
  double v = static_cast<double>(k - 1) * (vm - v0) / warmup + v0;
  return std::min(vm, v);
}

}  // namespace

double temperature_at(const TemperatureSchedule& s, int64_t k) {
  s.validate();
  return linear_ramp(s.t0, s.tm, s.warmup, k);
}

double noise_ratio_at(const NoiseSchedule& s, int64_t k) {
  s.validate();
  return linear_ramp(s.r0, s.rm, s.warmup, k);
}

namespace {

template <class Key>
std::map<Key, double> exponentiated_shares(const std::map<Key, size_t>& sizes,
                                           double temperature) {
  if (sizes.empty()) throw UsageError("no datasets to sample from");
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  double total = 0;
  for (const auto& [key, n] : sizes) {
    if (n == 0) throw DataError("empty dataset in sampling distribution");
    total += static_cast<double>(n);
  }
  std::map<Key, double> probs;
  double norm = 0;
  for (const auto& [key, n] : sizes) {
    double p = std::pow(static_cast<double>(n) / total, 1.0 / temperature);
    probs[key] = p;
    norm += p;
  }
  for (auto& [key, p] : probs) p /= norm;
  return probs;
}

}  // namespace

std::map<PairKey, double> pair_sampling_probs(
    const std::map<PairKey, size_t>& sizes, double temperature) {
  return exponentiated_shares(sizes, temperature);
}

std::map<LanguageId, double> lang_sampling_probs(
    const std::map<LanguageId, size_t>& sizes, double temperature) {
  return exponentiated_shares(sizes, temperature);
}

void MixConfig::validate() const {
  if (batch_tokens < 1) throw UsageError("batch_tokens must be >= 1");
  if (max_sentence_tokens < 4)
    throw UsageError("max_sentence_tokens must be >= 4");
  temperature.validate();
  mlm_noise.validate();
  dae_noise.validate();
  dae.validate();
}

SentencePool::SentencePool(std::string name, size_t n, uint64_t master_seed)
    : name_(std::move(name)),
      order_(n),
      master_seed_(master_seed),
      rng_(mix_seed(master_seed, "pool:" + name_, 0)) {
  if (n == 0) throw DataError("empty sentence pool: " + name_);
  for (size_t i = 0; i < n; ++i) order_[i] = static_cast<uint32_t>(i);
  reshuffle();
}

void SentencePool::reshuffle() {
  rng_.shuffle(order_);
  cursor_ = 0;
}

size_t SentencePool::next_index() {
  if (cursor_ >= order_.size()) reshuffle();
  return order_[cursor_++];
}

uint64_t SentencePool::next_noise_seed() {
  return mix_seed(master_seed_, "noise:" + name_, noise_draws_++);
}

nlohmann::json SentencePool::state() const {
  return {{"name", name_},
          {"order", order_},
          {"cursor", cursor_},
          {"noise_draws", noise_draws_},
          {"rng", rng_.save_state()}};
}

void SentencePool::restore(const nlohmann::json& j) {
  if (j.at("name").get<std::string>() != name_)
    throw DataError("pool state name mismatch: expected '" + name_ + "'");
  auto order = j.at("order").get<std::vector<uint32_t>>();
  if (order.size() != order_.size())
    throw DataError("pool state size mismatch for '" + name_ + "'");
  order_ = std::move(order);
  cursor_ = j.at("cursor").get<size_t>();
  noise_draws_ = j.at("noise_draws").get<uint64_t>();
  rng_.restore_state(j.at("rng").get<std::string>());
  if (cursor_ > order_.size())
    throw DataError("pool state cursor out of range for '" + name_ + "'");
}

BatchMixer::BatchMixer(const CorpusManifest& manifest,
                       const SubwordVocab& vocab, const MixConfig& cfg,
                       uint64_t master_seed)
    : vocab_(vocab),
      cfg_(cfg),
      master_seed_(master_seed),
      pick_rng_(mix_seed(master_seed, "mixer:pick", 0)) {
  cfg_.validate();

  for (const auto& bt : manifest.bitext) {
    PairKey key{bt.src_lang, bt.tgt_lang};
    if (bt.pairs.empty())
      throw DataError("no usable sentence pairs for " + pair_name(key));
    auto& enc = enc_bitext_[key];
    enc.reserve(bt.pairs.size());
    for (const auto& [src, tgt] : bt.pairs)
      enc.emplace_back(encode(src, vocab_), encode(tgt, vocab_));
    pair_sizes_[key] = enc.size();
    mt_pools_.emplace(key, SentencePool("mt:" + pair_name(key), enc.size(),
                                        master_seed));
    epoch_size_ += enc.size();
  }
  if (enc_bitext_.empty()) throw DataError("no bitext configured");

  for (const auto& mono : manifest.mono) {
    bool to_mlm = mono.side == MonoSide::Source || mono.side == MonoSide::Both;
    bool to_dae = mono.side == MonoSide::Target || mono.side == MonoSide::Both;
    if (mono.sentences.empty())
      throw DataError("no usable monolingual sentences for " + mono.lang);
    std::vector<TokenizedSentence> enc;
    enc.reserve(mono.sentences.size());
    for (const auto& s : mono.sentences) enc.push_back(encode(s, vocab_));
    if (to_mlm && cfg_.use_mlm) {
      enc_mlm_[mono.lang] = enc;
      mlm_sizes_[mono.lang] = enc.size();
      mlm_pools_.emplace(mono.lang, SentencePool("mlm:" + mono.lang,
                                                 enc.size(), master_seed));
    }
    if (to_dae && cfg_.use_dae) {
      enc_dae_[mono.lang] = std::move(enc);
      dae_sizes_[mono.lang] = enc_dae_[mono.lang].size();
      dae_pools_.emplace(mono.lang, SentencePool("dae:" + mono.lang,
                                                 enc_dae_[mono.lang].size(),
                                                 master_seed));
    }
  }
  if (cfg_.use_mlm && mlm_pools_.empty())
    throw UsageError("masking task enabled but no source-side monolingual data");
  if (cfg_.use_dae && dae_pools_.empty())
    throw UsageError("denoising task enabled but no target-side monolingual data");
}

int64_t BatchMixer::schedule_k() const {
  return cfg_.schedule_unit == ScheduleUnit::Epoch ? epoch_ : updates_ + 1;
}

double BatchMixer::current_temperature() const {
  return temperature_at(cfg_.temperature, schedule_k());
}

double BatchMixer::current_mlm_ratio() const {
  return noise_ratio_at(cfg_.mlm_noise, schedule_k());
}

double BatchMixer::current_dae_ratio() const {
  return noise_ratio_at(cfg_.dae_noise, schedule_k());
}

template <class Key>
Key BatchMixer::draw_key(const std::map<Key, double>& probs) {
  double u = pick_rng_.uniform_real();
  double acc = 0;
  const Key* last = nullptr;
  for (const auto& [key, p] : probs) {
    acc += p;
    last = &key;
    if (u < acc) return key;
  }
  return *last;
}

TaskBatch BatchMixer::fill_mt_batch() {
  auto probs = pair_sampling_probs(pair_sizes_, current_temperature());
  PairKey pair = draw_key(probs);
  auto& pool = mt_pools_.at(pair);
  const auto& enc = enc_bitext_.at(pair);

  TaskBatch batch;
  batch.task = Task::MT;
  batch.pair = pair;
  TokenId lid = vocab_.lid(pair.second);
  int tokens = 0;
  size_t guard = 0;
  while (tokens < cfg_.batch_tokens) {
    if (++guard > enc.size() + 1000)
      throw DataError("every sentence pair in " + pair_name(pair) +
                      " exceeds max_sentence_tokens");
    const auto& [src, tgt] = enc[pool.next_index()];
    int cost = static_cast<int>(
        std::max(src.ids.size() + 1, tgt.ids.size() + 1));
    if (cost > cfg_.max_sentence_tokens) continue;

    NoisedExample ex;
    ex.task = Task::MT;
    ex.lid = lid;
    ex.input_ids = src.ids;
    ex.input_ids.push_back(lid);
    ex.target_ids = tgt.ids;
    ex.loss_mask.assign(tgt.ids.size(), 1);
    batch.examples.push_back(std::move(ex));
    tokens += cost;
  }
  epoch_consumed_ += batch.examples.size();
  return batch;
}

TaskBatch BatchMixer::fill_mlm_batch() {
  auto probs = lang_sampling_probs(mlm_sizes_, current_temperature());
  LanguageId lang = draw_key(probs);
  auto& pool = mlm_pools_.at(lang);
  const auto& enc = enc_mlm_.at(lang);

  MlmConfig mc;
  mc.mask_ratio = current_mlm_ratio();
  mc.level = cfg_.mlm_level;
  mc.bert_style = cfg_.mlm_bert_style;

  TaskBatch batch;
  batch.task = Task::MLM;
  batch.lang = lang;
  int tokens = 0;
  size_t guard = 0;
  while (tokens < cfg_.batch_tokens) {
    if (++guard > enc.size() + 1000)
      throw DataError("every sentence in mono " + lang +
                      " exceeds max_sentence_tokens");
    const auto& sent = enc[pool.next_index()];
    uint64_t seed = pool.next_noise_seed();
    int cost = static_cast<int>(sent.ids.size());
    if (cost > cfg_.max_sentence_tokens) continue;
    Rng nrng(seed);
    batch.examples.push_back(mask_mlm(sent, mc, vocab_, nrng));
    tokens += cost;
  }
  return batch;
}

TaskBatch BatchMixer::fill_dae_batch() {
  auto probs = lang_sampling_probs(dae_sizes_, current_temperature());
  LanguageId lang = draw_key(probs);
  auto& pool = dae_pools_.at(lang);
  const auto& enc = enc_dae_.at(lang);

  DaeConfig dc = cfg_.dae;
  dc.infill_ratio = current_dae_ratio();
  TokenId lid = vocab_.lid(lang);

  TaskBatch batch;
  batch.task = Task::DAE;
  batch.lang = lang;
  int tokens = 0;
  size_t guard = 0;
  while (tokens < cfg_.batch_tokens) {
    if (++guard > enc.size() + 1000)
      throw DataError("every sentence in mono " + lang +
                      " exceeds max_sentence_tokens");
    const auto& sent = enc[pool.next_index()];
    uint64_t seed = pool.next_noise_seed();
    int cost = static_cast<int>(sent.ids.size()) + 2;
    if (cost > cfg_.max_sentence_tokens) continue;
    Rng nrng(seed);
    batch.examples.push_back(make_dae_example(sent, dc, lid, nrng));
    tokens += cost;
  }
  return batch;
}

std::vector<TaskBatch> BatchMixer::next_batches() {
  std::vector<TaskBatch> out;
  out.push_back(fill_mt_batch());
  if (cfg_.use_mlm) out.push_back(fill_mlm_batch());
  if (cfg_.use_dae) out.push_back(fill_dae_batch());
  ++updates_;
  while (epoch_consumed_ >= epoch_size_) {
    epoch_consumed_ -= epoch_size_;
    ++epoch_;
  }
  return out;
}

nlohmann::json BatchMixer::state() const {
  nlohmann::json pools = nlohmann::json::object();
  auto dump = [&pools](const auto& pool_map) {
    for (const auto& [key, pool] : pool_map)
      pools[pool.name()] = pool.state();
  };
  dump(mt_pools_);
  dump(mlm_pools_);
  dump(dae_pools_);
  return {{"epoch", epoch_},
          {"updates", updates_},
          {"epoch_consumed", epoch_consumed_},
          {"pick_rng", pick_rng_.save_state()},
          {"pools", pools}};
}

void BatchMixer::restore(const nlohmann::json& j) {
  epoch_ = j.at("epoch").get<int64_t>();
  updates_ = j.at("updates").get<int64_t>();
  epoch_consumed_ = j.at("epoch_consumed").get<size_t>();
  pick_rng_.restore_state(j.at("pick_rng").get<std::string>());
  const auto& pools = j.at("pools");
  auto load = [&pools](auto& pool_map) {
    for (auto& [key, pool] : pool_map)
      pool.restore(pools.at(pool.name()));
  };
  load(mt_pools_);
  load(mlm_pools_);
  load(dae_pools_);
}

}  // namespace mtnmt
