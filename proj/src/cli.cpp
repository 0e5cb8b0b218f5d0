#include "mtnmt/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mtnmt/corpus.hpp"
#include "mtnmt/error.hpp"
#include "mtnmt/eval.hpp"
#include "mtnmt/experiments.hpp"
#include "mtnmt/model.hpp"
#include "mtnmt/scheduling.hpp"
#include "mtnmt/tokenizer.hpp"
#include "mtnmt/trainer.hpp"

namespace mtnmt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return std::string(buf);
}

ScheduleUnit parse_schedule_unit(const std::string& s) {
  if (s == "epoch") return ScheduleUnit::Epoch;
  if (s == "step") return ScheduleUnit::Step;
  throw UsageError("schedule unit must be 'epoch' or 'step', got '" + s + "'");
}

MlmLevel parse_mlm_level(const std::string& s) {
  if (s == "token") return MlmLevel::Token;
  if (s == "word") return MlmLevel::Word;
  throw UsageError("masking level must be 'token' or 'word', got '" + s + "'");
}

LengthNorm parse_norm(const std::string& s) {
  if (s == "simple") return LengthNorm::Simple;
  if (s == "gnmt") return LengthNorm::Gnmt;
  throw UsageError("length norm must be 'simple' or 'gnmt', got '" + s + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path + ": " + e.what());
  }
}

void reject_unknown_keys(const json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* a) { return it.key() == a; });
    if (!known)
      throw UsageError("unknown config key '" + it.key() + "' under " + where);
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

// Everything `train` needs beyond the manifest, collected so a preset, a
// config file and command-line flags can overwrite it in that order.
struct TrainJob {
  size_t vocab_size = 320;
  ModelConfig model;
  MixConfig mix;
  OptimConfig optim;
  int accumulation = 4;
  int64_t updates = 1000;
  int64_t checkpoint_every = 0;
};

TrainJob job_from_preset(const std::string& name) {
  PresetConfig pc = preset_config(name);
  TrainJob job;
  job.vocab_size = pc.vocab_size;
  job.model = pc.model;
  job.mix = pc.mix;
  job.optim = pc.optim;
  job.accumulation = pc.accumulation;
  job.updates = pc.updates;
  return job;
}

void apply_config_file(TrainJob& job, const json& j) {
  reject_unknown_keys(j, {"vocab_size", "model", "mix", "optim", "train"},
                      "the root object");
  maybe(j, "vocab_size", job.vocab_size);
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown_keys(m,
                        {"d_model", "d_ff", "heads", "enc_layers", "dec_layers",
                         "max_positions", "dropout", "label_smoothing"},
                        "'model'");
    maybe(m, "d_model", job.model.d_model);
    maybe(m, "d_ff", job.model.d_ff);
    maybe(m, "heads", job.model.heads);
    maybe(m, "enc_layers", job.model.enc_layers);
    maybe(m, "dec_layers", job.model.dec_layers);
    maybe(m, "max_positions", job.model.max_positions);
    maybe(m, "dropout", job.model.dropout);
    maybe(m, "label_smoothing", job.model.label_smoothing);
  }
  if (j.contains("mix")) {
    const json& x = j.at("mix");
    reject_unknown_keys(
        x, {"batch_tokens", "max_sentence_tokens", "use_mlm", "use_dae",
            "schedule_unit", "mlm_level", "mlm_bert_style", "t0", "tm",
            "t_warmup", "mlm_r0", "mlm_rm", "mlm_warmup", "dae_r0", "dae_rm",
            "dae_warmup", "dae_poisson_lambda", "dae_drop_prob",
            "dae_blank_prob", "dae_swap_distance"},
        "'mix'");
    maybe(x, "batch_tokens", job.mix.batch_tokens);
    maybe(x, "max_sentence_tokens", job.mix.max_sentence_tokens);
    maybe(x, "use_mlm", job.mix.use_mlm);
    maybe(x, "use_dae", job.mix.use_dae);
    maybe(x, "mlm_bert_style", job.mix.mlm_bert_style);
    maybe(x, "t0", job.mix.temperature.t0);
    maybe(x, "tm", job.mix.temperature.tm);
    maybe(x, "t_warmup", job.mix.temperature.warmup);
    maybe(x, "mlm_r0", job.mix.mlm_noise.r0);
    maybe(x, "mlm_rm", job.mix.mlm_noise.rm);
    maybe(x, "mlm_warmup", job.mix.mlm_noise.warmup);
    maybe(x, "dae_r0", job.mix.dae_noise.r0);
    maybe(x, "dae_rm", job.mix.dae_noise.rm);
    maybe(x, "dae_warmup", job.mix.dae_noise.warmup);
    maybe(x, "dae_poisson_lambda", job.mix.dae.poisson_lambda);
    maybe(x, "dae_drop_prob", job.mix.dae.drop_prob);
    maybe(x, "dae_blank_prob", job.mix.dae.blank_prob);
    maybe(x, "dae_swap_distance", job.mix.dae.swap_distance);
    if (x.contains("schedule_unit")) {
      std::string s;
      maybe(x, "schedule_unit", s);
      job.mix.schedule_unit = parse_schedule_unit(s);
    }
    if (x.contains("mlm_level")) {
      std::string s;
      maybe(x, "mlm_level", s);
      job.mix.mlm_level = parse_mlm_level(s);
    }
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    reject_unknown_keys(o, {"peak_lr", "warmup_steps", "beta1", "beta2", "eps"},
                        "'optim'");
    maybe(o, "peak_lr", job.optim.peak_lr);
    maybe(o, "warmup_steps", job.optim.warmup_steps);
    maybe(o, "beta1", job.optim.beta1);
    maybe(o, "beta2", job.optim.beta2);
    maybe(o, "eps", job.optim.eps);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown_keys(t, {"updates", "accumulation", "checkpoint_every"},
                        "'train'");
    maybe(t, "updates", job.updates);
    maybe(t, "accumulation", job.accumulation);
    maybe(t, "checkpoint_every", job.checkpoint_every);
  }
}

struct LoadedModel {
  SubwordVocab vocab;
  std::unique_ptr<Model<float>> model;
};

LoadedModel load_model_checkpoint(const std::string& path) {
  Checkpoint ck = read_checkpoint(path);
  LoadedModel lm;
  std::istringstream vs(ck.vocab_text);
  lm.vocab = SubwordVocab::load(vs);
  lm.model = std::make_unique<Model<float>>(ck.model_cfg);
  apply_checkpoint_params(*lm.model, ck);
  return lm;
}

struct TokenStats {
  int64_t tokens = 0;
  int64_t unk = 0;
};

// Chunks are fixed by position, so the summed totals do not depend on the
// worker count.
TokenStats count_tokens(const std::vector<std::string>& text,
                        const SubwordVocab& vocab, int workers) {
  size_t n = text.size();
  size_t chunk = (n + size_t(workers) - 1) / size_t(workers);
  if (chunk == 0) chunk = 1;
  std::vector<std::future<TokenStats>> parts;
  for (size_t begin = 0; begin < n; begin += chunk) {
    size_t end = std::min(n, begin + chunk);
    parts.push_back(
        std::async(std::launch::async, [&text, &vocab, begin, end] {
          TokenStats s;
          for (size_t i = begin; i < end; ++i) {
            TokenizedSentence ts = encode(text[i], vocab);
            s.tokens += int64_t(ts.ids.size());
            for (TokenId id : ts.ids)
              if (id == SubwordVocab::kUnk) ++s.unk;
          }
          return s;
        }));
  }
  TokenStats total;
  for (auto& p : parts) {
    TokenStats s = p.get();
    total.tokens += s.tokens;
    total.unk += s.unk;
  }
  return total;
}

int run_prepare_data(const std::string& manifest_path,
                     const std::string& out_dir, size_t vocab_size,
                     int workers, std::ostream& out) {
  if (workers < 1) throw UsageError("--workers must be at least 1");
  CorpusManifest manifest = load_manifest(manifest_path);
  std::vector<std::string> text = manifest_text(manifest);
  SubwordVocab vocab = train_vocab(text, manifest.languages, vocab_size);
  fs::create_directories(out_dir);
  std::string vocab_path = (fs::path(out_dir) / "vocab.txt").string();
  vocab.save(vocab_path);

  TokenStats ts = count_tokens(text, vocab, workers);
  json stats;
  stats["languages"] = manifest.languages;
  stats["direction"] = direction_name(manifest.direction);
  stats["sentences"] = text.size();
  stats["tokens"] = ts.tokens;
  stats["unk_tokens"] = ts.unk;
  stats["vocab_size"] = vocab.size();
  json jb = json::array();
  for (const auto& b : manifest.bitext)
    jb.push_back({{"pair", pair_name({b.src_lang, b.tgt_lang})},
                  {"train_pairs", b.pairs.size()},
                  {"valid_pairs", b.valid_pairs.size()}});
  stats["bitext"] = jb;
  json jm = json::array();
  for (const auto& mc : manifest.mono)
    jm.push_back({{"lang", mc.lang},
                  {"side", side_name(mc.side)},
                  {"sentences", mc.sentences.size()}});
  stats["mono"] = jm;
  std::string stats_path = (fs::path(out_dir) / "stats.json").string();
  std::ofstream sf(stats_path);
  sf << stats.dump(2) << "\n";

  out << "vocabulary: " << vocab.size() << " entries -> " << vocab_path
      << "\n";
  out << "sentences: " << text.size() << "  tokens: " << ts.tokens
      << "  unk: " << ts.unk << "\n";
  out << "stats: " << stats_path << "\n";
  return 0;
}

int run_train(const TrainJob& base, const std::string& manifest_path,
              const std::string& out_dir, uint64_t seed, bool resume,
              std::ostream& out) {
  TrainJob job = base;
  CorpusManifest manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  std::string ckpt_path = (fs::path(out_dir) / "model.ckpt").string();
  std::string log_path = (fs::path(out_dir) / "metrics.jsonl").string();
  std::string vocab_path = (fs::path(out_dir) / "vocab.txt").string();

  TrainConfig tc;
  tc.total_updates = job.updates;
  tc.accumulation = job.accumulation;
  tc.optim = job.optim;
  tc.log_path = log_path;
  tc.checkpoint_path = ckpt_path;
  tc.checkpoint_every = job.checkpoint_every;

  if (resume && fs::exists(ckpt_path)) {
    Checkpoint ck = read_checkpoint(ckpt_path);
    std::istringstream vs(ck.vocab_text);
    SubwordVocab vocab = SubwordVocab::load(vs);
    Model<float> model(ck.model_cfg);
    BatchMixer mixer(manifest, vocab, job.mix, seed);
    Trainer trainer(model, mixer, vocab, tc, seed);
    trainer.restore(ck);
    out << "resuming from " << ckpt_path << " at update "
        << trainer.updates_done() << "\n";
    trainer.train();
    out << "trained through update " << trainer.updates_done() << "\n";
    out << "metrics: " << log_path << "\ncheckpoint: " << ckpt_path << "\n";
    return 0;
  }
  if (resume)
    out << "no checkpoint at " << ckpt_path << ", starting fresh\n";

  SubwordVocab vocab =
      train_vocab(manifest_text(manifest), manifest.languages, job.vocab_size);
  vocab.save(vocab_path);
  job.model.vocab_size = int(vocab.size());
  Model<float> model(job.model);
  model.init_params(seed);
  BatchMixer mixer(manifest, vocab, job.mix, seed);
  Trainer trainer(model, mixer, vocab, tc, seed);
  out << "vocabulary: " << vocab.size() << " entries -> " << vocab_path
      << "\n";
  trainer.train();
  out << "trained " << trainer.updates_done() << " updates\n";
  out << "metrics: " << log_path << "\ncheckpoint: " << ckpt_path << "\n";
  return 0;
}

int run_translate(const std::string& model_path, const std::string& src_path,
                  const std::string& tgt_lang, const DecodeConfig& dc,
                  const std::string& out_path, std::ostream& out) {
  dc.validate();
  LoadedModel lm = load_model_checkpoint(model_path);
  TokenId lid = lm.vocab.lid(tgt_lang);
  std::vector<std::string> lines = read_lines(src_path);

  std::ofstream file;
  std::ostream* dst = &out;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw DataError("cannot write " + out_path);
    dst = &file;
  }
  for (const auto& line : lines) {
    TokenizedSentence ts = encode(line, lm.vocab);
    std::vector<TokenId> ids = ts.ids;
    ids.push_back(lid);
    std::vector<TokenId> hyp = beam_decode(*lm.model, ids, dc);
    *dst << decode(hyp, lm.vocab) << "\n";
  }
  if (!out_path.empty())
    out << "translated " << lines.size() << " lines -> " << out_path << "\n";
  return 0;
}

int run_backtranslate_manifest(const std::string& model_path,
                               const std::string& manifest_path,
                               const std::string& out_dir,
                               const DecodeConfig& dc, int64_t max_per_pair,
                               std::ostream& out) {
  dc.validate();
  LoadedModel lm = load_model_checkpoint(model_path);
  CorpusManifest manifest = load_manifest(manifest_path);
  std::string path = generate_back_translations(*lm.model, lm.vocab, manifest,
                                                out_dir, dc, max_per_pair);
  out << "wrote " << path << "\n";
  return 0;
}

// Single-file mode: the monolingual file holds target-language text; each
// line is decoded into the source language to form a synthetic pair. Lines
// whose translation comes back empty are dropped from both sides.
int run_backtranslate_mono(const std::string& model_path,
                           const std::string& mono_path,
                           const std::string& src_lang,
                           const std::string& tgt_lang,
                           const std::string& out_prefix,
                           const DecodeConfig& dc, int64_t max_per_pair,
                           std::ostream& out) {
  dc.validate();
  if (src_lang == tgt_lang)
    throw UsageError("--src-lang and --tgt-lang must differ");
  LoadedModel lm = load_model_checkpoint(model_path);
  TokenId lid = lm.vocab.lid(src_lang);
  std::vector<std::string> lines = read_lines(mono_path);

  std::vector<std::string> synthetic, kept;
  for (const auto& line : lines) {
    if (max_per_pair >= 0 && int64_t(kept.size()) >= max_per_pair) break;
    TokenizedSentence ts = encode(line, lm.vocab);
    if (ts.ids.empty()) continue;
    std::vector<TokenId> ids = ts.ids;
    ids.push_back(lid);
    std::string text = decode(beam_decode(*lm.model, ids, dc), lm.vocab);
    if (text.empty()) continue;
    synthetic.push_back(text);
    kept.push_back(line);
  }

  auto write_side = [](const std::string& path,
                       const std::vector<std::string>& ls) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    for (const auto& l : ls) f << l << "\n";
  };
  write_side(out_prefix + "." + src_lang, synthetic);
  write_side(out_prefix + "." + tgt_lang, kept);
  out << "wrote " << synthetic.size() << " synthetic pairs -> " << out_prefix
      << "." << src_lang << " / " << out_prefix << "." << tgt_lang << "\n";
  return 0;
}

int run_score_bleu(const std::string& hyp_path, const std::string& ref_path,
                   std::ostream& out) {
  BleuReport r = bleu(read_lines(hyp_path), read_lines(ref_path));
  out << "BLEU = " << fmt("%.2f", r.score) << "\n";
  out << "precisions = " << fmt("%.1f", 100.0 * r.precisions[0]) << "/"
      << fmt("%.1f", 100.0 * r.precisions[1]) << "/"
      << fmt("%.1f", 100.0 * r.precisions[2]) << "/"
      << fmt("%.1f", 100.0 * r.precisions[3])
      << "  brevity_penalty = " << fmt("%.3f", r.brevity_penalty)
      << "  hyp_len = " << r.hyp_len << "  ref_len = " << r.ref_len << "\n";
  return 0;
}

int run_inspect_schedule(const TemperatureSchedule& ts,
                         const NoiseSchedule& mlm, const NoiseSchedule& dae,
                         int64_t count, const std::string& manifest_path,
                         bool tsv, std::ostream& out) {
  ts.validate();
  mlm.validate();
  dae.validate();
  if (count < 1) throw UsageError("--epochs must be at least 1");

  std::map<PairKey, size_t> sizes;
  if (!manifest_path.empty())
    sizes = corpus_sizes(load_manifest(manifest_path));

  std::vector<std::string> header{"k", "temperature", "mlm_ratio",
                                  "dae_ratio"};
  for (const auto& [pk, n] : sizes) header.push_back("p(" + pair_name(pk) + ")");

  auto cell = [&](double v) {
    return tsv ? fmt("%.17g", v) : fmt("%10.4f", v);
  };
  const char* sep = tsv ? "\t" : "  ";
  for (size_t i = 0; i < header.size(); ++i)
    out << (i ? sep : "") << header[i];
  out << "\n";
  for (int64_t k = 1; k <= count; ++k) {
    double T = temperature_at(ts, k);
    out << k << sep << cell(T) << sep << cell(noise_ratio_at(mlm, k)) << sep
        << cell(noise_ratio_at(dae, k));
    if (!sizes.empty()) {
      auto probs = pair_sampling_probs(sizes, T);
      for (const auto& [pk, p] : probs) out << sep << cell(p);
    }
    out << "\n";
  }
  return 0;
}

int run_run_experiment(const std::string& preset, uint64_t seed,
                       const std::string& out_dir,
                       const ExperimentOptions& opts, std::ostream& out) {
  ExperimentSummary s = run_experiment(preset, seed, out_dir, opts);
  out << format_summary(s);
  return s.passed ? 0 : 4;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{
      "Multilingual translation trainer with masked-language and denoising "
      "auxiliary tasks"};
  app.require_subcommand(1);
  app.set_help_flag("");
  app.set_help_all_flag("-h,--help",
                        "Print this help, including every subcommand's flags");

  int rc = 0;

  // prepare-data
  auto* prep = app.add_subcommand(
      "prepare-data", "Load a corpus manifest, train a subword vocabulary "
                      "and write corpus statistics");
  std::string prep_manifest, prep_out;
  size_t prep_vocab = 320;
  int prep_workers = 1;
  prep->add_option("--manifest", prep_manifest, "Corpus manifest JSON")
      ->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--vocab-size", prep_vocab, "Subword vocabulary size")
      ->capture_default_str();
  prep->add_option("--workers", prep_workers,
                   "Parallel workers for token counting")
      ->capture_default_str();
  prep->callback([&] {
    rc = run_prepare_data(prep_manifest, prep_out, prep_vocab, prep_workers,
                          out);
  });

  // train
  auto* tr = app.add_subcommand(
      "train", "Train a model on a corpus manifest with the translation, "
               "masking and denoising tasks");
  std::string tr_manifest, tr_out, tr_config, tr_preset, tr_sched_unit,
      tr_mlm_level;
  uint64_t tr_seed = 1;
  bool tr_resume = false;
  TrainJob d;  // built-in defaults, shown in help
  int64_t tr_updates = d.updates, tr_ckpt_every = d.checkpoint_every;
  int tr_accum = d.accumulation;
  size_t tr_vocab = d.vocab_size;
  int tr_batch = d.mix.batch_tokens, tr_maxsent = d.mix.max_sentence_tokens;
  int tr_dmodel = d.model.d_model, tr_dff = d.model.d_ff,
      tr_heads = d.model.heads, tr_enc = d.model.enc_layers,
      tr_dec = d.model.dec_layers, tr_maxpos = d.model.max_positions;
  double tr_dropout = d.model.dropout, tr_smooth = d.model.label_smoothing;
  double tr_peak = d.optim.peak_lr;
  int tr_warmup = d.optim.warmup_steps;
  double tr_t0 = d.mix.temperature.t0, tr_tm = d.mix.temperature.tm;
  int tr_twarm = d.mix.temperature.warmup;
  double tr_mlm_r0 = d.mix.mlm_noise.r0, tr_mlm_rm = d.mix.mlm_noise.rm;
  int tr_mlm_warm = d.mix.mlm_noise.warmup;
  double tr_dae_r0 = d.mix.dae_noise.r0, tr_dae_rm = d.mix.dae_noise.rm;
  int tr_dae_warm = d.mix.dae_noise.warmup;
  bool tr_mlm = d.mix.use_mlm, tr_dae = d.mix.use_dae;

  tr->add_option("--manifest", tr_manifest, "Corpus manifest JSON")
      ->required();
  tr->add_option("--out", tr_out,
                 "Output directory for vocab.txt, metrics.jsonl, model.ckpt")
      ->required();
  tr->add_option("--seed", tr_seed, "Master seed for all randomness")
      ->capture_default_str();
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--preset", tr_preset,
                 "Named settings bundle (see run-experiment --preset)");
  tr->add_flag("--resume", tr_resume,
               "Continue from the checkpoint in --out when one exists");
  auto* o_updates =
      tr->add_option("--updates", tr_updates, "Total parameter updates")
          ->capture_default_str();
  auto* o_accum = tr->add_option("--accumulation", tr_accum,
                                 "Micro-batches accumulated per update")
                      ->capture_default_str();
  auto* o_vocab = tr->add_option("--vocab-size", tr_vocab,
                                 "Subword vocabulary size")
                      ->capture_default_str();
  auto* o_batch = tr->add_option("--batch-tokens", tr_batch,
                                 "Per-task token budget per micro-batch")
                      ->capture_default_str();
  auto* o_maxsent = tr->add_option("--max-sentence-tokens", tr_maxsent,
                                   "Skip sentences longer than this")
                        ->capture_default_str();
  auto* o_dmodel =
      tr->add_option("--d-model", tr_dmodel, "Model width")->capture_default_str();
  auto* o_dff = tr->add_option("--d-ff", tr_dff, "Feed-forward width")
                    ->capture_default_str();
  auto* o_heads = tr->add_option("--heads", tr_heads, "Attention heads")
                      ->capture_default_str();
  auto* o_enc = tr->add_option("--enc-layers", tr_enc, "Encoder layers")
                    ->capture_default_str();
  auto* o_dec = tr->add_option("--dec-layers", tr_dec, "Decoder layers")
                    ->capture_default_str();
  auto* o_maxpos = tr->add_option("--max-positions", tr_maxpos,
                                  "Positional table size")
                       ->capture_default_str();
  auto* o_dropout =
      tr->add_option("--dropout", tr_dropout, "Dropout probability")
          ->capture_default_str();
  auto* o_smooth = tr->add_option("--label-smoothing", tr_smooth,
                                  "Label smoothing mass")
                       ->capture_default_str();
  auto* o_peak = tr->add_option("--peak-lr", tr_peak,
                                "Learning rate at the end of warmup")
                     ->capture_default_str();
  auto* o_warm = tr->add_option("--warmup-steps", tr_warmup,
                                "Optimizer warmup steps")
                     ->capture_default_str();
  auto* o_t0 = tr->add_option("--t0", tr_t0,
                              "Initial data-sampling temperature")
                   ->capture_default_str();
  auto* o_tm = tr->add_option("--tm", tr_tm, "Final data-sampling temperature")
                   ->capture_default_str();
  auto* o_twarm = tr->add_option("--t-warmup", tr_twarm,
                                 "Epochs (or steps) to reach the final "
                                 "temperature")
                      ->capture_default_str();
  auto* o_mr0 = tr->add_option("--mlm-r0", tr_mlm_r0,
                               "Initial masking ratio")
                    ->capture_default_str();
  auto* o_mrm = tr->add_option("--mlm-rm", tr_mlm_rm, "Final masking ratio")
                    ->capture_default_str();
  auto* o_mwarm = tr->add_option("--mlm-warmup", tr_mlm_warm,
                                 "Ramp length for the masking ratio")
                      ->capture_default_str();
  auto* o_dr0 = tr->add_option("--dae-r0", tr_dae_r0,
                               "Initial denoising infill ratio")
                    ->capture_default_str();
  auto* o_drm = tr->add_option("--dae-rm", tr_dae_rm,
                               "Final denoising infill ratio")
                    ->capture_default_str();
  auto* o_dwarm = tr->add_option("--dae-warmup", tr_dae_warm,
                                 "Ramp length for the denoising ratio")
                      ->capture_default_str();
  auto* o_mlm = tr->add_flag("--mlm,!--no-mlm", tr_mlm,
                             "Train the masked-language task");
  auto* o_dae = tr->add_flag("--dae,!--no-dae", tr_dae,
                             "Train the denoising task");
  auto* o_sched = tr->add_option("--schedule-unit", tr_sched_unit,
                                 "Advance curricula per 'epoch' or 'step'");
  auto* o_mlevel = tr->add_option("--mlm-level", tr_mlm_level,
                                  "Mask whole 'word's or single 'token's");
  auto* o_ckpt = tr->add_option("--checkpoint-every", tr_ckpt_every,
                                "Also checkpoint every N updates (0 = only "
                                "at the end)")
                      ->capture_default_str();

  tr->callback([&] {
    TrainJob job;
    if (!tr_preset.empty()) job = job_from_preset(tr_preset);
    if (!tr_config.empty()) apply_config_file(job, read_json_file(tr_config));
    if (o_updates->count()) job.updates = tr_updates;
    if (o_accum->count()) job.accumulation = tr_accum;
    if (o_vocab->count()) job.vocab_size = tr_vocab;
    if (o_batch->count()) job.mix.batch_tokens = tr_batch;
    if (o_maxsent->count()) job.mix.max_sentence_tokens = tr_maxsent;
    if (o_dmodel->count()) job.model.d_model = tr_dmodel;
    if (o_dff->count()) job.model.d_ff = tr_dff;
    if (o_heads->count()) job.model.heads = tr_heads;
    if (o_enc->count()) job.model.enc_layers = tr_enc;
    if (o_dec->count()) job.model.dec_layers = tr_dec;
    if (o_maxpos->count()) job.model.max_positions = tr_maxpos;
    if (o_dropout->count()) job.model.dropout = tr_dropout;
    if (o_smooth->count()) job.model.label_smoothing = tr_smooth;
    if (o_peak->count()) job.optim.peak_lr = tr_peak;
    if (o_warm->count()) job.optim.warmup_steps = tr_warmup;
    if (o_t0->count()) job.mix.temperature.t0 = tr_t0;
    if (o_tm->count()) job.mix.temperature.tm = tr_tm;
    if (o_twarm->count()) job.mix.temperature.warmup = tr_twarm;
    if (o_mr0->count()) job.mix.mlm_noise.r0 = tr_mlm_r0;
    if (o_mrm->count()) job.mix.mlm_noise.rm = tr_mlm_rm;
    if (o_mwarm->count()) job.mix.mlm_noise.warmup = tr_mlm_warm;
    if (o_dr0->count()) job.mix.dae_noise.r0 = tr_dae_r0;
    if (o_drm->count()) job.mix.dae_noise.rm = tr_dae_rm;
    if (o_dwarm->count()) job.mix.dae_noise.warmup = tr_dae_warm;
    if (o_mlm->count()) job.mix.use_mlm = tr_mlm;
    if (o_dae->count()) job.mix.use_dae = tr_dae;
    if (o_sched->count())
      job.mix.schedule_unit = parse_schedule_unit(tr_sched_unit);
    if (o_mlevel->count()) job.mix.mlm_level = parse_mlm_level(tr_mlm_level);
    if (o_ckpt->count()) job.checkpoint_every = tr_ckpt_every;
    rc = run_train(job, tr_manifest, tr_out, tr_seed, tr_resume, out);
  });

  // backtranslate
  auto* bt = app.add_subcommand(
      "backtranslate", "Decode monolingual target-side text into synthetic "
                       "sources and write the combined corpus");
  std::string bt_model, bt_manifest, bt_mono, bt_src, bt_tgt, bt_out,
      bt_norm = "simple";
  int bt_beam = 5;
  double bt_alpha = 1.0, bt_factor = 2.0;
  int64_t bt_max = -1;
  bt->add_option("--model", bt_model, "Model checkpoint")->required();
  bt->add_option("--out", bt_out,
                 "Output directory (with --manifest) or file prefix (with "
                 "--mono)")
      ->required();
  auto* bt_o_manifest = bt->add_option(
      "--manifest", bt_manifest,
      "Back-translate every eligible monolingual entry of this manifest");
  auto* bt_o_mono = bt->add_option(
      "--mono", bt_mono, "Single file of target-language sentences");
  bt_o_manifest->excludes(bt_o_mono);
  bt->add_option("--src-lang", bt_src,
                 "Language to generate (synthetic source), with --mono");
  bt->add_option("--tgt-lang", bt_tgt,
                 "Language of the --mono file");
  bt->add_option("--beam", bt_beam, "Beam size")->capture_default_str();
  bt->add_option("--alpha", bt_alpha, "Length penalty exponent")
      ->capture_default_str();
  bt->add_option("--max-len-factor", bt_factor,
                 "Output length budget as a multiple of the source length")
      ->capture_default_str();
  bt->add_option("--norm", bt_norm, "Length penalty form: simple or gnmt")
      ->capture_default_str();
  bt->add_option("--max-per-pair", bt_max,
                 "Cap on synthetic pairs (-1 = no cap)")
      ->capture_default_str();
  bt->callback([&] {
    DecodeConfig dc;
    dc.beam_size = bt_beam;
    dc.alpha = bt_alpha;
    dc.max_len_factor = bt_factor;
    dc.norm = parse_norm(bt_norm);
    if (!bt_manifest.empty()) {
      rc = run_backtranslate_manifest(bt_model, bt_manifest, bt_out, dc,
                                      bt_max, out);
    } else if (!bt_mono.empty()) {
      if (bt_src.empty() || bt_tgt.empty())
        throw UsageError("--mono needs --src-lang and --tgt-lang");
      rc = run_backtranslate_mono(bt_model, bt_mono, bt_src, bt_tgt, bt_out,
                                  dc, bt_max, out);
    } else {
      throw UsageError("backtranslate needs --manifest or --mono");
    }
  });

  // translate
  auto* ts = app.add_subcommand("translate",
                                "Beam-decode a file of sentences into the "
                                "requested language");
  std::string ts_model, ts_src, ts_lang, ts_out, ts_norm = "simple";
  int ts_beam = 5;
  double ts_alpha = 1.0, ts_factor = 2.0;
  ts->add_option("--model", ts_model, "Model checkpoint")->required();
  ts->add_option("--src", ts_src, "Input file, one sentence per line")
      ->required();
  ts->add_option("--tgt-lang", ts_lang, "Target language tag")->required();
  ts->add_option("--beam", ts_beam, "Beam size")->capture_default_str();
  ts->add_option("--alpha", ts_alpha, "Length penalty exponent")
      ->capture_default_str();
  ts->add_option("--max-len-factor", ts_factor,
                 "Output length budget as a multiple of the source length")
      ->capture_default_str();
  ts->add_option("--norm", ts_norm, "Length penalty form: simple or gnmt")
      ->capture_default_str();
  ts->add_option("--out", ts_out, "Write translations here instead of stdout");
  ts->callback([&] {
    DecodeConfig dc;
    dc.beam_size = ts_beam;
    dc.alpha = ts_alpha;
    dc.max_len_factor = ts_factor;
    dc.norm = parse_norm(ts_norm);
    rc = run_translate(ts_model, ts_src, ts_lang, dc, ts_out, out);
  });

  // score-bleu
  auto* sb = app.add_subcommand("score-bleu",
                                "Corpus BLEU of a hypothesis file against a "
                                "reference file");
  std::string sb_hyp, sb_ref;
  sb->add_option("--hyp", sb_hyp, "Hypothesis file")->required();
  sb->add_option("--ref", sb_ref, "Reference file")->required();
  sb->callback([&] { rc = run_score_bleu(sb_hyp, sb_ref, out); });

  // inspect-schedule
  auto* is = app.add_subcommand(
      "inspect-schedule", "Print the temperature, noising ratios and pair "
                          "sampling probabilities per epoch");
  std::string is_manifest;
  int64_t is_epochs = 10;
  bool is_tsv = false;
  TemperatureSchedule is_t;
  NoiseSchedule is_m{0.10, 0.20, 5}, is_d{0.20, 0.40, 5};
  is->add_option("--epochs", is_epochs, "Schedule positions to print")
      ->capture_default_str();
  is->add_option("--t0", is_t.t0, "Initial temperature")->capture_default_str();
  is->add_option("--tm", is_t.tm, "Final temperature")->capture_default_str();
  is->add_option("--t-warmup", is_t.warmup, "Temperature ramp length")
      ->capture_default_str();
  is->add_option("--mlm-r0", is_m.r0, "Initial masking ratio")
      ->capture_default_str();
  is->add_option("--mlm-rm", is_m.rm, "Final masking ratio")
      ->capture_default_str();
  is->add_option("--mlm-warmup", is_m.warmup, "Masking ramp length")
      ->capture_default_str();
  is->add_option("--dae-r0", is_d.r0, "Initial denoising ratio")
      ->capture_default_str();
  is->add_option("--dae-rm", is_d.rm, "Final denoising ratio")
      ->capture_default_str();
  is->add_option("--dae-warmup", is_d.warmup, "Denoising ramp length")
      ->capture_default_str();
  is->add_option("--manifest", is_manifest,
                 "Also show per-pair sampling probabilities for this corpus");
  is->add_flag("--tsv", is_tsv, "Tab-separated machine-readable output");
  is->callback([&] {
    rc = run_inspect_schedule(is_t, is_m, is_d, is_epochs, is_manifest, is_tsv,
                              out);
  });

  // run-experiment
  auto* re = app.add_subcommand(
      "run-experiment", "Generate a toy corpus, train the preset's systems "
                        "and print the comparison table");
  std::string re_preset, re_out;
  uint64_t re_seed = 1;
  int64_t re_updates = -1;
  int re_eval = -1;
  re->add_option("--preset", re_preset,
                 "One of: toy-overfit, toy-mtl, toy-x2x-zeroshot, toy-bt")
      ->required();
  re->add_option("--out", re_out, "Output directory")->required();
  re->add_option("--seed", re_seed, "Master seed")->capture_default_str();
  re->add_option("--updates", re_updates,
                 "Override the preset's training budget (-1 = keep)")
      ->capture_default_str();
  re->add_option("--eval-sentences", re_eval,
                 "Override the preset's evaluation set size (-1 = keep)")
      ->capture_default_str();
  re->callback([&] {
    ExperimentOptions opts;
    opts.updates_override = re_updates;
    opts.eval_sentences = re_eval;
    rc = run_run_experiment(re_preset, re_seed, re_out, opts, out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForHelp&) {
    const CLI::App* a = &app;
    while (!a->get_subcommands().empty()) a = a->get_subcommands().front();
    out << a->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}

}  // namespace mtnmt
