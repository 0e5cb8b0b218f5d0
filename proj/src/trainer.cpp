#include "mtnmt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "mtnmt/error.hpp"

namespace mtnmt {

using nlohmann::json;

void OptimConfig::validate() const {
  if (peak_lr <= 0.0) throw UsageError("optim: peak_lr must be positive");
  if (warmup_steps < 1) throw UsageError("optim: warmup_steps must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw UsageError("optim: betas must be in [0,1)");
  if (eps <= 0.0) throw UsageError("optim: eps must be positive");
}

double lr_at(const OptimConfig& cfg, int64_t step) {
  if (step < 1) throw UsageError("lr_at: step counts from 1");
  double w = double(cfg.warmup_steps);
  double s = double(step);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

template <typename T>
Adam<T>::Adam(ParamStore<T>& store, const OptimConfig& cfg)
    : store_(store), cfg_(cfg) {
  cfg_.validate();
  m_.reserve(store.count());
  v_.reserve(store.count());
  for (size_t i = 0; i < store.count(); ++i) {
    const auto& e = store.entry(i);
    m_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(Mat<T>::Zero(e.value.rows(), e.value.cols()));
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
  const T bias1 = T(1) - T(std::pow(cfg_.beta1, double(t_)));
  const T bias2 = T(1) - T(std::pow(cfg_.beta2, double(t_)));
  const T step_lr = T(lr), eps = T(cfg_.eps);
  for (size_t i = 0; i < store_.count(); ++i) {
    auto& e = store_.entry(i);
    m_[i] = b1 * m_[i] + (T(1) - b1) * e.grad;
    v_[i].array() =
        b2 * v_[i].array() + (T(1) - b2) * e.grad.array().square();
    e.value.array() -= step_lr * (m_[i].array() / bias1) /
                       ((v_[i].array() / bias2).sqrt() + eps);
  }
}

template <typename T>
std::vector<T> Adam<T>::flat_moments1() const {
  std::vector<T> out;
  for (const auto& m : m_)
    out.insert(out.end(), m.data(), m.data() + m.size());
  return out;
}

template <typename T>
std::vector<T> Adam<T>::flat_moments2() const {
  std::vector<T> out;
  for (const auto& v : v_)
    out.insert(out.end(), v.data(), v.data() + v.size());
  return out;
}

template <typename T>
void Adam<T>::restore(int64_t t, const std::vector<T>& m1,
                      const std::vector<T>& m2) {
  if (t < 0) throw DataError("optimizer state: negative step count");
  size_t total = 0;
  for (const auto& m : m_) total += size_t(m.size());
  if (m1.size() != total || m2.size() != total)
    throw DataError("optimizer state: moment size mismatch");
  t_ = t;
  size_t off = 0;
  for (size_t i = 0; i < m_.size(); ++i) {
    std::copy(m1.begin() + off, m1.begin() + off + m_[i].size(),
              m_[i].data());
    std::copy(m2.begin() + off, m2.begin() + off + v_[i].size(),
              v_[i].data());
    off += size_t(m_[i].size());
  }
}

template class Adam<float>;
template class Adam<double>;

void TrainConfig::validate() const {
  if (total_updates < 0) throw UsageError("train: negative update count");
  if (accumulation < 1) throw UsageError("train: accumulation must be >= 1");
  if (checkpoint_every < 0)
    throw UsageError("train: checkpoint interval must be >= 0");
  optim.validate();
}

Trainer::Trainer(Model<float>& model, BatchMixer& mixer,
                 const SubwordVocab& vocab, const TrainConfig& cfg,
                 uint64_t seed)
    : model_(model),
      mixer_(mixer),
      vocab_(vocab),
      cfg_(cfg),
      adam_(model.params(), cfg.optim),
      dropout_rng_(mix_seed(seed, "trainer:dropout")) {
  cfg_.validate();
}

namespace {

int64_t seq_token_count(const std::vector<NoisedExample>& batch) {
  int64_t n = 0;
  for (const auto& ex : batch) n += int64_t(ex.target_ids.size()) + 1;
  return n;
}

int64_t masked_token_count(const std::vector<NoisedExample>& batch) {
  int64_t n = 0;
  for (const auto& ex : batch)
    for (uint8_t m : ex.loss_mask) n += m ? 1 : 0;
  return n;
}

}  // namespace

UpdateRecord Trainer::update() {
  UpdateRecord rec;
  rec.step = update_count_ + 1;
  rec.epoch = mixer_.epoch();
  rec.temperature = mixer_.current_temperature();
  rec.mlm_ratio = mixer_.current_mlm_ratio();
  rec.dae_ratio = mixer_.current_dae_ratio();
  rec.lr = lr_at(cfg_.optim, rec.step);

  std::vector<std::vector<TaskBatch>> rounds;
  rounds.reserve(size_t(cfg_.accumulation));
  for (int f = 0; f < cfg_.accumulation; ++f)
    rounds.push_back(mixer_.next_batches());

  // each task is normalized by its token total across the whole update, so
  // accumulated micro-batches reproduce one large batch's gradient
  int64_t n_mt = 0, n_mlm = 0, n_dae = 0;
  for (const auto& round : rounds)
    for (const auto& tb : round) {
      if (tb.task == Task::MT) n_mt += seq_token_count(tb.examples);
      if (tb.task == Task::DAE) n_dae += seq_token_count(tb.examples);
      if (tb.task == Task::MLM) n_mlm += masked_token_count(tb.examples);
    }

  double s_mt = 0.0, s_mlm = 0.0, s_dae = 0.0;
  model_.params().zero_grads();
  for (const auto& round : rounds) {
    for (const auto& tb : round) {
      Tape<float> tape;
      if (tb.task == Task::MLM) {
        auto fw = model_.forward_masked_lm(tape, tb.examples, true,
                                           &dropout_rng_);
        if (fw.loss_sum) {
          tape.backward(fw.loss_sum, float(1.0 / double(n_mlm)));
          s_mlm += fw.sum_value;
        }
      } else {
        int64_t n = tb.task == Task::MT ? n_mt : n_dae;
        auto fw =
            model_.forward_seq2seq(tape, tb.examples, true, &dropout_rng_);
        tape.backward(fw.loss_sum, float(1.0 / double(n)));
        (tb.task == Task::MT ? s_mt : s_dae) += fw.sum_value;
      }
    }
  }
  rec.loss_mt = n_mt > 0 ? s_mt / double(n_mt) : 0.0;
  rec.loss_mlm = n_mlm > 0 ? s_mlm / double(n_mlm) : 0.0;
  rec.loss_dae = n_dae > 0 ? s_dae / double(n_dae) : 0.0;

  if (!std::isfinite(rec.loss_mt) || !std::isfinite(rec.loss_mlm) ||
      !std::isfinite(rec.loss_dae) || !model_.params().grads_finite())
    abort_nonfinite(rec);

  adam_.step(rec.lr);
  model_.params().zero_grads();
  if (!model_.params().values_finite()) abort_nonfinite(rec);
  ++update_count_;
  return rec;
}

void Trainer::train() {
  train([](const UpdateRecord&) { return true; });
}

void Trainer::train(const std::function<bool(const UpdateRecord&)>& keep_going) {
  while (update_count_ < cfg_.total_updates) {
    UpdateRecord rec = update();
    if (!cfg_.log_path.empty()) append_log(rec);
    if (!cfg_.checkpoint_path.empty() && cfg_.checkpoint_every > 0 &&
        update_count_ % cfg_.checkpoint_every == 0)
      save(cfg_.checkpoint_path);
    if (!keep_going(rec)) break;
  }
  if (!cfg_.checkpoint_path.empty()) save(cfg_.checkpoint_path);
}

void Trainer::append_log(const UpdateRecord& rec) const {
  json j{{"step", rec.step},          {"epoch", rec.epoch},
         {"temperature", rec.temperature}, {"mlm_ratio", rec.mlm_ratio},
         {"dae_ratio", rec.dae_ratio},     {"loss_mt", rec.loss_mt},
         {"loss_mlm", rec.loss_mlm},       {"loss_dae", rec.loss_dae},
         {"lr", rec.lr}};
  std::ofstream out(cfg_.log_path, std::ios::app);
  if (!out) throw DataError("cannot open metrics log: " + cfg_.log_path);
  out << j.dump() << '\n';
}

void Trainer::abort_nonfinite(const UpdateRecord& rec) const {
  std::ostringstream diag;
  diag << "non-finite value at update " << rec.step << ": loss_mt="
       << rec.loss_mt << " loss_mlm=" << rec.loss_mlm
       << " loss_dae=" << rec.loss_dae << " lr=" << rec.lr;
  int shown = 0;
  for (size_t i = 0; i < model_.params().count() && shown < 8; ++i) {
    const auto& e = model_.params().entry(i);
    if (!e.grad.allFinite() || !e.value.allFinite()) {
      diag << " [" << e.name << (e.value.allFinite() ? " grad" : " value")
           << " non-finite]";
      ++shown;
    }
  }
  std::cerr << diag.str() << std::endl;
  if (!cfg_.log_path.empty()) {
    std::ofstream out(cfg_.log_path, std::ios::app);
    if (out) out << json{{"event", "abort"}, {"detail", diag.str()}}.dump()
                 << '\n';
  }
  throw NumericalError(diag.str());
}

Checkpoint Trainer::make_checkpoint() const {
  Checkpoint ck;
  ck.model_cfg = model_.config();
  std::ostringstream vs;
  vocab_.save(vs);
  ck.vocab_text = vs.str();
  ck.mixer_state = mixer_.state().dump();
  ck.dropout_rng_state = dropout_rng_.save_state();
  ck.update_count = update_count_;
  ck.adam_t = adam_.steps_taken();
  for (size_t i = 0; i < model_.params().count(); ++i) {
    const auto& e = model_.params().entry(i);
    ck.layout.emplace_back(e.name,
                           std::pair<int, int>{int(e.value.rows()),
                                               int(e.value.cols())});
  }
  ck.params = model_.params().flat_values();
  ck.adam_m = adam_.flat_moments1();
  ck.adam_v = adam_.flat_moments2();
  return ck;
}

void apply_checkpoint_params(Model<float>& model, const Checkpoint& ck) {
  if (ck.layout.size() != model.params().count())
    throw DataError("checkpoint: parameter layout mismatch");
  for (size_t i = 0; i < ck.layout.size(); ++i) {
    const auto& e = model.params().entry(i);
    if (ck.layout[i].first != e.name ||
        ck.layout[i].second.first != int(e.value.rows()) ||
        ck.layout[i].second.second != int(e.value.cols()))
      throw DataError("checkpoint: parameter layout mismatch at " + e.name);
  }
  model.params().set_flat_values(ck.params);
}

void Trainer::restore(const Checkpoint& ck) {
  apply_checkpoint_params(model_, ck);
  adam_.restore(ck.adam_t, ck.adam_m, ck.adam_v);
  mixer_.restore(json::parse(ck.mixer_state));
  dropout_rng_.restore_state(ck.dropout_rng_state);
  update_count_ = ck.update_count;
}

void Trainer::save(const std::string& path) const {
  write_checkpoint(path, make_checkpoint());
}

namespace {

json model_cfg_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},   {"d_model", c.d_model},
              {"d_ff", c.d_ff},               {"heads", c.heads},
              {"enc_layers", c.enc_layers},   {"dec_layers", c.dec_layers},
              {"max_positions", c.max_positions}, {"dropout", c.dropout},
              {"label_smoothing", c.label_smoothing}};
}

ModelConfig model_cfg_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.heads = j.at("heads").get<int>();
  c.enc_layers = j.at("enc_layers").get<int>();
  c.dec_layers = j.at("dec_layers").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  return c;
}

constexpr char kMagic[] = "MTNMTCK1\n";  // 9 chars

void write_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            std::streamsize(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream& in, size_t n,
                               const std::string& what) {
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          std::streamsize(n * sizeof(float)));
  if (size_t(in.gcount()) != n * sizeof(float))
    throw DataError("checkpoint: truncated " + what);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  json header;
  header["version"] = 1;
  header["model"] = model_cfg_to_json(ck.model_cfg);
  header["vocab"] = ck.vocab_text;
  header["mixer"] =
      ck.mixer_state.empty() ? json::object() : json::parse(ck.mixer_state);
  header["dropout_rng"] = ck.dropout_rng_state;
  header["update_count"] = ck.update_count;
  header["adam_t"] = ck.adam_t;
  json layout = json::array();
  for (const auto& [name, shape] : ck.layout)
    layout.push_back(json::array({name, shape.first, shape.second}));
  header["layout"] = layout;
  std::string hs = header.dump();

  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + tmp);
    out.write(kMagic, 9);
    uint64_t len = hs.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(hs.data(), std::streamsize(hs.size()));
    write_floats(out, ck.params);
    write_floats(out, ck.adam_m);
    write_floats(out, ck.adam_v);
    out.flush();
    if (!out) throw DataError("checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[9];
  in.read(magic, 9);
  if (in.gcount() != 9 || std::string(magic, 9) != kMagic)
    throw DataError("checkpoint: bad magic in " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (in.gcount() != sizeof(len) || len == 0 || len > (1ull << 30))
    throw DataError("checkpoint: bad header length");
  std::string hs(len, '\0');
  in.read(hs.data(), std::streamsize(len));
  if (uint64_t(in.gcount()) != len)
    throw DataError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: header parse error: ") +
                    e.what());
  }
  if (header.at("version").get<int>() != 1)
    throw DataError("checkpoint: unsupported version");

  Checkpoint ck;
  ck.model_cfg = model_cfg_from_json(header.at("model"));
  ck.vocab_text = header.at("vocab").get<std::string>();
  ck.mixer_state = header.at("mixer").dump();
  ck.dropout_rng_state = header.at("dropout_rng").get<std::string>();
  ck.update_count = header.at("update_count").get<int64_t>();
  ck.adam_t = header.at("adam_t").get<int64_t>();
  size_t total = 0;
  for (const auto& row : header.at("layout")) {
    std::string name = row.at(0).get<std::string>();
    int rows = row.at(1).get<int>(), cols = row.at(2).get<int>();
    if (rows <= 0 || cols <= 0)
      throw DataError("checkpoint: bad layout entry " + name);
    ck.layout.emplace_back(name, std::pair<int, int>{rows, cols});
    total += size_t(rows) * size_t(cols);
  }
  ck.params = read_floats(in, total, "parameters");
  ck.adam_m = read_floats(in, total, "first moments");
  ck.adam_v = read_floats(in, total, "second moments");
  return ck;
}

std::string generate_back_translations(Model<float>& model,
                                       const SubwordVocab& vocab,
                                       const CorpusManifest& manifest,
                                       const std::string& out_dir,
                                       const DecodeConfig& decode_cfg,
                                       int64_t max_per_pair) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // target-side monolingual text, by language
  std::map<LanguageId, const MonoCorpus*> tgt_mono;
  for (const auto& mc : manifest.mono)
    if (mc.side == MonoSide::Target || mc.side == MonoSide::Both)
      tgt_mono[mc.lang] = &mc;

  json out_manifest;
  out_manifest["version"] = 1;
  out_manifest["languages"] = manifest.languages;
  out_manifest["direction"] = direction_name(manifest.direction);
  out_manifest["filter"] = json{{"dedup", manifest.filter.dedup},
                                {"max_punct_frac",
                                 manifest.filter.max_punct_frac},
                                {"min_words", manifest.filter.min_words},
                                {"max_words", manifest.filter.max_words}};
  json bitext = json::array();
  json mono = json::array();

  for (const auto& bc : manifest.bitext) {
    PairKey key{bc.src_lang, bc.tgt_lang};
    std::string base = "bt_" + bc.src_lang + "-" + bc.tgt_lang;
    std::string src_name = base + "." + bc.src_lang;
    std::string tgt_name = base + "." + bc.tgt_lang;
    std::ofstream src_out(fs::path(out_dir) / src_name);
    std::ofstream tgt_out(fs::path(out_dir) / tgt_name);
    if (!src_out || !tgt_out)
      throw DataError("cannot write synthetic corpus for " + pair_name(key));
    for (const auto& [s, t] : bc.pairs) {
      src_out << s << '\n';
      tgt_out << t << '\n';
    }
    auto it = tgt_mono.find(bc.tgt_lang);
    if (it != tgt_mono.end()) {
      int64_t used = 0;
      for (const auto& sentence : it->second->sentences) {
        if (max_per_pair >= 0 && used >= max_per_pair) break;
        TokenizedSentence ts = encode(sentence, vocab);
        std::vector<TokenId> src_ids = ts.ids;
        src_ids.push_back(vocab.lid(bc.src_lang));
        std::vector<TokenId> hyp = beam_decode(model, src_ids, decode_cfg);
        src_out << decode(hyp, vocab) << '\n';
        tgt_out << sentence << '\n';
        ++used;
      }
    }
    json entry{{"src", bc.src_lang},
               {"tgt", bc.tgt_lang},
               {"src_file", src_name},
               {"tgt_file", tgt_name}};
    if (!bc.valid_pairs.empty()) {
      std::string vs_name = base + ".valid." + bc.src_lang;
      std::string vt_name = base + ".valid." + bc.tgt_lang;
      std::ofstream vs(fs::path(out_dir) / vs_name);
      std::ofstream vt(fs::path(out_dir) / vt_name);
      for (const auto& [s, t] : bc.valid_pairs) {
        vs << s << '\n';
        vt << t << '\n';
      }
      entry["valid_src_file"] = vs_name;
      entry["valid_tgt_file"] = vt_name;
    }
    bitext.push_back(entry);
  }

  for (const auto& mc : manifest.mono) {
    std::string name = "mono_" + mc.lang + "_" + side_name(mc.side) + ".txt";
    std::ofstream out(fs::path(out_dir) / name);
    if (!out) throw DataError("cannot write mono corpus " + name);
    for (const auto& s : mc.sentences) out << s << '\n';
    mono.push_back(
        json{{"lang", mc.lang}, {"side", side_name(mc.side)}, {"file", name}});
  }

  out_manifest["bitext"] = bitext;
  out_manifest["mono"] = mono;
  std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream mout(manifest_path, std::ios::trunc);
  if (!mout) throw DataError("cannot write manifest: " + manifest_path);
  mout << out_manifest.dump(2) << '\n';
  return manifest_path;
}

}  // namespace mtnmt
