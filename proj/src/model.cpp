#include "mtnmt/model.hpp"

#include <cmath>

#include "mtnmt/error.hpp"

namespace mtnmt {

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw UsageError("model: vocab_size must be set");
  if (d_model <= 0 || d_ff <= 0) throw UsageError("model: bad width");
  if (heads <= 0 || d_model % heads != 0)
    throw UsageError("model: d_model must be divisible by heads");
  if (enc_layers < 1 || dec_layers < 1)
    throw UsageError("model: need at least one layer per stack");
  if (max_positions < 2) throw UsageError("model: max_positions too small");
  if (dropout < 0.0 || dropout >= 1.0)
    throw UsageError("model: dropout must be in [0,1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    throw UsageError("model: label smoothing must be in [0,1)");
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  register_params();
  positions_.resize(cfg_.max_positions, cfg_.d_model);
  for (int p = 0; p < cfg_.max_positions; ++p) {
    for (int i = 0; i < cfg_.d_model; i += 2) {
      double rate = std::pow(10000.0, double(i) / double(cfg_.d_model));
      positions_(p, i) = T(std::sin(double(p) / rate));
      if (i + 1 < cfg_.d_model)
        positions_(p, i + 1) = T(std::cos(double(p) / rate));
    }
  }
}

template <typename T>
void Model<T>::register_ln(const std::string& prefix) {
  params_.add(prefix + ".gain", 1, cfg_.d_model);
  params_.add(prefix + ".shift", 1, cfg_.d_model);
}

template <typename T>
void Model<T>::register_attn(const std::string& prefix) {
  for (const char* part : {"q", "k", "v", "o"}) {
    params_.add(prefix + ".w" + part, cfg_.d_model, cfg_.d_model);
    params_.add(prefix + ".b" + part, 1, cfg_.d_model);
  }
}

template <typename T>
void Model<T>::register_ffn(const std::string& prefix) {
  params_.add(prefix + ".w1", cfg_.d_model, cfg_.d_ff);
  params_.add(prefix + ".b1", 1, cfg_.d_ff);
  params_.add(prefix + ".w2", cfg_.d_ff, cfg_.d_model);
  params_.add(prefix + ".b2", 1, cfg_.d_model);
}

template <typename T>
void Model<T>::register_params() {
  params_.add("embed", cfg_.vocab_size, cfg_.d_model);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    std::string p = "enc." + std::to_string(l);
    register_ln(p + ".ln1");
    register_attn(p + ".self");
    register_ln(p + ".ln2");
    register_ffn(p + ".ffn");
  }
  register_ln("enc.final_ln");
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    std::string p = "dec." + std::to_string(l);
    register_ln(p + ".ln1");
    register_attn(p + ".self");
    register_ln(p + ".ln2");
    register_attn(p + ".cross");
    register_ln(p + ".ln3");
    register_ffn(p + ".ffn");
  }
  register_ln("dec.final_ln");
  params_.add("mlm_head.w", cfg_.d_model, cfg_.vocab_size);
  params_.add("mlm_head.b", 1, cfg_.vocab_size);
}

template <typename T>
void Model<T>::init_params(uint64_t seed) {
  Rng rng(mix_seed(seed, "model:init"));
  auto ends_with = [](const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() &&
           s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
  };
  for (size_t i = 0; i < params_.count(); ++i) {
    auto& e = params_.entry(i);
    if (e.name == "embed") {
      T s = T(1) / std::sqrt(T(cfg_.d_model));
      for (Eigen::Index j = 0; j < e.value.size(); ++j)
        e.value.data()[j] = T(rng.gaussian()) * s;
    } else if (ends_with(e.name, ".gain")) {
      e.value.setOnes();
    } else if (ends_with(e.name, ".shift") || e.value.rows() == 1) {
      e.value.setZero();
    } else {
      T s = T(std::sqrt(2.0 / double(e.value.rows() + e.value.cols())));
      for (Eigen::Index j = 0; j < e.value.size(); ++j)
        e.value.data()[j] = T(rng.gaussian()) * s;
    }
    e.grad.setZero();
  }
}

template <typename T>
PackedBatch Model<T>::pack_inputs(const std::vector<NoisedExample>& batch) {
  PackedBatch pb;
  for (const auto& ex : batch) {
    int start = static_cast<int>(pb.ids.size());
    pb.ids.insert(pb.ids.end(), ex.input_ids.begin(), ex.input_ids.end());
    pb.spans.emplace_back(start, static_cast<int>(pb.ids.size()));
  }
  return pb;
}

template <typename T>
Node<T>* Model<T>::maybe_dropout(Tape<T>& tape, Node<T>* x, bool train,
                                 Rng* rng) {
  if (!train || cfg_.dropout <= 0.0) return x;
  if (!rng) throw UsageError("model: training forward needs an rng");
  return tape.dropout(x, cfg_.dropout, *rng);
}

template <typename T>
Node<T>* Model<T>::layer_norm_named(Tape<T>& tape, const std::string& prefix,
                                    Node<T>* x) {
  return tape.layer_norm(x, tape.param(params_.at(prefix + ".gain")),
                         tape.param(params_.at(prefix + ".shift")));
}

template <typename T>
Node<T>* Model<T>::attn_sublayer(Tape<T>& tape, const std::string& prefix,
                                 Node<T>* q_in, Node<T>* kv_in,
                                 const Spans& q_spans, const Spans& kv_spans,
                                 bool causal) {
  auto proj = [&](const char* part, Node<T>* x) {
    return tape.add_rowvec(
        tape.matmul(x, tape.param(params_.at(prefix + ".w" + part))),
        tape.param(params_.at(prefix + ".b" + part)));
  };
  Node<T>* q = proj("q", q_in);
  Node<T>* k = proj("k", kv_in);
  Node<T>* v = proj("v", kv_in);
  Node<T>* mixed =
      tape.attention(q, k, v, q_spans, kv_spans, cfg_.heads, causal);
  return proj("o", mixed);
}

template <typename T>
Node<T>* Model<T>::ffn_sublayer(Tape<T>& tape, const std::string& prefix,
                                Node<T>* x) {
  Node<T>* h = tape.add_rowvec(
      tape.matmul(x, tape.param(params_.at(prefix + ".w1"))),
      tape.param(params_.at(prefix + ".b1")));
  h = tape.gelu(h);
  return tape.add_rowvec(
      tape.matmul(h, tape.param(params_.at(prefix + ".w2"))),
      tape.param(params_.at(prefix + ".b2")));
}

template <typename T>
Node<T>* Model<T>::embed_positions(Tape<T>& tape, const PackedBatch& pb,
                                   bool train, Rng* rng) {
  if (pb.ids.empty()) throw UsageError("model: empty batch");
  for (auto [s, e] : pb.spans)
    if (e - s > cfg_.max_positions)
      throw DataError("model: sequence exceeds maximum positions");
  Node<T>* table = tape.param(params_.at("embed"));
  Node<T>* emb = tape.rows_gather(table, pb.ids);
  emb = tape.scale(emb, std::sqrt(T(cfg_.d_model)));
  Mat<T> pos(static_cast<Eigen::Index>(pb.ids.size()), cfg_.d_model);
  for (auto [s, e] : pb.spans)
    for (int r = s; r < e; ++r) pos.row(r) = positions_.row(r - s);
  Node<T>* x = tape.add(emb, tape.constant(std::move(pos)));
  return maybe_dropout(tape, x, train, rng);
}

template <typename T>
Node<T>* Model<T>::encode(Tape<T>& tape, const PackedBatch& src, bool train,
                          Rng* rng) {
  Node<T>* x = embed_positions(tape, src, train, rng);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    std::string p = "enc." + std::to_string(l);
    Node<T>* n1 = layer_norm_named(tape, p + ".ln1", x);
    Node<T>* a = attn_sublayer(tape, p + ".self", n1, n1, src.spans,
                               src.spans, false);
    x = tape.add(x, maybe_dropout(tape, a, train, rng));
    Node<T>* f =
        ffn_sublayer(tape, p + ".ffn", layer_norm_named(tape, p + ".ln2", x));
    x = tape.add(x, maybe_dropout(tape, f, train, rng));
  }
  return layer_norm_named(tape, "enc.final_ln", x);
}

template <typename T>
Node<T>* Model<T>::decode(Tape<T>& tape, Node<T>* enc_out,
                          const Spans& enc_spans, const PackedBatch& dec_in,
                          bool train, Rng* rng) {
  if (enc_spans.size() != dec_in.spans.size())
    throw UsageError("model: encoder/decoder sequence counts differ");
  Node<T>* x = embed_positions(tape, dec_in, train, rng);
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    std::string p = "dec." + std::to_string(l);
    Node<T>* n1 = layer_norm_named(tape, p + ".ln1", x);
    Node<T>* a = attn_sublayer(tape, p + ".self", n1, n1, dec_in.spans,
                               dec_in.spans, true);
    x = tape.add(x, maybe_dropout(tape, a, train, rng));
    Node<T>* c = attn_sublayer(tape, p + ".cross",
                               layer_norm_named(tape, p + ".ln2", x), enc_out,
                               dec_in.spans, enc_spans, false);
    x = tape.add(x, maybe_dropout(tape, c, train, rng));
    Node<T>* f =
        ffn_sublayer(tape, p + ".ffn", layer_norm_named(tape, p + ".ln3", x));
    x = tape.add(x, maybe_dropout(tape, f, train, rng));
  }
  return layer_norm_named(tape, "dec.final_ln", x);
}

template <typename T>
Node<T>* Model<T>::lm_logits(Tape<T>& tape, Node<T>* dec_out) {
  return tape.matmul_nt(dec_out, tape.param(params_.at("embed")));
}

template <typename T>
Node<T>* Model<T>::masked_lm_logits(Tape<T>& tape, Node<T>* enc_out) {
  return tape.add_rowvec(
      tape.matmul(enc_out, tape.param(params_.at("mlm_head.w"))),
      tape.param(params_.at("mlm_head.b")));
}

template <typename T>
typename Model<T>::TaskForward Model<T>::forward_seq2seq(
    Tape<T>& tape, const std::vector<NoisedExample>& batch, bool train,
    Rng* rng) {
  if (batch.empty()) throw UsageError("model: empty batch");
  PackedBatch src = pack_inputs(batch);
  PackedBatch dec;
  std::vector<int> targets;
  std::vector<uint8_t> counted;
  for (const auto& ex : batch) {
    if (ex.loss_mask.size() != ex.target_ids.size())
      throw UsageError("model: loss mask does not match target");
    int start = static_cast<int>(dec.ids.size());
    dec.ids.push_back(SubwordVocab::kBos);
    dec.ids.insert(dec.ids.end(), ex.target_ids.begin(), ex.target_ids.end());
    dec.spans.emplace_back(start, static_cast<int>(dec.ids.size()));
    targets.insert(targets.end(), ex.target_ids.begin(), ex.target_ids.end());
    targets.push_back(SubwordVocab::kEos);
    counted.insert(counted.end(), ex.loss_mask.begin(), ex.loss_mask.end());
    counted.push_back(1);
  }
  Node<T>* enc = encode(tape, src, train, rng);
  Node<T>* hid = decode(tape, enc, src.spans, dec, train, rng);
  Node<T>* logits = lm_logits(tape, hid);
  Node<T>* loss =
      tape.ce_lsm_sum(logits, targets, counted, cfg_.label_smoothing);
  TaskForward out;
  out.loss_sum = loss;
  for (uint8_t c : counted) out.tokens += c ? 1 : 0;
  out.sum_value = static_cast<double>(loss->val(0, 0));
  return out;
}

template <typename T>
typename Model<T>::TaskForward Model<T>::forward_masked_lm(
    Tape<T>& tape, const std::vector<NoisedExample>& batch, bool train,
    Rng* rng) {
  if (batch.empty()) throw UsageError("model: empty batch");
  PackedBatch src = pack_inputs(batch);
  std::vector<int> targets;
  std::vector<uint8_t> counted;
  for (const auto& ex : batch) {
    if (ex.target_ids.size() != ex.input_ids.size() ||
        ex.loss_mask.size() != ex.target_ids.size())
      throw UsageError("model: masked batch shape mismatch");
    targets.insert(targets.end(), ex.target_ids.begin(), ex.target_ids.end());
    counted.insert(counted.end(), ex.loss_mask.begin(), ex.loss_mask.end());
  }
  TaskForward out;
  for (uint8_t c : counted) out.tokens += c ? 1 : 0;
  if (out.tokens == 0) {
    ++empty_mask_batches_;
    return out;
  }
  Node<T>* enc = encode(tape, src, train, rng);
  Node<T>* logits = masked_lm_logits(tape, enc);
  Node<T>* loss =
      tape.ce_lsm_sum(logits, targets, counted, cfg_.label_smoothing);
  out.loss_sum = loss;
  out.sum_value = static_cast<double>(loss->val(0, 0));
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace mtnmt
