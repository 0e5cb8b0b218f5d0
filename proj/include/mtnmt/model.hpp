#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtnmt/autograd.hpp"
#include "mtnmt/noising.hpp"
#include "mtnmt/tokenizer.hpp"

namespace mtnmt {

struct ModelConfig {
  int vocab_size = 0;  // set from the trained vocabulary
  int d_model = 64;
  int d_ff = 256;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_positions = 1024;
  double dropout = 0.1;
  double label_smoothing = 0.1;
  void validate() const;
};

// Variable-length sequences packed into one row block; spans mark each
// sequence's half-open row range.
struct PackedBatch {
  std::vector<int> ids;
  Spans spans;
};

// Pre-norm transformer encoder-decoder with a tied input/output embedding
// and a separate projection head for the masked-language objective. All
// batches are processed packed (no padding rows).
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  void init_params(uint64_t seed);
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }

  Node<T>* encode(Tape<T>& tape, const PackedBatch& src, bool train, Rng* rng);
  Node<T>* decode(Tape<T>& tape, Node<T>* enc_out, const Spans& enc_spans,
                  const PackedBatch& dec_in, bool train, Rng* rng);
  // Next-token logits from decoder states, tied to the embedding table.
  Node<T>* lm_logits(Tape<T>& tape, Node<T>* dec_out);
  // Masked-position logits from encoder states, separate parameters. Not
  // part of the translation path; dropping it leaves translation unchanged.
  Node<T>* masked_lm_logits(Tape<T>& tape, Node<T>* enc_out);

  struct TaskForward {
    Node<T>* loss_sum = nullptr;  // null when the batch had nothing to score
    int64_t tokens = 0;
    double sum_value = 0.0;
    double mean() const {
      return tokens > 0 ? sum_value / static_cast<double>(tokens) : 0.0;
    }
  };

  // Sequence-to-sequence objective shared by translation and denoising:
  // encode the example input, teacher-force BOS+target, score target+EOS.
  TaskForward forward_seq2seq(Tape<T>& tape,
                              const std::vector<NoisedExample>& batch,
                              bool train, Rng* rng);
  // Encoder-only objective scoring masked positions via the separate head.
  TaskForward forward_masked_lm(Tape<T>& tape,
                                const std::vector<NoisedExample>& batch,
                                bool train, Rng* rng);

  // Batches whose mask selected zero positions (scored as zero loss).
  int64_t empty_mask_batches() const { return empty_mask_batches_; }

  static PackedBatch pack_inputs(const std::vector<NoisedExample>& batch);

 private:
  ModelConfig cfg_;
  ParamStore<T> params_;
  Mat<T> positions_;  // sinusoidal table, max_positions x d_model
  int64_t empty_mask_batches_ = 0;

  Node<T>* embed_positions(Tape<T>& tape, const PackedBatch& pb, bool train,
                           Rng* rng);
  Node<T>* attn_sublayer(Tape<T>& tape, const std::string& prefix,
                         Node<T>* q_in, Node<T>* kv_in, const Spans& q_spans,
                         const Spans& kv_spans, bool causal);
  Node<T>* ffn_sublayer(Tape<T>& tape, const std::string& prefix,
                        Node<T>* x);
  Node<T>* layer_norm_named(Tape<T>& tape, const std::string& prefix,
                            Node<T>* x);
  Node<T>* maybe_dropout(Tape<T>& tape, Node<T>* x, bool train, Rng* rng);

  void register_params();
  void register_attn(const std::string& prefix);
  void register_ffn(const std::string& prefix);
  void register_ln(const std::string& prefix);
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace mtnmt
