#include "mtnmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <sstream>

#include "mtnmt/error.hpp"
#include "mtnmt/text.hpp"

namespace mtnmt {

void DecodeConfig::validate() const {
  if (beam_size < 1) throw UsageError("decode: beam_size must be >= 1");
  if (alpha < 0.0) throw UsageError("decode: length penalty must be >= 0");
  if (max_len_factor <= 0.0)
    throw UsageError("decode: max_len_factor must be positive");
}

double length_penalty(const DecodeConfig& cfg, int len) {
  if (len < 1) throw UsageError("length_penalty: length must be >= 1");
  switch (cfg.norm) {
    case LengthNorm::Simple:
      return std::pow(double(len), cfg.alpha);
    case LengthNorm::Gnmt:
      return std::pow((5.0 + double(len)) / 6.0, cfg.alpha);
  }
  throw UsageError("length_penalty: unknown normalization");
}

namespace {

// log-softmax of one logits row, accumulated in double
template <typename T>
std::vector<double> log_softmax_row(const Mat<T>& m, Eigen::Index row) {
  std::vector<double> out(static_cast<size_t>(m.cols()));
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    mx = std::max(mx, double(m(row, j)));
  double z = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    z += std::exp(double(m(row, j)) - mx);
  double lse = mx + std::log(z);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    out[size_t(j)] = double(m(row, j)) - lse;
  return out;
}

}  // namespace

template <typename T>
std::vector<TokenId> beam_decode(Model<T>& model,
                                 const std::vector<TokenId>& src,
                                 const DecodeConfig& cfg) {
  cfg.validate();
  if (src.empty()) throw DataError("beam_decode: empty source");

  Mat<T> enc_val;
  PackedBatch src_pb;
  src_pb.ids.assign(src.begin(), src.end());
  src_pb.spans = {{0, int(src.size())}};
  {
    Tape<T> tape;
    enc_val = model.encode(tape, src_pb, false, nullptr)->val;
  }

  const int V = model.config().vocab_size;
  const int max_steps =
      int(std::llround(double(src.size()) * cfg.max_len_factor)) + 5;

  struct Hyp {
    std::vector<int> ids;
    double logp = 0.0;
  };
  struct Done {
    std::vector<int> ids;
    double norm_score;
  };
  std::vector<Hyp> active{Hyp{}};
  std::vector<Done> done;

  for (int step = 0; step <= max_steps && !active.empty(); ++step) {
    PackedBatch dec;
    Spans enc_spans;
    for (const Hyp& h : active) {
      int start = int(dec.ids.size());
      dec.ids.push_back(SubwordVocab::kBos);
      dec.ids.insert(dec.ids.end(), h.ids.begin(), h.ids.end());
      dec.spans.emplace_back(start, int(dec.ids.size()));
      enc_spans.push_back(src_pb.spans[0]);
    }
    Tape<T> tape;
    Node<T>* enc = tape.constant(enc_val);
    Node<T>* hid = model.decode(tape, enc, enc_spans, dec, false, nullptr);
    Node<T>* logits = model.lm_logits(tape, hid);

    struct Cand {
      size_t hyp;
      int tok;
      double score;
    };
    std::vector<Cand> cands;
    for (size_t i = 0; i < active.size(); ++i) {
      Eigen::Index row = dec.spans[i].second - 1;
      auto lp = log_softmax_row<T>(logits->val, row);
      if (step == max_steps) {
        cands.push_back(
            {i, SubwordVocab::kEos,
             active[i].logp + lp[size_t(SubwordVocab::kEos)]});
        continue;
      }
      for (int tok = 0; tok < V; ++tok) {
        if (tok == SubwordVocab::kPad || tok == SubwordVocab::kBos) continue;
        cands.push_back({i, tok, active[i].logp + lp[size_t(tok)]});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) {
                       return a.score > b.score;
                     });
    size_t keep = std::min<size_t>(size_t(cfg.beam_size), cands.size());
    std::vector<Hyp> next;
    for (size_t c = 0; c < keep; ++c) {
      const Cand& cand = cands[c];
      if (cand.tok == SubwordVocab::kEos) {
        int len = int(active[cand.hyp].ids.size()) + 1;  // counts the marker
        done.push_back({active[cand.hyp].ids,
                        cand.score / length_penalty(cfg, len)});
      } else {
        Hyp h = active[cand.hyp];
        h.ids.push_back(cand.tok);
        h.logp = cand.score;
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }

  const Done* best = nullptr;
  for (const Done& d : done)
    if (!best || d.norm_score > best->norm_score) best = &d;
  if (!best) throw NumericalError("beam_decode: no finished hypothesis");
  return std::vector<TokenId>(best->ids.begin(), best->ids.end());
}

template std::vector<TokenId> beam_decode<float>(Model<float>&,
                                                 const std::vector<TokenId>&,
                                                 const DecodeConfig&);
template std::vector<TokenId> beam_decode<double>(Model<double>&,
                                                  const std::vector<TokenId>&,
                                                  const DecodeConfig&);

std::vector<std::string> tokenize_13a(const std::string& line) {
  std::string s = line;
  auto replace_all = [](std::string& str, const std::string& from,
                        const std::string& to) {
    size_t pos = 0;
    while ((pos = str.find(from, pos)) != std::string::npos) {
      str.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(s, "<skipped>", "");
  replace_all(s, "-\n", "");
  replace_all(s, "\n", " ");
  replace_all(s, "&quot;", "\"");
  replace_all(s, "&amp;", "&");
  replace_all(s, "&lt;", "<");
  replace_all(s, "&gt;", ">");
  s = " " + s + " ";

  static const std::regex punct(
      R"(([ !"#$%&()*+/:;<=>?@\[\\\]^_`{|}~]))");
  static const std::regex pre_numeric(R"(([^0-9])([\.,]))");
  static const std::regex post_numeric(R"(([\.,])([^0-9]))");
  static const std::regex digit_dash(R"(([0-9])(-))");
  s = std::regex_replace(s, punct, " $1 ");
  s = std::regex_replace(s, pre_numeric, "$1 $2 ");
  s = std::regex_replace(s, post_numeric, " $1 $2");
  s = std::regex_replace(s, digit_dash, "$1 $2 ");
  return split_ws(s);
}

BleuReport bleu(const std::vector<std::string>& hypotheses,
                const std::vector<std::string>& references) {
  if (references.empty()) throw DataError("bleu: no references");
  if (hypotheses.size() != references.size())
    throw DataError("bleu: hypothesis/reference count mismatch");

  std::array<int64_t, 4> matched{}, total{};
  BleuReport rep;
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    auto hyp = tokenize_13a(hypotheses[s]);
    auto ref = tokenize_13a(references[s]);
    rep.hyp_len += int64_t(hyp.size());
    rep.ref_len += int64_t(ref.size());
    for (int n = 1; n <= 4; ++n) {
      if (int(hyp.size()) < n) continue;
      std::map<std::vector<std::string>, int64_t> ref_counts;
      for (size_t i = 0; n <= int(ref.size()) && i + n <= ref.size(); ++i)
        ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
      std::map<std::vector<std::string>, int64_t> hyp_counts;
      for (size_t i = 0; i + n <= hyp.size(); ++i)
        ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + n}];
      for (const auto& [gram, count] : hyp_counts) {
        total[size_t(n - 1)] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end())
          matched[size_t(n - 1)] += std::min(count, it->second);
      }
    }
  }

  if (rep.hyp_len == 0) return rep;  // nothing emitted scores zero

  double smooth = 1.0;
  double log_sum = 0.0;
  bool scoreable = true;
  for (int n = 0; n < 4; ++n) {
    if (total[size_t(n)] == 0) {
      rep.precisions[size_t(n)] = 0.0;
      scoreable = false;
      continue;
    }
    double p;
    if (matched[size_t(n)] == 0) {
      smooth *= 2.0;
      p = 1.0 / (smooth * double(total[size_t(n)]));
    } else {
      p = double(matched[size_t(n)]) / double(total[size_t(n)]);
    }
    rep.precisions[size_t(n)] = p;
    log_sum += std::log(p);
  }
  rep.brevity_penalty =
      rep.hyp_len < rep.ref_len
          ? std::exp(1.0 - double(rep.ref_len) / double(rep.hyp_len))
          : 1.0;
  if (scoreable)
    rep.score = 100.0 * rep.brevity_penalty * std::exp(log_sum / 4.0);
  return rep;
}

double lid_compliance(const std::vector<std::string>& hypotheses,
                      const std::unordered_set<std::string>& target_words) {
  int64_t in_target = 0, words = 0;
  for (const auto& h : hypotheses)
    for (const auto& w : split_ws(h)) {
      ++words;
      in_target += target_words.count(w) ? 1 : 0;
    }
  return words == 0 ? 0.0 : double(in_target) / double(words);
}

template <typename T>
double token_accuracy(Model<T>& model,
                      const std::vector<NoisedExample>& batch) {
  if (batch.empty()) throw UsageError("token_accuracy: empty batch");
  PackedBatch src = Model<T>::pack_inputs(batch);
  PackedBatch dec;
  std::vector<int> targets;
  std::vector<uint8_t> counted;
  for (const auto& ex : batch) {
    int start = int(dec.ids.size());
    dec.ids.push_back(SubwordVocab::kBos);
    dec.ids.insert(dec.ids.end(), ex.target_ids.begin(), ex.target_ids.end());
    dec.spans.emplace_back(start, int(dec.ids.size()));
    targets.insert(targets.end(), ex.target_ids.begin(), ex.target_ids.end());
    targets.push_back(SubwordVocab::kEos);
    counted.insert(counted.end(), ex.loss_mask.begin(), ex.loss_mask.end());
    counted.push_back(1);
  }
  Tape<T> tape;
  Node<T>* enc = model.encode(tape, src, false, nullptr);
  Node<T>* hid = model.decode(tape, enc, src.spans, dec, false, nullptr);
  Node<T>* logits = model.lm_logits(tape, hid);
  int64_t hits = 0, seen = 0;
  for (Eigen::Index r = 0; r < logits->val.rows(); ++r) {
    if (!counted[size_t(r)]) continue;
    ++seen;
    Eigen::Index arg = 0;
    logits->val.row(r).maxCoeff(&arg);
    hits += int(arg) == targets[size_t(r)] ? 1 : 0;
  }
  return seen == 0 ? 0.0 : double(hits) / double(seen);
}

template double token_accuracy<float>(Model<float>&,
                                      const std::vector<NoisedExample>&);
template double token_accuracy<double>(Model<double>&,
                                       const std::vector<NoisedExample>&);

}  // namespace mtnmt
