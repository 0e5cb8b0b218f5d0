#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mtnmt/error.hpp"
#include "mtnmt/rng.hpp"

namespace mtnmt {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Spans = std::vector<std::pair<int, int>>;  // half-open row ranges

template <typename T>
struct ParamEntry {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
};

// Named parameter matrices with parallel gradient buffers. Entry order is
// fixed at registration and defines the flat serialization layout.
template <typename T>
class ParamStore {
 public:
  ParamEntry<T>& add(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw UsageError("duplicate parameter: " + name);
    index_[name] = entries_.size();
    entries_.emplace_back();
    auto& e = entries_.back();
    e.name = name;
    e.value = Mat<T>::Zero(rows, cols);
    e.grad = Mat<T>::Zero(rows, cols);
    return e;
  }

  ParamEntry<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second];
  }
  const ParamEntry<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UsageError("unknown parameter: " + name);
    return entries_[it->second];
  }

  size_t count() const { return entries_.size(); }
  ParamEntry<T>& entry(size_t i) { return entries_[i]; }
  const ParamEntry<T>& entry(size_t i) const { return entries_[i]; }

  int64_t total_size() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.grad.setZero();
  }

  bool grads_finite() const {
    for (const auto& e : entries_)
      if (!e.grad.allFinite()) return false;
    return true;
  }
  bool values_finite() const {
    for (const auto& e : entries_)
      if (!e.value.allFinite()) return false;
    return true;
  }

  std::vector<T> flat_values() const {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(total_size()));
    for (const auto& e : entries_)
      out.insert(out.end(), e.value.data(), e.value.data() + e.value.size());
    return out;
  }

  void set_flat_values(const std::vector<T>& flat) {
    if (static_cast<int64_t>(flat.size()) != total_size())
      throw DataError("parameter vector size mismatch");
    size_t off = 0;
    for (auto& e : entries_) {
      std::copy(flat.begin() + off, flat.begin() + off + e.value.size(),
                e.value.data());
      off += static_cast<size_t>(e.value.size());
    }
  }

 private:
  std::deque<ParamEntry<T>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
struct Node {
  Mat<T> val;
  Mat<T> grad;  // allocated lazily during backward
  std::function<void()> back;
};

// Reverse-mode tape over row-major matrices. Operations append nodes; the
// backward pass walks them in reverse creation order. Parameter gradients
// accumulate locally per tape and are flushed into the store in one addition
// per entry, so task gradients combine associatively.
template <typename T>
class Tape {
 public:
  Node<T>* constant(Mat<T> v) {
    Node<T>* n = fresh();
    n->val = std::move(v);
    return n;
  }

  Node<T>* param(ParamEntry<T>& e) {
    auto it = param_nodes_.find(&e);
    if (it != param_nodes_.end()) return it->second;
    Node<T>* n = fresh();
    n->val = e.value;
    param_nodes_[&e] = n;
    param_list_.emplace_back(n, &e);
    return n;
  }

  Node<T>* rows_gather(Node<T>* table, const std::vector<int>& ids) {
    Node<T>* n = fresh();
    n->val.resize(static_cast<Eigen::Index>(ids.size()), table->val.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table->val.rows())
        throw DataError("embedding row out of range");
      n->val.row(static_cast<Eigen::Index>(i)) = table->val.row(ids[i]);
    }
    auto ids_copy = ids;
    n->back = [n, table, ids_copy]() {
      ensure(table, n);
      for (size_t i = 0; i < ids_copy.size(); ++i)
        table->grad.row(ids_copy[i]) +=
            n->grad.row(static_cast<Eigen::Index>(i));
    };
    return n;
  }

  Node<T>* matmul(Node<T>* a, Node<T>* b) {
    check_inner(a->val.cols(), b->val.rows(), "matmul");
    Node<T>* n = fresh();
    n->val.noalias() = a->val * b->val;
    n->back = [n, a, b]() {
      ensure(a, n);
      ensure(b, n);
      a->grad.noalias() += n->grad * b->val.transpose();
      b->grad.noalias() += a->val.transpose() * n->grad;
    };
    return n;
  }

  // a * b^T; used for tying the output projection to the embedding table.
  Node<T>* matmul_nt(Node<T>* a, Node<T>* b) {
    check_inner(a->val.cols(), b->val.cols(), "matmul_nt");
    Node<T>* n = fresh();
    n->val.noalias() = a->val * b->val.transpose();
    n->back = [n, a, b]() {
      ensure(a, n);
      ensure(b, n);
      a->grad.noalias() += n->grad * b->val;
      b->grad.noalias() += n->grad.transpose() * a->val;
    };
    return n;
  }

  Node<T>* add(Node<T>* a, Node<T>* b) {
    check_same_shape(a, b, "add");
    Node<T>* n = fresh();
    n->val = a->val + b->val;
    n->back = [n, a, b]() {
      ensure(a, n);
      ensure(b, n);
      a->grad += n->grad;
      b->grad += n->grad;
    };
    return n;
  }

  // Broadcast a 1 x d row (bias) over every row of a.
  Node<T>* add_rowvec(Node<T>* a, Node<T>* r) {
    if (r->val.rows() != 1 || r->val.cols() != a->val.cols())
      throw UsageError("add_rowvec: bias shape mismatch");
    Node<T>* n = fresh();
    n->val = a->val.rowwise() + r->val.row(0);
    n->back = [n, a, r]() {
      ensure(a, n);
      ensure(r, n);
      a->grad += n->grad;
      r->grad.row(0) += n->grad.colwise().sum();
    };
    return n;
  }

  Node<T>* scale(Node<T>* a, T c) {
    Node<T>* n = fresh();
    n->val = a->val * c;
    n->back = [n, a, c]() {
      ensure(a, n);
      a->grad += n->grad * c;
    };
    return n;
  }

  Node<T>* gelu(Node<T>* a) {
    Node<T>* n = fresh();
    const T inv_sqrt2 = T(0.7071067811865475244);
    n->val = a->val.unaryExpr([inv_sqrt2](T x) {
      return T(0.5) * x * (T(1) + std::erf(x * inv_sqrt2));
    });
    n->back = [n, a, inv_sqrt2]() {
      ensure(a, n);
      const T inv_sqrt2pi = T(0.3989422804014326779);
      a->grad.array() +=
          n->grad.array() *
          a->val.unaryExpr([inv_sqrt2, inv_sqrt2pi](T x) {
             T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
             T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
             return cdf + x * pdf;
           }).array();
    };
    return n;
  }

  // Row-wise normalization with learned gain and shift (1 x d each).
  Node<T>* layer_norm(Node<T>* x, Node<T>* gamma, Node<T>* beta,
                      T eps = T(1e-5)) {
    if (gamma->val.rows() != 1 || gamma->val.cols() != x->val.cols() ||
        beta->val.rows() != 1 || beta->val.cols() != x->val.cols())
      throw UsageError("layer_norm: gain/shift shape mismatch");
    Node<T>* n = fresh();
    const Eigen::Index rows = x->val.rows(), cols = x->val.cols();
    auto xhat = std::make_shared<Mat<T>>(rows, cols);
    auto inv_sigma = std::make_shared<Mat<T>>(rows, 1);
    n->val.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      T mu = x->val.row(i).mean();
      auto centered = (x->val.row(i).array() - mu).eval();
      T var = centered.square().mean();
      T is = T(1) / std::sqrt(var + eps);
      (*inv_sigma)(i, 0) = is;
      xhat->row(i) = (centered * is).matrix();
      n->val.row(i) =
          xhat->row(i).cwiseProduct(gamma->val.row(0)) + beta->val.row(0);
    }
    n->back = [n, x, gamma, beta, xhat, inv_sigma]() {
      ensure(x, n);
      ensure(gamma, n);
      ensure(beta, n);
      for (Eigen::Index i = 0; i < x->val.rows(); ++i) {
        auto g = n->grad.row(i);
        gamma->grad.row(0) += g.cwiseProduct(xhat->row(i));
        beta->grad.row(0) += g;
        auto dxhat = g.cwiseProduct(gamma->val.row(0)).eval();
        T m1 = dxhat.mean();
        T m2 = dxhat.cwiseProduct(xhat->row(i)).mean();
        x->grad.row(i) +=
            (*inv_sigma)(i, 0) *
            (dxhat.array() - m1 - xhat->row(i).array() * m2).matrix();
      }
    };
    return n;
  }

  // Inverted dropout; scaling keeps expectations unchanged.
  Node<T>* dropout(Node<T>* a, double p, Rng& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw UsageError("dropout probability must be < 1");
    Node<T>* n = fresh();
    auto mask = std::make_shared<Mat<T>>(a->val.rows(), a->val.cols());
    const T keep_scale = T(1.0 / (1.0 - p));
    for (Eigen::Index i = 0; i < mask->size(); ++i)
      mask->data()[i] = rng.uniform_real() < p ? T(0) : keep_scale;
    n->val = a->val.cwiseProduct(*mask);
    n->back = [n, a, mask]() {
      ensure(a, n);
      a->grad += n->grad.cwiseProduct(*mask);
    };
    return n;
  }

  // Multi-head scaled dot-product attention over packed sequences. q rows
  // are grouped by q_spans, k/v rows by kv_spans (one pair per sequence).
  // With causal=true, q and kv spans must have equal lengths and position i
  // attends to positions <= i.
  Node<T>* attention(Node<T>* q, Node<T>* k, Node<T>* v, const Spans& q_spans,
                     const Spans& kv_spans, int heads, bool causal) {
    if (q_spans.size() != kv_spans.size())
      throw UsageError("attention: span count mismatch");
    const Eigen::Index d = q->val.cols();
    if (k->val.cols() != d || v->val.cols() != d)
      throw UsageError("attention: width mismatch");
    if (heads < 1 || d % heads != 0)
      throw UsageError("attention: width not divisible by heads");
    const Eigen::Index dh = d / heads;
    const T scl = T(1) / std::sqrt(T(dh));

    Node<T>* n = fresh();
    n->val = Mat<T>::Zero(q->val.rows(), d);
    auto probs = std::make_shared<std::vector<Mat<T>>>();
    probs->reserve(q_spans.size() * static_cast<size_t>(heads));

    for (size_t s = 0; s < q_spans.size(); ++s) {
      auto [qs, qe] = q_spans[s];
      auto [ks, ke] = kv_spans[s];
      const Eigen::Index ql = qe - qs, kl = ke - ks;
      if (ql <= 0 || kl <= 0) throw UsageError("attention: empty span");
      if (causal && ql != kl)
        throw UsageError("attention: causal spans must align");
      for (int h = 0; h < heads; ++h) {
        auto Qb = q->val.block(qs, h * dh, ql, dh);
        auto Kb = k->val.block(ks, h * dh, kl, dh);
        auto Vb = v->val.block(ks, h * dh, kl, dh);
        Mat<T> scores = Qb * Kb.transpose() * scl;
        if (causal)
          for (Eigen::Index i = 0; i < ql; ++i)
            for (Eigen::Index j = i + 1; j < kl; ++j)
              scores(i, j) = -std::numeric_limits<T>::infinity();
        Mat<T> P(ql, kl);
        for (Eigen::Index i = 0; i < ql; ++i) {
          T m = scores.row(i).maxCoeff();
          auto e = (scores.row(i).array() - m).exp().eval();
          P.row(i) = (e / e.sum()).matrix();
        }
        n->val.block(qs, h * dh, ql, dh).noalias() = P * Vb;
        probs->push_back(std::move(P));
      }
    }

    auto qsp = q_spans;
    auto ksp = kv_spans;
    n->back = [n, q, k, v, qsp, ksp, heads, dh, scl, probs]() {
      ensure(q, n);
      ensure(k, n);
      ensure(v, n);
      size_t pi = 0;
      for (size_t s = 0; s < qsp.size(); ++s) {
        auto [qs, qe] = qsp[s];
        auto [ks, ke] = ksp[s];
        const Eigen::Index ql = qe - qs, kl = ke - ks;
        for (int h = 0; h < heads; ++h) {
          const Mat<T>& P = (*probs)[pi++];
          auto G = n->grad.block(qs, h * dh, ql, dh);
          auto Qb = q->val.block(qs, h * dh, ql, dh);
          auto Kb = k->val.block(ks, h * dh, kl, dh);
          auto Vb = v->val.block(ks, h * dh, kl, dh);
          v->grad.block(ks, h * dh, kl, dh).noalias() += P.transpose() * G;
          Mat<T> dP = G * Vb.transpose();
          Mat<T> dS(ql, kl);
          for (Eigen::Index i = 0; i < ql; ++i) {
            T dot = dP.row(i).cwiseProduct(P.row(i)).sum();
            dS.row(i) = P.row(i).cwiseProduct(
                (dP.row(i).array() - dot).matrix());
          }
          q->grad.block(qs, h * dh, ql, dh).noalias() +=
              dS * Kb * scl;
          k->grad.block(ks, h * dh, kl, dh).noalias() +=
              dS.transpose() * Qb * scl;
        }
      }
    };
    return n;
  }

  // Frobenius inner product with a fixed weight matrix; reduces to 1x1.
  Node<T>* weighted_sum(Node<T>* a, Mat<T> w) {
    check_same_shape_mat(a->val, w, "weighted_sum");
    Node<T>* n = fresh();
    auto wp = std::make_shared<Mat<T>>(std::move(w));
    n->val = Mat<T>::Constant(1, 1, a->val.cwiseProduct(*wp).sum());
    n->back = [n, a, wp]() {
      ensure(a, n);
      a->grad += n->grad(0, 0) * (*wp);
    };
    return n;
  }

  // Label-smoothed cross-entropy, summed over rows where counted is true.
  // The returned 1x1 node carries the sum; the caller divides by its own
  // token count, so accumulated micro-batches can share one normalizer.
  Node<T>* ce_lsm_sum(Node<T>* logits, const std::vector<int>& targets,
                      const std::vector<uint8_t>& counted, double epsilon) {
    const Eigen::Index rows = logits->val.rows(), V = logits->val.cols();
    if (static_cast<Eigen::Index>(targets.size()) != rows ||
        counted.size() != targets.size())
      throw UsageError("ce_lsm_sum: target shape mismatch");
    if (epsilon < 0.0 || epsilon >= 1.0)
      throw UsageError("ce_lsm_sum: label smoothing must be in [0,1)");

    Node<T>* n = fresh();
    auto P = std::make_shared<Mat<T>>(rows, V);
    const T eps = T(epsilon), off = eps / T(V), on = T(1) - eps;
    T total = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      T m = logits->val.row(i).maxCoeff();
      auto shifted = (logits->val.row(i).array() - m).eval();
      T z = shifted.exp().sum();
      P->row(i) = (shifted.exp() / z).matrix();
      if (!counted[static_cast<size_t>(i)]) continue;
      int t = targets[static_cast<size_t>(i)];
      if (t < 0 || t >= V) throw DataError("ce_lsm_sum: target out of range");
      T logz = std::log(z);
      // -(1-eps) log p_t - (eps/V) sum_i log p_i
      T sum_logp = (shifted - logz).sum();
      total += -on * (shifted(t) - logz) - off * sum_logp;
    }
    n->val = Mat<T>::Constant(1, 1, total);

    auto tgt = targets;
    auto cnt = counted;
    n->back = [n, logits, P, tgt, cnt, on, off, V]() {
      ensure(logits, n);
      const T g = n->grad(0, 0);
      if (g == T(0)) return;
      for (Eigen::Index i = 0; i < logits->val.rows(); ++i) {
        if (!cnt[static_cast<size_t>(i)]) continue;
        // d/dlogits of the smoothed CE: p - q
        logits->grad.row(i) += g * P->row(i);
        logits->grad.row(i).array() -= g * off;
        logits->grad(i, tgt[static_cast<size_t>(i)]) -= g * on;
      }
    };
    return n;
  }

  // Seeds the loss node with `seed` and propagates; parameter gradients are
  // then flushed into their entries, one addition per entry.
  void backward(Node<T>* loss, T seed) {
    if (loss->val.rows() != 1 || loss->val.cols() != 1)
      throw UsageError("backward: loss node must be 1x1");
    loss->grad = Mat<T>::Constant(1, 1, seed);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& node = *it;
      if (node.grad.size() == 0 || !node.back) continue;
      node.back();
    }
    for (auto& [node, entry] : param_list_) {
      if (node->grad.size() != 0) entry->grad += node->grad;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node<T>> nodes_;
  std::unordered_map<const void*, Node<T>*> param_nodes_;
  std::vector<std::pair<Node<T>*, ParamEntry<T>*>> param_list_;

  Node<T>* fresh() {
    nodes_.emplace_back();
    return &nodes_.back();
  }

  static void ensure(Node<T>* input, const Node<T>* consumer) {
    (void)consumer;
    if (input->grad.size() == 0)
      input->grad = Mat<T>::Zero(input->val.rows(), input->val.cols());
  }

  static void check_inner(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b)
      throw UsageError(std::string(what) + ": inner dimension mismatch");
  }
  static void check_same_shape(Node<T>* a, Node<T>* b, const char* what) {
    check_same_shape_mat(a->val, b->val, what);
  }
  static void check_same_shape_mat(const Mat<T>& a, const Mat<T>& b,
                                   const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw UsageError(std::string(what) + ": shape mismatch");
  }
};

}  // namespace mtnmt
