#pragma once
// The five architectures and the three task heads.

#include <string>
#include <vector>

#include "lexpred/checkpoint.hpp"
#include "lexpred/corpus.hpp"
#include "lexpred/encoders.hpp"
#include "lexpred/text.hpp"
#include "lexpred/trace.hpp"

namespace lexpred {

enum class Arch { BigruAtt, Han, Lwan, FlatTrunc, HierEnc };
enum class Task { Binary, Multilabel, Importance };

Arch arch_from_string(const std::string& s);
std::string arch_to_string(Arch a);
Task task_from_string(const std::string& s);
std::string task_to_string(Task t);

struct TransformerDims {
  int layers = 4;
  int heads = 4;
  int model_dim = 128;
  int ff_dim = 256;
  int max_positions = 512;
};

struct ModelSpec {
  Arch arch = Arch::BigruAtt;
  Task task = Task::Binary;
  int hidden = 300;      // GRU hidden units
  int stack = 1;         // stacked bigru layers
  int embed_dim = 200;
  double dropout = 0.0;
  double word_dropout = 0.0;
  int max_len = 512;     // flat-trunc truncation limit
  int num_labels = 0;    // L
  int vocab_size = 0;
  TransformerDims tf;
  bool frozen_embeddings = false;
  bool multilabel_softmax = false;  // softmax over L+1 with a no-violation class

  void validate() const;
};

struct Prediction {
  int binary = 0;
  double binary_score = 0.0;
  std::vector<std::string> labels;
  std::vector<double> label_scores;
  double importance = 0.0;
};

namespace nn {

template <typename T>
struct TaskHead {
  Task task = Task::Binary;
  bool per_label = false;  // LWAN style: one weight row per label embedding
  bool softmax = false;
  int in = 0;
  int out = 0;
  Tensor<T> W;
  Tensor<T> b;

  static TaskHead create(Task task, int in, int num_labels, bool per_label,
                         bool softmax, Rng& rng) {
    TaskHead h;
    h.task = task;
    h.per_label = per_label;
    h.softmax = softmax;
    h.in = in;
    if (task == Task::Multilabel)
      h.out = per_label ? num_labels : (softmax ? num_labels + 1 : num_labels);
    else
      h.out = 1;
    if (per_label) {
      h.W = Tensor<T>::param({num_labels, in},
                             std::vector<T>(size_t(num_labels) * in, T(0)));
      glorot_fill(h.W, rng);
      h.b = Tensor<T>::param({num_labels},
                             std::vector<T>(size_t(num_labels), T(0)));
    } else {
      h.W = Tensor<T>::param({in, h.out},
                             std::vector<T>(size_t(in) * size_t(h.out), T(0)));
      glorot_fill(h.W, rng);
      h.b = Tensor<T>::param({h.out}, std::vector<T>(size_t(h.out), T(0)));
    }
    return h;
  }

  // embedding {in} (or label embeddings {L, in} when per_label)
  Tensor<T> forward(const Tensor<T>& e) const {
    if (per_label) {
      Tensor<T> scores = ad::add(ad::rowwise_dot(e, W), b);  // {L}
      return ad::sigmoid(scores);
    }
    Tensor<T> z =
        ad::add(ad::reshape(ad::matmul(ad::reshape(e, {1, in}), W), {out}), b);
    switch (task) {
      case Task::Binary: return ad::sigmoid(z);
      case Task::Multilabel:
        return softmax ? ad::softmax_lastdim(z) : ad::sigmoid(z);
      case Task::Importance: return z;
    }
    return z;
  }

  void collect(ParamList<T>& outp, const std::string& p) {
    outp.push_back({p + ".W", W, true});
    outp.push_back({p + ".b", b, true});
  }
};

struct ForwardTrace {
  std::vector<std::vector<double>> word_weights;
  std::vector<double> fact_weights;  // empty for flat architectures
};

template <typename T>
struct ForwardOut {
  Tensor<T> scores;  // binary {1}, multilabel {L} or {L+1}, importance {1}
  ForwardTrace trace;
};

// word dropout: each non-PAD token independently becomes UNK
std::vector<int> apply_word_dropout(const std::vector<int>& ids, double p,
                                    Rng& rng);

template <typename T>
class Model {
 public:
  ModelSpec spec;

  static Model build(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    Model m;
    m.spec = spec;
    Rng rng(seed);
    bool transformer =
        spec.arch == Arch::FlatTrunc || spec.arch == Arch::HierEnc;
    if (transformer) {
      m.encoder_ = nn::TransformerEncoder<T>::create(
          spec.vocab_size, spec.tf.model_dim, spec.tf.layers, spec.tf.heads,
          spec.tf.ff_dim, spec.tf.max_positions, rng,
          /*trainable_embeddings=*/!spec.frozen_embeddings);
      if (spec.arch == Arch::HierEnc) {
        m.fact_pool_ = AttentionPool<T>::create(spec.tf.model_dim, rng);
      }
      m.head_ = TaskHead<T>::create(spec.task, spec.tf.model_dim,
                                    spec.num_labels, false,
                                    spec.multilabel_softmax, rng);
      return m;
    }
    m.embedding_ = Embedding<T>::create(spec.vocab_size, spec.embed_dim, rng,
                                        !spec.frozen_embeddings);
    int in = spec.embed_dim;
    for (int l = 0; l < spec.stack; ++l) {
      m.gru_stack_.push_back(BiGRU<T>::create(in, spec.hidden, rng));
      in = 2 * spec.hidden;
    }
    if (spec.arch == Arch::Lwan) {
      m.lwa_ = LabelWiseAttention<T>::create(in, spec.num_labels, rng);
      m.head_ = TaskHead<T>::create(spec.task, in, spec.num_labels, true,
                                    false, rng);
    } else {
      m.word_pool_ = AttentionPool<T>::create(in, rng);
      if (spec.arch == Arch::Han) {
        m.fact_gru_ = BiGRU<T>::create(in, spec.hidden, rng);
        m.fact_pool_ = AttentionPool<T>::create(2 * spec.hidden, rng);
        in = 2 * spec.hidden;
      }
      m.head_ = TaskHead<T>::create(spec.task, in, spec.num_labels, false,
                                    spec.multilabel_softmax, rng);
    }
    return m;
  }

  // training=true enables word dropout and dropout draws from rng
  ForwardOut<T> forward(const EncodedCase& ec, bool training = false,
                        Rng* rng = nullptr, bool want_trace = false) const {
    if (ec.fact_ids.empty())
      throw ValidationError("forward: case '" + ec.case_id + "' has no facts");
    switch (spec.arch) {
      case Arch::BigruAtt: return forward_flat_gru(ec, training, rng, want_trace, false);
      case Arch::Lwan: return forward_flat_gru(ec, training, rng, want_trace, true);
      case Arch::Han: return forward_han(ec, training, rng, want_trace);
      case Arch::FlatTrunc: return forward_flat_trunc(ec, training, rng, want_trace);
      case Arch::HierEnc: return forward_hier_enc(ec, training, rng, want_trace);
    }
    throw ValidationError("forward: unknown architecture");
  }

  // the word embedding table (token embedding for transformer architectures)
  Embedding<T>& token_embedding() {
    return (spec.arch == Arch::FlatTrunc || spec.arch == Arch::HierEnc)
               ? encoder_.tok
               : embedding_;
  }

  // named parameters in fixed construction order
  ParamList<T> params() {
    ParamList<T> out;
    if (spec.arch == Arch::FlatTrunc || spec.arch == Arch::HierEnc) {
      encoder_.collect(out, "encoder");
      if (spec.arch == Arch::HierEnc) fact_pool_.collect(out, "fact_pool");
      head_.collect(out, "head");
      return out;
    }
    embedding_.collect(out, "embedding");
    for (size_t l = 0; l < gru_stack_.size(); ++l)
      gru_stack_[l].collect(out, "bigru" + std::to_string(l));
    if (spec.arch == Arch::Lwan) {
      lwa_.collect(out, "lwa");
    } else {
      word_pool_.collect(out, "word_pool");
      if (spec.arch == Arch::Han) {
        fact_gru_.collect(out, "fact_gru");
        fact_pool_.collect(out, "fact_pool");
      }
    }
    head_.collect(out, "head");
    return out;
  }

  void save(const std::string& path) {
    std::vector<std::tuple<std::string, std::vector<int>,
                           const std::vector<T>*>> entries;
    auto ps = params();
    for (auto& p : ps)
      entries.emplace_back(p.name, p.tensor.shape(), &p.tensor.values());
    save_checkpoint<T>(path, entries);
  }

  void load(const std::string& path) {
    CheckpointMap m = load_checkpoint(path);
    auto ps = params();
    for (auto& p : ps) {
      auto it = m.find(p.name);
      if (it == m.end())
        throw ValidationError("checkpoint: missing tensor '" + p.name + "'");
      if (it->second.shape != p.tensor.shape())
        throw ValidationError("checkpoint: shape mismatch for '" + p.name +
                              "'");
      for (size_t i = 0; i < it->second.values.size(); ++i)
        p.tensor.values()[i] = T(it->second.values[i]);
    }
  }

  // deep copies of all parameter values, for best-epoch snapshots
  std::vector<std::vector<T>> snapshot() {
    std::vector<std::vector<T>> out;
    for (auto& p : params()) out.push_back(p.tensor.values());
    return out;
  }
  void restore(const std::vector<std::vector<T>>& snap) {
    auto ps = params();
    if (snap.size() != ps.size())
      throw ValidationError("restore: snapshot size mismatch");
    for (size_t i = 0; i < ps.size(); ++i) ps[i].tensor.values() = snap[i];
  }

 private:
  Embedding<T> embedding_;
  std::vector<BiGRU<T>> gru_stack_;
  AttentionPool<T> word_pool_;
  BiGRU<T> fact_gru_;
  AttentionPool<T> fact_pool_;
  LabelWiseAttention<T> lwa_;
  TransformerEncoder<T> encoder_;
  TaskHead<T> head_;

  std::vector<int> concat_ids(const EncodedCase& ec, bool with_sep) const {
    std::vector<int> ids;
    for (size_t f = 0; f < ec.fact_ids.size(); ++f) {
      if (with_sep && f) ids.push_back(TokenVocab::kSep);
      ids.insert(ids.end(), ec.fact_ids[f].begin(), ec.fact_ids[f].end());
    }
    return ids;
  }

  std::vector<uint8_t> pad_mask(const std::vector<int>& ids) const {
    std::vector<uint8_t> m(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) m[i] = ids[i] != TokenVocab::kPad;
    return m;
  }

  Tensor<T> embed_with_dropout(const std::vector<int>& ids, bool training,
                               Rng* rng) const {
    Tensor<T> X = embedding_.lookup(ids);
    if (training && spec.dropout > 0.0 && rng)
      X = ad::dropout(X, spec.dropout, *rng);
    return X;
  }

  Tensor<T> run_stack(const Tensor<T>& X,
                      const std::vector<uint8_t>& mask) const {
    Tensor<T> H = X;
    for (auto& layer : gru_stack_) H = layer.forward(H, mask);
    return H;
  }

  // BiGRU-Att and LWAN share everything up to the pooling stage: facts are
  // concatenated into one word sequence with a separator token.
  ForwardOut<T> forward_flat_gru(const EncodedCase& ec, bool training,
                                 Rng* rng, bool want_trace,
                                 bool labelwise) const {
    std::vector<int> ids = concat_ids(ec, true);
    if (training && spec.word_dropout > 0.0 && rng)
      ids = apply_word_dropout(ids, spec.word_dropout, *rng);
    auto mask = pad_mask(ids);
    Tensor<T> X = embed_with_dropout(ids, training, rng);
    Tensor<T> H = run_stack(X, mask);

    ForwardOut<T> out;
    if (labelwise) {
      auto lw = lwa_.forward(H, mask);
      Tensor<T> E = lw.label_embeddings;
      if (training && spec.dropout > 0.0 && rng)
        E = ad::dropout(E, spec.dropout, *rng);
      out.scores = head_.forward(E);
      if (want_trace) {
        // label-wise rows averaged into one word distribution
        int L = spec.num_labels, steps = int(ids.size());
        std::vector<double> meanw(size_t(steps), 0.0);
        for (int l = 0; l < L; ++l)
          for (int t = 0; t < steps; ++t)
            meanw[size_t(t)] +=
                double(lw.weights.values()[size_t(l) * steps + t]) / double(L);
        out.trace.word_weights.push_back(std::move(meanw));
      }
    } else {
      auto pooled = word_pool_.forward(H, mask);
      Tensor<T> e = pooled.pooled;
      if (training && spec.dropout > 0.0 && rng)
        e = ad::dropout(e, spec.dropout, *rng);
      out.scores = head_.forward(e);
      if (want_trace) {
        std::vector<double> w(pooled.weights.values().begin(),
                              pooled.weights.values().end());
        out.trace.word_weights.push_back(std::move(w));
      }
    }
    return out;
  }

  ForwardOut<T> forward_han(const EncodedCase& ec, bool training, Rng* rng,
                            bool want_trace) const {
    std::vector<Tensor<T>> fact_vecs;
    ForwardOut<T> out;
    for (auto& fact : ec.fact_ids) {
      std::vector<int> ids = fact;
      if (training && spec.word_dropout > 0.0 && rng)
        ids = apply_word_dropout(ids, spec.word_dropout, *rng);
      auto mask = pad_mask(ids);
      Tensor<T> X = embed_with_dropout(ids, training, rng);
      Tensor<T> H = run_stack(X, mask);
      auto pooled = word_pool_.forward(H, mask);
      fact_vecs.push_back(pooled.pooled);
      if (want_trace)
        out.trace.word_weights.emplace_back(pooled.weights.values().begin(),
                                            pooled.weights.values().end());
    }
    Tensor<T> F = ad::stack_rows(fact_vecs);  // {num_facts, 2H}
    std::vector<uint8_t> fmask(fact_vecs.size(), 1);
    Tensor<T> G = fact_gru_.forward(F, fmask);
    auto pooled = fact_pool_.forward(G, fmask);
    Tensor<T> e = pooled.pooled;
    if (training && spec.dropout > 0.0 && rng)
      e = ad::dropout(e, spec.dropout, *rng);
    out.scores = head_.forward(e);
    if (want_trace)
      out.trace.fact_weights.assign(pooled.weights.values().begin(),
                                    pooled.weights.values().end());
    return out;
  }

  // classification-position attention over word positions, renormalized to
  // exclude the classification token itself
  static std::vector<double> cls_word_weights(
      const std::vector<double>& cls_row) {
    std::vector<double> w(cls_row.begin() + 1, cls_row.end());
    double s = 0.0;
    for (double v : w) s += v;
    if (s > 1e-12) {
      for (double& v : w) v /= s;
    } else if (!w.empty()) {
      for (double& v : w) v = 1.0 / double(w.size());
    }
    return w;
  }

  ForwardOut<T> forward_flat_trunc(const EncodedCase& ec, bool training,
                                   Rng* rng, bool want_trace) const {
    std::vector<int> ids = concat_ids(ec, false);
    if (int(ids.size()) > spec.max_len) ids.resize(size_t(spec.max_len));
    if (training && spec.word_dropout > 0.0 && rng)
      ids = apply_word_dropout(ids, spec.word_dropout, *rng);
    ids.insert(ids.begin(), TokenVocab::kCls);
    auto enc = encoder_.forward(ids, want_trace);
    Tensor<T> cls =
        ad::reshape(ad::row(enc.states, 0), {spec.tf.model_dim});
    if (training && spec.dropout > 0.0 && rng)
      cls = ad::dropout(cls, spec.dropout, *rng);
    ForwardOut<T> out;
    out.scores = head_.forward(cls);
    if (want_trace)
      out.trace.word_weights.push_back(cls_word_weights(enc.cls_attention));
    return out;
  }

  ForwardOut<T> forward_hier_enc(const EncodedCase& ec, bool training,
                                 Rng* rng, bool want_trace) const {
    std::vector<Tensor<T>> fact_vecs;
    ForwardOut<T> out;
    for (auto& fact : ec.fact_ids) {
      std::vector<int> ids = fact;
      // each fact truncated individually; hierarchy bypasses the length limit
      int cap = spec.tf.max_positions - 1;
      if (int(ids.size()) > cap) ids.resize(size_t(cap));
      if (training && spec.word_dropout > 0.0 && rng)
        ids = apply_word_dropout(ids, spec.word_dropout, *rng);
      ids.insert(ids.begin(), TokenVocab::kCls);
      auto enc = encoder_.forward(ids, want_trace);
      fact_vecs.push_back(
          ad::reshape(ad::row(enc.states, 0), {spec.tf.model_dim}));
      if (want_trace)
        out.trace.word_weights.push_back(cls_word_weights(enc.cls_attention));
    }
    Tensor<T> F = ad::stack_rows(fact_vecs);
    std::vector<uint8_t> fmask(fact_vecs.size(), 1);
    auto pooled = fact_pool_.forward(F, fmask);
    Tensor<T> e = pooled.pooled;
    if (training && spec.dropout > 0.0 && rng)
      e = ad::dropout(e, spec.dropout, *rng);
    out.scores = head_.forward(e);
    if (want_trace)
      out.trace.fact_weights.assign(pooled.weights.values().begin(),
                                    pooled.weights.values().end());
    return out;
  }
};

}  // namespace nn

// binary: positive iff score >= tau; multilabel: labels with score >= tau
// (empty set allowed); importance: raw output clipped to [1, 4]
Prediction predict(const std::vector<double>& scores, Task task,
                   const LabelVocabulary& labels, bool softmax_head = false,
                   double tau = 0.5);

template <typename T>
Prediction predict_case(const nn::Model<T>& model, const EncodedCase& ec,
                        const LabelVocabulary& labels, double tau = 0.5) {
  ad::NoGradGuard ng;
  auto out = model.forward(ec);
  std::vector<double> scores(out.scores.values().begin(),
                             out.scores.values().end());
  return predict(scores, model.spec.task, labels,
                 model.spec.multilabel_softmax, tau);
}

// Attention weights read from the same forward pass as the prediction;
// display tokens re-tokenized from the source case.
template <typename T>
AttentionTrace capture_trace(const nn::Model<T>& model, const Case& c,
                             const TokenVocab& vocab,
                             const LabelVocabulary& labels) {
  ad::NoGradGuard ng;
  EncodedCase ec = encode_case(c, vocab, labels);
  auto out = model.forward(ec, false, nullptr, true);

  AttentionTrace trace;
  trace.case_id = c.case_id;
  trace.model_tag = arch_to_string(model.spec.arch);
  trace.word_weights = out.trace.word_weights;
  if (!out.trace.fact_weights.empty())
    trace.fact_weights = out.trace.fact_weights;

  std::vector<std::vector<std::string>> fact_tokens;
  for (auto& f : c.facts) {
    auto toks = text::tokenize(f);
    if (toks.empty()) toks.push_back("<unk>");
    fact_tokens.push_back(std::move(toks));
  }
  if (trace.word_weights.size() == fact_tokens.size()) {
    trace.tokens = fact_tokens;
  } else {
    // flat architectures: a single vector over the concatenated sequence
    bool with_sep =
        model.spec.arch == Arch::BigruAtt || model.spec.arch == Arch::Lwan;
    std::vector<std::string> flat;
    for (size_t f = 0; f < fact_tokens.size(); ++f) {
      if (with_sep && f) flat.push_back("<sep>");
      flat.insert(flat.end(), fact_tokens[f].begin(), fact_tokens[f].end());
    }
    flat.resize(trace.word_weights[0].size(),
                "<pad>");  // flat-trunc truncation
    trace.tokens.push_back(std::move(flat));
  }
  return trace;
}

}  // namespace lexpred
