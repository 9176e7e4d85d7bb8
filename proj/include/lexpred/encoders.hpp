#pragma once
// Neural layers: embeddings, GRU/BiGRU, self-attention pooling, label-wise
// attention, transformer encoder blocks. All layers hold parameters only;
// forward passes build nodes on the caller's graph.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lexpred/common.hpp"
#include "lexpred/init.hpp"
#include "lexpred/tensor.hpp"

namespace lexpred::nn {

using ad::Tensor;

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

// ---------------------------------------------------------------------------
// embeddings

template <typename T>
struct Embedding {
  int vocab = 0;
  int dim = 0;
  int pad_id = 0;
  bool trainable = true;
  Tensor<T> weight;  // vocab x dim, PAD row frozen at zero

  static Embedding create(int vocab, int dim, Rng& rng, bool trainable = true,
                          int pad_id = 0) {
    Embedding e;
    e.vocab = vocab;
    e.dim = dim;
    e.pad_id = pad_id;
    e.trainable = trainable;
    e.weight = Tensor<T>::param(
        {vocab, dim}, std::vector<T>(size_t(vocab) * size_t(dim), T(0)));
    glorot_fill(e.weight, rng);
    for (int j = 0; j < dim; ++j)
      e.weight.values()[size_t(pad_id) * dim + j] = T(0);
    return e;
  }

  // rows of the ids; PAD rows are zero and receive no gradient
  Tensor<T> lookup(const std::vector<int>& ids) const {
    return ad::gather_rows(weight, ids, pad_id);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", weight, trainable});
  }
};

// text embedding file: one `token v1 ... v_d` line per word
inline std::map<std::string, std::vector<double>> load_embedding_file(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw RuntimeFailure("embeddings: cannot open " + path);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!v.empty()) out[tok] = std::move(v);
  }
  return out;
}

template <typename T>
void load_pretrained_rows(Embedding<T>& emb,
                          const std::map<std::string, std::vector<double>>& vecs,
                          const std::vector<std::string>& vocab_tokens) {
  for (size_t i = 0; i < vocab_tokens.size(); ++i) {
    if (int(i) == emb.pad_id) continue;
    auto it = vecs.find(vocab_tokens[i]);
    if (it == vecs.end()) continue;
    if (int(it->second.size()) != emb.dim)
      throw ValidationError("embeddings: dim " +
                            std::to_string(it->second.size()) +
                            " does not match layer dim " +
                            std::to_string(emb.dim));
    for (int j = 0; j < emb.dim; ++j)
      emb.weight.values()[i * size_t(emb.dim) + size_t(j)] = T(it->second[size_t(j)]);
  }
}

// ---------------------------------------------------------------------------
// GRU

template <typename T>
struct GRUCell {
  int input = 0;
  int hidden = 0;
  // z = sigmoid(xWz + hUz + bz); r = sigmoid(xWr + hUr + br)
  // c = tanh(xWh + (r*h)Uh + bh); h' = (1-z)*h + z*c
  Tensor<T> Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;

  static GRUCell create(int input, int hidden, Rng& rng) {
    GRUCell c;
    c.input = input;
    c.hidden = hidden;
    auto mk = [&](int r, int cdim) {
      auto t = Tensor<T>::param({r, cdim},
                                std::vector<T>(size_t(r) * size_t(cdim), T(0)));
      glorot_fill(t, rng);
      return t;
    };
    c.Wz = mk(input, hidden);
    c.Uz = mk(hidden, hidden);
    c.bz = Tensor<T>::param({hidden}, std::vector<T>(size_t(hidden), T(0)));
    c.Wr = mk(input, hidden);
    c.Ur = mk(hidden, hidden);
    c.br = Tensor<T>::param({hidden}, std::vector<T>(size_t(hidden), T(0)));
    c.Wh = mk(input, hidden);
    c.Uh = mk(hidden, hidden);
    c.bh = Tensor<T>::param({hidden}, std::vector<T>(size_t(hidden), T(0)));
    return c;
  }

  void collect(ParamList<T>& out, const std::string& p) {
    out.push_back({p + ".Wz", Wz, true});
    out.push_back({p + ".Uz", Uz, true});
    out.push_back({p + ".bz", bz, true});
    out.push_back({p + ".Wr", Wr, true});
    out.push_back({p + ".Ur", Ur, true});
    out.push_back({p + ".br", br, true});
    out.push_back({p + ".Wh", Wh, true});
    out.push_back({p + ".Uh", Uh, true});
    out.push_back({p + ".bh", bh, true});
  }
};

// Runs the cell over the unmasked rows of X (in order, or reversed). Masked
// rows are skipped entirely: the state carries over them and their output
// rows are zero, so PAD extension cannot change any real position.
template <typename T>
Tensor<T> run_gru(const GRUCell<T>& cell, const Tensor<T>& X,
                  const std::vector<uint8_t>& mask, bool reverse) {
  if (X.rank() != 2 || X.shape()[1] != cell.input)
    throw ad::ShapeError("gru: input shape " + ad::shape_str(X.shape()) +
                         " does not match input dim " +
                         std::to_string(cell.input));
  int steps = X.shape()[0];
  if (steps < 1) throw ValidationError("gru: empty sequence");
  if (int(mask.size()) != steps)
    throw ad::ShapeError("gru: mask length mismatch");

  // whole-sequence input projections, one matmul per gate
  Tensor<T> xz = ad::matmul(X, cell.Wz);
  Tensor<T> xr = ad::matmul(X, cell.Wr);
  Tensor<T> xh = ad::matmul(X, cell.Wh);

  std::vector<int> positions;
  for (int t = 0; t < steps; ++t)
    if (mask[size_t(t)]) positions.push_back(t);
  if (reverse) std::reverse(positions.begin(), positions.end());

  std::vector<Tensor<T>> rows(static_cast<size_t>(steps));
  Tensor<T> h = Tensor<T>::zeros({1, cell.hidden});
  for (int t : positions) {
    Tensor<T> z = ad::sigmoid(
        ad::add(ad::add(ad::row(xz, t), ad::matmul(h, cell.Uz)), cell.bz));
    Tensor<T> r = ad::sigmoid(
        ad::add(ad::add(ad::row(xr, t), ad::matmul(h, cell.Ur)), cell.br));
    Tensor<T> c = ad::tanh_t(ad::add(
        ad::add(ad::row(xh, t), ad::matmul(ad::mul(r, h), cell.Uh)), cell.bh));
    Tensor<T> zc = ad::mul(z, c);
    Tensor<T> keep = ad::mul(ad::add_const(ad::scale(z, T(-1)), T(1)), h);
    h = ad::add(keep, zc);
    rows[size_t(t)] = h;
  }
  std::vector<Tensor<T>> rows1d;
  rows1d.reserve(size_t(steps));
  for (int t = 0; t < steps; ++t) {
    if (rows[size_t(t)].defined())
      rows1d.push_back(ad::reshape(rows[size_t(t)], {cell.hidden}));
    else
      rows1d.push_back(Tensor<T>::zeros({cell.hidden}));
  }
  return ad::stack_rows(rows1d);
}

template <typename T>
struct BiGRU {
  GRUCell<T> fwd, bwd;

  static BiGRU create(int input, int hidden, Rng& rng) {
    BiGRU b;
    b.fwd = GRUCell<T>::create(input, hidden, rng);
    b.bwd = GRUCell<T>::create(input, hidden, rng);
    return b;
  }

  int out_dim() const { return 2 * fwd.hidden; }

  // forward and backward direction states concatenated per step: {T, 2H}
  Tensor<T> forward(const Tensor<T>& X, const std::vector<uint8_t>& mask) const {
    return ad::concat<T>(
        {run_gru(fwd, X, mask, false), run_gru(bwd, X, mask, true)}, 1);
  }

  void collect(ParamList<T>& out, const std::string& p) {
    fwd.collect(out, p + ".fwd");
    bwd.collect(out, p + ".bwd");
  }
};

// ---------------------------------------------------------------------------
// attention pooling: s_i = u . tanh(W h_i + b), a = softmax over unmasked

template <typename T>
struct AttentionPool {
  int input = 0;
  int ctx = 0;
  Tensor<T> W;  // input x ctx
  Tensor<T> b;  // ctx
  Tensor<T> u;  // ctx

  static AttentionPool create(int input, Rng& rng, int ctx = -1) {
    AttentionPool a;
    a.input = input;
    a.ctx = ctx > 0 ? ctx : input;
    a.W = Tensor<T>::param({input, a.ctx},
                           std::vector<T>(size_t(input) * size_t(a.ctx), T(0)));
    glorot_fill(a.W, rng);
    a.b = Tensor<T>::param({a.ctx}, std::vector<T>(size_t(a.ctx), T(0)));
    a.u = Tensor<T>::param({a.ctx}, std::vector<T>(size_t(a.ctx), T(0)));
    glorot_fill(a.u, rng);
    return a;
  }

  struct Out {
    Tensor<T> pooled;   // {m}
    Tensor<T> weights;  // {T}, masked positions exactly zero
  };

  Out forward(const Tensor<T>& H, const std::vector<uint8_t>& mask) const {
    if (H.rank() != 2 || H.shape()[1] != input)
      throw ad::ShapeError("attention_pool: bad input " +
                           ad::shape_str(H.shape()));
    int steps = H.shape()[0];
    if (int(mask.size()) != steps)
      throw ad::ShapeError("attention_pool: mask length mismatch");
    bool any = false;
    for (uint8_t m : mask) any = any || m;
    if (!any) throw ValidationError("attention_pool: all positions masked");

    Tensor<T> proj = ad::tanh_t(ad::add(ad::matmul(H, W), b));  // {T, k}
    Tensor<T> scores =
        ad::reshape(ad::matmul(proj, ad::reshape(u, {ctx, 1})), {steps});
    Tensor<T> a = ad::softmax_lastdim(scores, &mask);
    Tensor<T> pooled =
        ad::reshape(ad::matmul(ad::reshape(a, {1, steps}), H), {input});
    return {pooled, a};
  }

  void collect(ParamList<T>& out, const std::string& p) {
    out.push_back({p + ".W", W, true});
    out.push_back({p + ".b", b, true});
    out.push_back({p + ".u", u, true});
  }
};

// ---------------------------------------------------------------------------
// label-wise attention: one context vector per label, shared projection

template <typename T>
struct LabelWiseAttention {
  int input = 0;
  int ctx = 0;
  int labels = 0;
  Tensor<T> W;  // input x ctx (shared)
  Tensor<T> b;  // ctx
  Tensor<T> U;  // labels x ctx

  static LabelWiseAttention create(int input, int labels, Rng& rng,
                                   int ctx = -1) {
    LabelWiseAttention a;
    a.input = input;
    a.ctx = ctx > 0 ? ctx : input;
    a.labels = labels;
    a.W = Tensor<T>::param({input, a.ctx},
                           std::vector<T>(size_t(input) * size_t(a.ctx), T(0)));
    glorot_fill(a.W, rng);
    a.b = Tensor<T>::param({a.ctx}, std::vector<T>(size_t(a.ctx), T(0)));
    a.U = Tensor<T>::param({labels, a.ctx},
                           std::vector<T>(size_t(labels) * size_t(a.ctx), T(0)));
    glorot_fill(a.U, rng);
    return a;
  }

  struct Out {
    Tensor<T> label_embeddings;  // {L, m}
    Tensor<T> weights;           // {L, T}, each row sums to 1
  };

  Out forward(const Tensor<T>& H, const std::vector<uint8_t>& mask) const {
    if (labels < 1) throw ValidationError("labelwise_attention: L must be >= 1");
    int steps = H.shape()[0];
    bool any = false;
    for (uint8_t m : mask) any = any || m;
    if (!any)
      throw ValidationError("labelwise_attention: all positions masked");
    Tensor<T> proj = ad::tanh_t(ad::add(ad::matmul(H, W), b));     // {T, k}
    Tensor<T> scores = ad::matmul(proj, ad::transpose(U));         // {T, L}
    Tensor<T> A = ad::softmax_lastdim(ad::transpose(scores), &mask);  // {L, T}
    Tensor<T> E = ad::matmul(A, H);                                // {L, m}
    (void)steps;
    return {E, A};
  }

  void collect(ParamList<T>& out, const std::string& p) {
    out.push_back({p + ".W", W, true});
    out.push_back({p + ".b", b, true});
    out.push_back({p + ".U", U, true});
  }
};

// ---------------------------------------------------------------------------
// transformer encoder (pre-norm blocks, learned positions)

template <typename T>
struct TransformerBlock {
  int model = 0;
  int heads = 0;
  int ff = 0;
  Tensor<T> Wq, Wk, Wv, Wo;          // model x model
  Tensor<T> bq, bk, bv, bo;          // model
  Tensor<T> W1, b1, W2, b2;          // feed-forward
  Tensor<T> ln1_g, ln1_b, ln2_g, ln2_b;

  static TransformerBlock create(int model, int heads, int ff, Rng& rng) {
    if (model % heads != 0)
      throw ValidationError("transformer: model dim " + std::to_string(model) +
                            " not divisible by " + std::to_string(heads) +
                            " heads");
    TransformerBlock blk;
    blk.model = model;
    blk.heads = heads;
    blk.ff = ff;
    auto mk = [&](int r, int c) {
      auto t = Tensor<T>::param({r, c},
                                std::vector<T>(size_t(r) * size_t(c), T(0)));
      glorot_fill(t, rng);
      return t;
    };
    auto vec = [&](int n, T fill) {
      return Tensor<T>::param({n}, std::vector<T>(size_t(n), fill));
    };
    blk.Wq = mk(model, model);
    blk.Wk = mk(model, model);
    blk.Wv = mk(model, model);
    blk.Wo = mk(model, model);
    blk.bq = vec(model, T(0));
    blk.bk = vec(model, T(0));
    blk.bv = vec(model, T(0));
    blk.bo = vec(model, T(0));
    blk.W1 = mk(model, ff);
    blk.b1 = vec(ff, T(0));
    blk.W2 = mk(ff, model);
    blk.b2 = vec(model, T(0));
    blk.ln1_g = vec(model, T(1));
    blk.ln1_b = vec(model, T(0));
    blk.ln2_g = vec(model, T(1));
    blk.ln2_b = vec(model, T(0));
    return blk;
  }

  // attn_mean, when non-null, receives the attention matrix averaged over
  // heads (values only, no tape)
  Tensor<T> forward(const Tensor<T>& X, const std::vector<uint8_t>& key_mask,
                    std::vector<std::vector<double>>* attn_mean = nullptr) const {
    int steps = X.shape()[0];
    int dh = model / heads;
    Tensor<T> Xn = ad::layer_norm(X, ln1_g, ln1_b);
    Tensor<T> Q = ad::add(ad::matmul(Xn, Wq), bq);
    Tensor<T> K = ad::add(ad::matmul(Xn, Wk), bk);
    Tensor<T> V = ad::add(ad::matmul(Xn, Wv), bv);
    if (attn_mean) {
      attn_mean->assign(size_t(steps),
                        std::vector<double>(size_t(steps), 0.0));
    }
    std::vector<Tensor<T>> head_ctx;
    for (int h = 0; h < heads; ++h) {
      Tensor<T> Qh = ad::slice(Q, 1, h * dh, (h + 1) * dh);
      Tensor<T> Kh = ad::slice(K, 1, h * dh, (h + 1) * dh);
      Tensor<T> Vh = ad::slice(V, 1, h * dh, (h + 1) * dh);
      Tensor<T> scores = ad::scale(ad::matmul(Qh, ad::transpose(Kh)),
                                   T(1.0 / std::sqrt(double(dh))));
      Tensor<T> P = ad::softmax_lastdim(scores, &key_mask);  // {T, T}
      if (attn_mean) {
        for (int i = 0; i < steps; ++i)
          for (int j = 0; j < steps; ++j)
            (*attn_mean)[size_t(i)][size_t(j)] +=
                double(P.values()[size_t(i) * steps + j]) / double(heads);
      }
      head_ctx.push_back(ad::matmul(P, Vh));
    }
    Tensor<T> ctx = ad::concat(head_ctx, 1);
    Tensor<T> attn_out = ad::add(ad::matmul(ctx, Wo), bo);
    Tensor<T> X2 = ad::add(X, attn_out);
    Tensor<T> X2n = ad::layer_norm(X2, ln2_g, ln2_b);
    Tensor<T> ffn = ad::add(
        ad::matmul(ad::relu(ad::add(ad::matmul(X2n, W1), b1)), W2), b2);
    return ad::add(X2, ffn);
  }

  void collect(ParamList<T>& out, const std::string& p) {
    out.push_back({p + ".Wq", Wq, true});
    out.push_back({p + ".bq", bq, true});
    out.push_back({p + ".Wk", Wk, true});
    out.push_back({p + ".bk", bk, true});
    out.push_back({p + ".Wv", Wv, true});
    out.push_back({p + ".bv", bv, true});
    out.push_back({p + ".Wo", Wo, true});
    out.push_back({p + ".bo", bo, true});
    out.push_back({p + ".W1", W1, true});
    out.push_back({p + ".b1", b1, true});
    out.push_back({p + ".W2", W2, true});
    out.push_back({p + ".b2", b2, true});
    out.push_back({p + ".ln1_g", ln1_g, true});
    out.push_back({p + ".ln1_b", ln1_b, true});
    out.push_back({p + ".ln2_g", ln2_g, true});
    out.push_back({p + ".ln2_b", ln2_b, true});
  }
};

template <typename T>
struct TransformerEncoder {
  int max_positions = 0;
  Embedding<T> tok;
  Tensor<T> pos;  // max_positions x model
  std::vector<TransformerBlock<T>> blocks;
  Tensor<T> out_g, out_b;  // final layer norm

  static TransformerEncoder create(int vocab, int model, int layers, int heads,
                                   int ff, int max_positions, Rng& rng,
                                   bool trainable_embeddings = true) {
    TransformerEncoder e;
    e.max_positions = max_positions;
    e.tok = Embedding<T>::create(vocab, model, rng, trainable_embeddings);
    e.pos = Tensor<T>::param(
        {max_positions, model},
        std::vector<T>(size_t(max_positions) * size_t(model), T(0)));
    glorot_fill(e.pos, rng);
    for (int l = 0; l < layers; ++l)
      e.blocks.push_back(TransformerBlock<T>::create(model, heads, ff, rng));
    e.out_g = Tensor<T>::param({model}, std::vector<T>(size_t(model), T(1)));
    e.out_b = Tensor<T>::param({model}, std::vector<T>(size_t(model), T(0)));
    return e;
  }

  struct Out {
    Tensor<T> states;  // {T, m}, final layer norm applied
    // attention row of position 0 from the last block, averaged over heads
    std::vector<double> cls_attention;
  };

  // ids must already include the classification token at position 0
  Out forward(const std::vector<int>& ids, bool want_cls_attention = false,
              int pad_id = 0) const {
    int steps = int(ids.size());
    if (steps > max_positions)
      throw ValidationError("transformer: sequence length " +
                            std::to_string(steps) + " exceeds max positions " +
                            std::to_string(max_positions));
    std::vector<uint8_t> mask(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) mask[i] = ids[i] != pad_id;
    Tensor<T> X =
        ad::add(tok.lookup(ids), ad::slice(pos, 0, 0, steps));
    std::vector<std::vector<double>> attn;
    for (size_t l = 0; l < blocks.size(); ++l) {
      bool last = l + 1 == blocks.size();
      X = blocks[l].forward(X, mask, (want_cls_attention && last) ? &attn : nullptr);
    }
    Out out;
    out.states = ad::layer_norm(X, out_g, out_b);
    if (want_cls_attention && !attn.empty()) out.cls_attention = attn[0];
    return out;
  }

  void collect(ParamList<T>& out, const std::string& p) {
    tok.collect(out, p + ".tok");
    out.push_back({p + ".pos", pos, true});
    for (size_t l = 0; l < blocks.size(); ++l)
      blocks[l].collect(out, p + ".block" + std::to_string(l));
    out.push_back({p + ".out_g", out_g, true});
    out.push_back({p + ".out_b", out_b, true});
  }
};

}  // namespace lexpred::nn
