#pragma once
// Dense tensors with a recorded backward graph (reverse mode).
//
// Every op that sees a grad-requiring input appends a backward closure to the
// result node; backward() walks the recorded graph once in reverse topological
// order, accumulating (summing) gradients across fan-out, then detaches the
// graph so it cannot be replayed. Templated on the scalar type: float for
// training, double for gradient checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "lexpred/common.hpp"

namespace lexpred::ad {

struct ShapeError : ValidationError {
  using ValidationError::ValidationError;
};
struct NumericError : RuntimeFailure {
  using RuntimeFailure::RuntimeFailure;
};

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Thread-local recording switch. Evaluation passes run under NoGradGuard so
// no closures are built even though parameters require grad.
inline bool& grad_recording() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_recording()) { grad_recording() = false; }
  ~NoGradGuard() { grad_recording() = prev; }
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

  static Tensor zeros(const Shape& shape) {
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->value.assign(size_t(numel(shape)), T(0));
    return Tensor(n);
  }

  static Tensor full(const Shape& shape, T v) {
    Tensor t = zeros(shape);
    std::fill(t.n_->value.begin(), t.n_->value.end(), v);
    return t;
  }

  static Tensor from_values(const Shape& shape, std::vector<T> vals) {
    if (int64_t(vals.size()) != numel(shape))
      throw ShapeError("tensor: " + std::to_string(vals.size()) +
                       " values for shape " + shape_str(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->value = std::move(vals);
    return Tensor(n);
  }

  static Tensor scalar(T v) { return from_values({}, {v}); }

  // Leaf parameter; gradients accumulate here across backward calls until
  // zero_grad().
  static Tensor param(const Shape& shape, std::vector<T> vals) {
    Tensor t = from_values(shape, std::move(vals));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int rank() const { return int(n_->shape.size()); }
  int64_t size() const { return int64_t(n_->value.size()); }
  std::vector<T>& values() { return n_->value; }
  const std::vector<T>& values() const { return n_->value; }
  std::vector<T>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool requires_grad() const { return n_->requires_grad; }

  T item() const {
    if (size() != 1) throw ShapeError("item: tensor is not scalar");
    return n_->value[0];
  }

  void zero_grad() {
    if (n_) n_->grad.assign(n_->value.size(), T(0));
  }

  std::shared_ptr<Node<T>>& node() { return n_; }
  const std::shared_ptr<Node<T>>& node() const { return n_; }

 private:
  std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <typename T>
inline Tensor<T> make_op(Shape shape, std::vector<T> value,
                         std::vector<std::shared_ptr<Node<T>>> parents,
                         std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool rec = grad_recording();
  bool req = false;
  if (rec) {
    for (auto& p : parents)
      if (p->requires_grad) req = true;
  }
  if (req) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor<T>(n);
}

// NumPy-style broadcast of two shapes.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out;
  size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
  out.resize(r);
  for (size_t i = 0; i < r; ++i) {
    int da = i < r - ra ? 1 : a[i - (r - ra)];
    int db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("broadcast mismatch " + shape_str(a) + " vs " +
                       shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides with zeros on broadcast axes, aligned to `out` rank.
inline std::vector<int64_t> broadcast_strides(const Shape& s,
                                              const Shape& out) {
  size_t r = out.size(), rs = s.size();
  std::vector<int64_t> full(r, 0);
  int64_t stride = 1;
  for (size_t i = rs; i-- > 0;) {
    full[i + (r - rs)] = (s[i] == 1) ? 0 : stride;
    stride *= s[i];
  }
  for (size_t i = 0; i < r; ++i)
    if (i < r - rs) full[i] = 0;
  // zero out axes where s has dim 1 but out larger
  for (size_t i = 0; i < rs; ++i)
    if (s[i] == 1 && out[i + (r - rs)] != 1) full[i + (r - rs)] = 0;
  return full;
}

template <typename T>
inline void check_finite(const Tensor<T>& x, const char* op) {
  for (T v : x.values())
    if (std::isnan(v))
      throw NumericError(std::string(op) + ": NaN input");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops with broadcasting

namespace detail {

enum class BinOp { Add, Sub, Mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinOp op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto pa = a.node();
  auto pb = b.node();

  auto apply = [op](T x, T y) -> T {
    switch (op) {
      case BinOp::Add: return x + y;
      case BinOp::Sub: return x - y;
      default: return x * y;
    }
  };

  // fast path: identical shapes
  if (sa == sb) {
    std::vector<T> out(pa->value.size());
    const T* xa = pa->value.data();
    const T* xb = pb->value.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = apply(xa[i], xb[i]);
    return make_op<T>(
        sa, std::move(out), {pa, pb}, [pa, pb, op](Node<T>& n) {
          if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) {
              pa->grad[i] += op == BinOp::Mul ? n.grad[i] * pb->value[i]
                                              : n.grad[i];
            }
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) {
              T g = n.grad[i];
              if (op == BinOp::Mul)
                pb->grad[i] += g * pa->value[i];
              else if (op == BinOp::Sub)
                pb->grad[i] -= g;
              else
                pb->grad[i] += g;
            }
          }
        });
  }

  Shape so = broadcast_shape(sa, sb);
  auto stra = broadcast_strides(sa, so);
  auto strb = broadcast_strides(sb, so);
  int64_t total = numel(so);
  size_t r = so.size();
  std::vector<T> out(static_cast<size_t>(total), T(0));
  std::vector<int64_t> idx(r, 0);
  int64_t offa = 0, offb = 0;
  for (int64_t lin = 0; lin < total; ++lin) {
    out[size_t(lin)] = apply(pa->value[size_t(offa)], pb->value[size_t(offb)]);
    // advance multi-index
    for (size_t d = r; d-- > 0;) {
      idx[d]++;
      offa += stra[d];
      offb += strb[d];
      if (idx[d] < so[d]) break;
      offa -= stra[d] * so[d];
      offb -= strb[d] * so[d];
      idx[d] = 0;
    }
  }

  return make_op<T>(
      so, std::move(out), {pa, pb},
      [pa, pb, op, so, stra, strb](Node<T>& n) {
        size_t r = so.size();
        std::vector<int64_t> idx(r, 0);
        int64_t offa = 0, offb = 0;
        bool ga = pa->requires_grad, gb = pb->requires_grad;
        if (ga) pa->ensure_grad();
        if (gb) pb->ensure_grad();
        int64_t total = numel(so);
        for (int64_t lin = 0; lin < total; ++lin) {
          T g = n.grad[size_t(lin)];
          if (ga) {
            T d = op == BinOp::Mul ? g * pb->value[size_t(offb)] : g;
            pa->grad[size_t(offa)] += d;
          }
          if (gb) {
            T d = g;
            if (op == BinOp::Mul)
              d = g * pa->value[size_t(offa)];
            else if (op == BinOp::Sub)
              d = -g;
            pb->grad[size_t(offb)] += d;
          }
          for (size_t d2 = r; d2-- > 0;) {
            idx[d2]++;
            offa += stra[d2];
            offb += strb[d2];
            if (idx[d2] < so[d2]) break;
            offa -= stra[d2] * so[d2];
            offb -= strb[d2] * so[d2];
            idx[d2] = 0;
          }
        }
      });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::Add);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::Sub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::Mul);
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto pa = a.node();
  std::vector<T> out(pa->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa->value[i] * c;
  return detail::make_op<T>(a.shape(), std::move(out), {pa},
                            [pa, c](Node<T>& n) {
                              pa->ensure_grad();
                              for (size_t i = 0; i < n.grad.size(); ++i)
                                pa->grad[i] += n.grad[i] * c;
                            });
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, T c) {
  auto pa = a.node();
  std::vector<T> out(pa->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa->value[i] + c;
  return detail::make_op<T>(a.shape(), std::move(out), {pa},
                            [pa](Node<T>& n) {
                              pa->ensure_grad();
                              for (size_t i = 0; i < n.grad.size(); ++i)
                                pa->grad[i] += n.grad[i];
                            });
}

// ---------------------------------------------------------------------------
// matmul / transpose

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: expects rank-2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int n = a.shape()[0], k = a.shape()[1];
  int k2 = b.shape()[0], m = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dims differ " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  auto pa = a.node();
  auto pb = b.node();
  std::vector<T> out(size_t(n) * m, T(0));
  {
    const T* A = pa->value.data();
    const T* B = pb->value.data();
    T* C = out.data();
    for (int i = 0; i < n; ++i)
      for (int kk = 0; kk < k; ++kk) {
        T av = A[i * k + kk];
        if (av == T(0)) continue;
        const T* Br = B + size_t(kk) * m;
        T* Cr = C + size_t(i) * m;
        for (int j = 0; j < m; ++j) Cr[j] += av * Br[j];
      }
  }
  return detail::make_op<T>(
      {n, m}, std::move(out), {pa, pb}, [pa, pb, n, k, m](Node<T>& nd) {
        const T* G = nd.grad.data();
        if (pa->requires_grad) {
          pa->ensure_grad();
          const T* B = pb->value.data();
          T* GA = pa->grad.data();
          // dA = G * B^T
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
              T g = G[i * m + j];
              if (g == T(0)) continue;
              const T* Br = B;
              for (int kk = 0; kk < k; ++kk)
                GA[i * k + kk] += g * Br[size_t(kk) * m + j];
            }
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          const T* A = pa->value.data();
          T* GB = pb->grad.data();
          // dB = A^T * G
          for (int i = 0; i < n; ++i)
            for (int kk = 0; kk < k; ++kk) {
              T av = A[i * k + kk];
              if (av == T(0)) continue;
              const T* Gr = G + size_t(i) * m;
              T* GBr = GB + size_t(kk) * m;
              for (int j = 0; j < m; ++j) GBr[j] += av * Gr[j];
            }
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expects rank-2");
  int n = a.shape()[0], m = a.shape()[1];
  auto pa = a.node();
  std::vector<T> out(size_t(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[size_t(j) * n + i] = pa->value[size_t(i) * m + j];
  return detail::make_op<T>({m, n}, std::move(out), {pa},
                            [pa, n, m](Node<T>& nd) {
                              pa->ensure_grad();
                              for (int i = 0; i < n; ++i)
                                for (int j = 0; j < m; ++j)
                                  pa->grad[size_t(i) * m + j] +=
                                      nd.grad[size_t(j) * n + i];
                            });
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  if (numel(shape) != a.size())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " +
                     shape_str(shape));
  auto pa = a.node();
  return detail::make_op<T>(shape, pa->value, {pa}, [pa](Node<T>& nd) {
    pa->ensure_grad();
    for (size_t i = 0; i < nd.grad.size(); ++i) pa->grad[i] += nd.grad[i];
  });
}

// slice along an axis of a rank-1 or rank-2 tensor, [start, end)
template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, int start, int end) {
  if (a.rank() < 1 || a.rank() > 2 || axis < 0 || axis >= a.rank())
    throw ShapeError("slice: bad axis for " + shape_str(a.shape()));
  int dim = a.shape()[size_t(axis)];
  if (start < 0 || end > dim || start >= end)
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(end) + ") out of dim " +
                     std::to_string(dim));
  auto pa = a.node();
  if (a.rank() == 1) {
    std::vector<T> out(pa->value.begin() + start, pa->value.begin() + end);
    return detail::make_op<T>({end - start}, std::move(out), {pa},
                              [pa, start](Node<T>& nd) {
                                pa->ensure_grad();
                                for (size_t i = 0; i < nd.grad.size(); ++i)
                                  pa->grad[size_t(start) + i] += nd.grad[i];
                              });
  }
  int rows = a.shape()[0], cols = a.shape()[1];
  if (axis == 0) {
    std::vector<T> out(pa->value.begin() + int64_t(start) * cols,
                       pa->value.begin() + int64_t(end) * cols);
    return detail::make_op<T>({end - start, cols}, std::move(out), {pa},
                              [pa, start, cols](Node<T>& nd) {
                                pa->ensure_grad();
                                size_t off = size_t(start) * cols;
                                for (size_t i = 0; i < nd.grad.size(); ++i)
                                  pa->grad[off + i] += nd.grad[i];
                              });
  }
  int w = end - start;
  std::vector<T> out(size_t(rows) * w);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < w; ++j)
      out[size_t(i) * w + j] = pa->value[size_t(i) * cols + start + j];
  return detail::make_op<T>({rows, w}, std::move(out), {pa},
                            [pa, rows, cols, start, w](Node<T>& nd) {
                              pa->ensure_grad();
                              for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < w; ++j)
                                  pa->grad[size_t(i) * cols + start + j] +=
                                      nd.grad[size_t(i) * w + j];
                            });
}

// row i of a rank-2 tensor, as shape {1, cols}
template <typename T>
Tensor<T> row(const Tensor<T>& a, int i) {
  return slice(a, 0, i, i + 1);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  int r = parts[0].rank();
  if (axis < 0 || axis >= r) throw ShapeError("concat: bad axis");
  for (auto& p : parts) {
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < r; ++d)
      if (d != axis && p.shape()[size_t(d)] != parts[0].shape()[size_t(d)])
        throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) +
                         " vs " + shape_str(parts[0].shape()));
  }
  std::vector<std::shared_ptr<Node<T>>> pars;
  for (auto& p : parts) pars.push_back(p.node());

  if (r == 1 || axis == 0) {
    Shape so = parts[0].shape();
    int total = 0;
    for (auto& p : parts) total += p.shape()[size_t(axis)];
    so[size_t(axis)] = total;
    std::vector<T> out;
    out.reserve(size_t(numel(so)));
    std::vector<size_t> sizes;
    for (auto& p : parts) {
      out.insert(out.end(), p.values().begin(), p.values().end());
      sizes.push_back(p.values().size());
    }
    return detail::make_op<T>(so, std::move(out), std::move(pars),
                              [sizes](Node<T>& nd) {
                                size_t off = 0;
                                for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
                                  auto& p = nd.parents[pi];
                                  if (p->requires_grad) {
                                    p->ensure_grad();
                                    for (size_t i = 0; i < sizes[pi]; ++i)
                                      p->grad[i] += nd.grad[off + i];
                                  }
                                  off += sizes[pi];
                                }
                              });
  }

  // axis == 1, rank 2
  int rows = parts[0].shape()[0];
  int total = 0;
  std::vector<int> widths;
  for (auto& p : parts) {
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  std::vector<T> out(size_t(rows) * total);
  {
    int off = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      const auto& v = parts[pi].values();
      int w = widths[pi];
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < w; ++j)
          out[size_t(i) * total + off + j] = v[size_t(i) * w + j];
      off += w;
    }
  }
  return detail::make_op<T>(
      {rows, total}, std::move(out), std::move(pars),
      [rows, total, widths](Node<T>& nd) {
        int off = 0;
        for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
          auto& p = nd.parents[pi];
          int w = widths[pi];
          if (p->requires_grad) {
            p->ensure_grad();
            for (int i = 0; i < rows; ++i)
              for (int j = 0; j < w; ++j)
                p->grad[size_t(i) * w + j] +=
                    nd.grad[size_t(i) * total + off + j];
          }
          off += w;
        }
      });
}

// stack rank-1 tensors of equal length into a {n, m} matrix
template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows_in) {
  if (rows_in.empty()) throw ShapeError("stack_rows: no inputs");
  int m = int(rows_in[0].size());
  std::vector<std::shared_ptr<Node<T>>> pars;
  std::vector<T> out;
  out.reserve(rows_in.size() * size_t(m));
  for (auto& r : rows_in) {
    if (int(r.size()) != m) throw ShapeError("stack_rows: length mismatch");
    out.insert(out.end(), r.values().begin(), r.values().end());
    pars.push_back(r.node());
  }
  int n = int(rows_in.size());
  return detail::make_op<T>({n, m}, std::move(out), std::move(pars),
                            [m](Node<T>& nd) {
                              for (size_t pi = 0; pi < nd.parents.size(); ++pi) {
                                auto& p = nd.parents[pi];
                                if (!p->requires_grad) continue;
                                p->ensure_grad();
                                for (int j = 0; j < m; ++j)
                                  p->grad[size_t(j)] +=
                                      nd.grad[pi * size_t(m) + size_t(j)];
                              }
                            });
}

// ---------------------------------------------------------------------------
// elementwise unary ops

namespace detail {
template <typename T, typename F, typename DF>
Tensor<T> unary(const Tensor<T>& a, F f, DF df) {
  auto pa = a.node();
  std::vector<T> out(pa->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(pa->value[i]);
  return make_op<T>(a.shape(), std::move(out), {pa}, [pa, df](Node<T>& nd) {
    pa->ensure_grad();
    for (size_t i = 0; i < nd.grad.size(); ++i)
      pa->grad[i] += nd.grad[i] * df(pa->value[i], nd.value[i]);
  });
}
}  // namespace detail

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  detail::check_finite(a, "sigmoid");
  return detail::unary(
      a,
      [](T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh_t(const Tensor<T>& a) {
  detail::check_finite(a, "tanh");
  return detail::unary(a, [](T x) { return std::tanh(x); },
                       [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> log_t(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return std::log(x); },
                       [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> abs_t(const Tensor<T>& a) {
  return detail::unary(a, [](T x) { return std::abs(x); },
                       [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

// pass-through gradient strictly inside (lo, hi), zero outside
template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  return detail::unary(
      a, [lo, hi](T x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](T x, T) { return (x > lo && x < hi) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// softmax (last dim, optional key mask shared by all rows)

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& a,
                          const std::vector<uint8_t>* mask = nullptr) {
  detail::check_finite(a, "softmax");
  if (a.rank() < 1 || a.rank() > 2) throw ShapeError("softmax: rank 1 or 2");
  int cols = a.shape()[size_t(a.rank() - 1)];
  int rows = a.rank() == 2 ? a.shape()[0] : 1;
  if (mask) {
    if (int(mask->size()) != cols)
      throw ShapeError("softmax: mask length mismatch");
    bool any = false;
    for (uint8_t m : *mask) any = any || m;
    if (!any) throw ValidationError("softmax: all positions masked");
  }
  auto pa = a.node();
  std::vector<T> out(pa->value.size(), T(0));
  std::vector<uint8_t> mk = mask ? *mask : std::vector<uint8_t>(size_t(cols), 1);
  for (int i = 0; i < rows; ++i) {
    const T* x = pa->value.data() + size_t(i) * cols;
    T* y = out.data() + size_t(i) * cols;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < cols; ++j)
      if (mk[size_t(j)] && x[j] > mx) mx = x[j];
    T z = T(0);
    for (int j = 0; j < cols; ++j)
      if (mk[size_t(j)]) {
        y[j] = std::exp(x[j] - mx);
        z += y[j];
      }
    for (int j = 0; j < cols; ++j)
      if (mk[size_t(j)]) y[j] /= z;
  }
  return detail::make_op<T>(
      a.shape(), std::move(out), {pa}, [pa, rows, cols, mk](Node<T>& nd) {
        pa->ensure_grad();
        for (int i = 0; i < rows; ++i) {
          const T* y = nd.value.data() + size_t(i) * cols;
          const T* g = nd.grad.data() + size_t(i) * cols;
          T dot = T(0);
          for (int j = 0; j < cols; ++j)
            if (mk[size_t(j)]) dot += g[j] * y[j];
          T* gx = pa->grad.data() + size_t(i) * cols;
          for (int j = 0; j < cols; ++j)
            if (mk[size_t(j)]) gx[j] += y[j] * (g[j] - dot);
        }
      });
}

// ---------------------------------------------------------------------------
// layer norm over the last dim, eps = 1e-5

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = T(1e-5)) {
  if (x.rank() < 1 || x.rank() > 2) throw ShapeError("layer_norm: rank 1 or 2");
  int cols = x.shape()[size_t(x.rank() - 1)];
  int rows = x.rank() == 2 ? x.shape()[0] : 1;
  if (int(gain.size()) != cols || int(bias.size()) != cols)
    throw ShapeError("layer_norm: gain/bias dim mismatch");
  auto px = x.node();
  auto pg = gain.node();
  auto pb = bias.node();
  std::vector<T> out(px->value.size());
  std::vector<T> xhat(px->value.size());
  std::vector<T> inv_sigma(static_cast<size_t>(rows), T(0));
  for (int i = 0; i < rows; ++i) {
    const T* xr = px->value.data() + size_t(i) * cols;
    T mu = T(0);
    for (int j = 0; j < cols; ++j) mu += xr[j];
    mu /= T(cols);
    T var = T(0);
    for (int j = 0; j < cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= T(cols);
    T is = T(1) / std::sqrt(var + eps);
    inv_sigma[size_t(i)] = is;
    for (int j = 0; j < cols; ++j) {
      T xh = (xr[j] - mu) * is;
      xhat[size_t(i) * cols + j] = xh;
      out[size_t(i) * cols + j] = xh * pg->value[size_t(j)] + pb->value[size_t(j)];
    }
  }
  return detail::make_op<T>(
      x.shape(), std::move(out), {px, pg, pb},
      [px, pg, pb, rows, cols, xhat, inv_sigma](Node<T>& nd) {
        for (int i = 0; i < rows; ++i) {
          const T* g = nd.grad.data() + size_t(i) * cols;
          const T* xh = xhat.data() + size_t(i) * cols;
          if (pg->requires_grad) {
            pg->ensure_grad();
            for (int j = 0; j < cols; ++j) pg->grad[size_t(j)] += g[j] * xh[j];
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (int j = 0; j < cols; ++j) pb->grad[size_t(j)] += g[j];
          }
          if (px->requires_grad) {
            px->ensure_grad();
            T is = inv_sigma[size_t(i)];
            T mean_dy = T(0), mean_dyxh = T(0);
            for (int j = 0; j < cols; ++j) {
              T dy = g[j] * pg->value[size_t(j)];
              mean_dy += dy;
              mean_dyxh += dy * xh[j];
            }
            mean_dy /= T(cols);
            mean_dyxh /= T(cols);
            T* gx = px->grad.data() + size_t(i) * cols;
            for (int j = 0; j < cols; ++j) {
              T dy = g[j] * pg->value[size_t(j)];
              gx[j] += is * (dy - mean_dy - xh[j] * mean_dyxh);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  auto pa = a.node();
  T s = T(0);
  for (T v : pa->value) s += v;
  return detail::make_op<T>({}, {s}, {pa}, [pa](Node<T>& nd) {
    pa->ensure_grad();
    T g = nd.grad[0];
    for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
  });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  auto pa = a.node();
  T s = T(0);
  for (T v : pa->value) s += v;
  T inv = T(1) / T(pa->value.size());
  return detail::make_op<T>({}, {s * inv}, {pa}, [pa, inv](Node<T>& nd) {
    pa->ensure_grad();
    T g = nd.grad[0] * inv;
    for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
  });
}

// per-row dot product of two {n, m} matrices -> {n}
template <typename T>
Tensor<T> rowwise_dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || a.shape() != b.shape())
    throw ShapeError("rowwise_dot: shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  int n = a.shape()[0], m = a.shape()[1];
  auto pa = a.node();
  auto pb = b.node();
  std::vector<T> out(size_t(n), T(0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      out[size_t(i)] += pa->value[size_t(i) * m + j] * pb->value[size_t(i) * m + j];
  return detail::make_op<T>(
      {n}, std::move(out), {pa, pb}, [pa, pb, n, m](Node<T>& nd) {
        for (int i = 0; i < n; ++i) {
          T g = nd.grad[size_t(i)];
          if (pa->requires_grad) {
            pa->ensure_grad();
            for (int j = 0; j < m; ++j)
              pa->grad[size_t(i) * m + j] += g * pb->value[size_t(i) * m + j];
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (int j = 0; j < m; ++j)
              pb->grad[size_t(i) * m + j] += g * pa->value[size_t(i) * m + j];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// embedding gather; rows with id == skip_id come back zero and get no gradient

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& ids,
                      int skip_id = -1) {
  if (table.rank() != 2) throw ShapeError("gather_rows: table must be rank-2");
  int v = table.shape()[0], d = table.shape()[1];
  for (int id : ids)
    if (id < 0 || id >= v)
      throw ValidationError("gather_rows: id " + std::to_string(id) +
                            " out of range [0," + std::to_string(v) + ")");
  auto pt = table.node();
  std::vector<T> out(ids.size() * size_t(d), T(0));
  for (size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] == skip_id) continue;
    const T* src = pt->value.data() + size_t(ids[t]) * d;
    std::copy(src, src + d, out.begin() + t * size_t(d));
  }
  return detail::make_op<T>(
      {int(ids.size()), d}, std::move(out), {pt},
      [pt, ids, d, skip_id](Node<T>& nd) {
        pt->ensure_grad();
        for (size_t t = 0; t < ids.size(); ++t) {
          if (ids[t] == skip_id) continue;
          T* dst = pt->grad.data() + size_t(ids[t]) * d;
          const T* g = nd.grad.data() + t * size_t(d);
          for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
      });
}

// inverted dropout as a recorded multiply by a constant mask
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  std::vector<T> mask(a.values().size());
  T keep = T(1.0 / (1.0 - p));
  for (auto& m : mask) m = rng.bernoulli(p) ? T(0) : keep;
  Tensor<T> mt = Tensor<T>::from_values(a.shape(), std::move(mask));
  return mul(a, mt);
}

// ---------------------------------------------------------------------------
// backward

// Reverse sweep from a scalar loss over the recorded graph. Gradients sum
// across fan-out; afterwards the recorded closures and parent links are
// released, so a graph can be walked only once.
template <typename T>
void backward(Tensor<T>& loss) {
  if (loss.size() != 1)
    throw ValidationError("backward: loss must be scalar, got shape " +
                          shape_str(loss.shape()));
  if (!loss.requires_grad())
    throw ValidationError("backward: loss is not recorded on any tape");

  // iterative post-order DFS -> topological order
  std::vector<Node<T>*> topo;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] = T(1);
  for (size_t i = topo.size(); i-- > 0;) {
    Node<T>* n = topo[i];
    n->ensure_grad();
    if (n->backward) n->backward(*n);
  }
  // single-use: detach the walked graph
  for (Node<T>* n : topo) {
    n->backward = nullptr;
    n->parents.clear();
  }
}

// ---------------------------------------------------------------------------
// finite-difference gradient check

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  size_t worst_param = 0;
  size_t worst_coord = 0;
};

// Central differences per coordinate of every parameter against the analytic
// gradients produced by backward(). build_loss must rebuild the graph from
// the parameters' current values on every call.
template <typename F>
GradCheckReport grad_check(F build_loss, std::vector<Tensor<double>> params,
                           double h = 1e-5, double tol = 1e-4) {
  for (auto& p : params) p.zero_grad();
  Tensor<double> loss = build_loss();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  GradCheckReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = params[pi].values();
    for (size_t ci = 0; ci < vals.size(); ++ci) {
      double keep = vals[ci];
      vals[ci] = keep + h;
      double lp = build_loss().item();
      vals[ci] = keep - h;
      double lm = build_loss().item();
      vals[ci] = keep;
      double numeric = (lp - lm) / (2.0 * h);
      double a = analytic[pi][ci];
      double rel = std::abs(a - numeric) /
                   std::max({std::abs(a), std::abs(numeric), 1e-8});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = pi;
        rep.worst_coord = ci;
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace lexpred::ad
