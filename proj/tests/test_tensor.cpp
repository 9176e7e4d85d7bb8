// Tensor/tape unit tests. Expected values come from independent oracles:
// triple-loop matmul, central differences, and hand-computed analytics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lexpred/common.hpp"
#include "lexpred/tensor.hpp"

using namespace lexpred;
using ad::Tensor;

namespace {

// independent oracle: naive triple loop
std::vector<double> matmul_oracle(const std::vector<double>& a,
                                  const std::vector<double>& b, int n, int k,
                                  int m) {
  std::vector<double> c(size_t(n) * m, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      for (int kk = 0; kk < k; ++kk)
        c[size_t(i) * m + j] += a[size_t(i) * k + kk] * b[size_t(kk) * m + j];
  return c;
}

std::vector<double> random_values(size_t n, Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("matmul: identity, shape error, oracle") {
  // I3 * A = A
  std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Rng rng(11);
  auto av = random_values(12, rng);
  auto I = Tensor<double>::from_values({3, 3}, eye);
  auto A = Tensor<double>::from_values({3, 4}, av);
  auto C = ad::matmul(I, A);
  for (size_t i = 0; i < av.size(); ++i) CHECK(C.values()[i] == av[i]);

  auto B = Tensor<double>::from_values({4, 5}, random_values(20, rng));
  auto A23 = Tensor<double>::from_values({2, 3}, random_values(6, rng));
  CHECK_THROWS_AS((void)ad::matmul(A23, B), ad::ShapeError);
  CHECK_THROWS_WITH_AS((void)ad::matmul(A23, B),
                       doctest::Contains("(2,3)"), ad::ShapeError);

  // random (3x4)*(4x2) vs the naive loop, 1e-12 at 64-bit
  auto x = random_values(12, rng);
  auto y = random_values(8, rng);
  auto X = Tensor<double>::from_values({3, 4}, x);
  auto Y = Tensor<double>::from_values({4, 2}, y);
  auto Z = ad::matmul(X, Y);
  auto want = matmul_oracle(x, y, 3, 4, 2);
  for (size_t i = 0; i < want.size(); ++i)
    CHECK(std::abs(Z.values()[i] - want[i]) < 1e-12);
}

TEST_CASE("elementwise activations: analytic points") {
  auto s = ad::sigmoid(Tensor<double>::scalar(0.0));
  CHECK(s.item() == doctest::Approx(0.5).epsilon(1e-12));

  // d/dx sigmoid at 0 = 0.25
  auto x = Tensor<double>::param({}, {0.0});
  auto y = ad::sigmoid(x);
  ad::backward(y);
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));

  auto sm = ad::softmax_lastdim(
      Tensor<double>::from_values({4}, {1, 1, 1, 1}));
  for (double v : sm.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // stability: softmax([1000, 0]) finite and equal to [1, 0] within 1e-12
  auto big = ad::softmax_lastdim(Tensor<double>::from_values({2}, {1000, 0}));
  CHECK(std::isfinite(big.values()[0]));
  CHECK(big.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big.values()[1] == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)ad::sigmoid(Tensor<double>::scalar(
                      std::numeric_limits<double>::quiet_NaN())),
                  ad::NumericError);
}

TEST_CASE("backward: product rule, fan-out, non-scalar loss") {
  auto x = Tensor<double>::param({}, {2.0});
  auto y = Tensor<double>::param({}, {3.0});
  auto loss = ad::mul(x, y);
  ad::backward(loss);
  CHECK(x.grad()[0] == 3.0);
  CHECK(y.grad()[0] == 2.0);

  auto z = Tensor<double>::param({}, {1.0});
  auto twice = ad::add(z, z);
  ad::backward(twice);
  CHECK(z.grad()[0] == 2.0);

  auto vec = Tensor<double>::param({3}, {1, 2, 3});
  auto notscalar = ad::scale(vec, 2.0);
  CHECK_THROWS_AS(ad::backward(notscalar), ValidationError);
}

TEST_CASE("backward: sum(tanh(Wx)) matches central differences") {
  Rng rng(42);
  auto wv = random_values(12, rng);
  auto xv = random_values(4, rng);
  auto W = Tensor<double>::param({3, 4}, wv);
  auto build = [&]() {
    auto x = Tensor<double>::from_values({4, 1}, xv);
    return ad::sum_all(ad::tanh_t(ad::matmul(W, x)));
  };
  auto rep = ad::grad_check(build, {W}, 1e-5, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("grad_check: sigmoid analytic and wrong-backward negative control") {
  auto x = Tensor<double>::param({}, {0.0});
  auto build = [&]() { return ad::sigmoid(x); };
  auto rep = ad::grad_check(build, {x}, 1e-5, 1e-8);
  CHECK(rep.pass);  // error < 1e-8 against the analytic 0.25

  // a backward scaled by 2 must fail the check
  x.zero_grad();
  auto loss = ad::sigmoid(x);
  ad::backward(loss);
  double wrong = 2.0 * x.grad()[0];
  double h = 1e-5;
  double keep = x.values()[0];
  x.values()[0] = keep + h;
  double lp = ad::sigmoid(x).item();
  x.values()[0] = keep - h;
  double lm = ad::sigmoid(x).item();
  x.values()[0] = keep;
  double numeric = (lp - lm) / (2 * h);
  double rel = std::abs(wrong - numeric) /
               std::max({std::abs(wrong), std::abs(numeric), 1e-8});
  CHECK(rel > 1e-4);
}

TEST_CASE("primitive gradients: central differences over random shapes") {
  // every primitive against finite differences on >= 10 random shapes/seeds
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    int n = 2 + int(rng.uniform_int(3));
    int m = 2 + int(rng.uniform_int(3));
    int k = 2 + int(rng.uniform_int(3));
    auto A = Tensor<double>::param({n, k}, random_values(size_t(n) * k, rng));
    auto B = Tensor<double>::param({k, m}, random_values(size_t(k) * m, rng));
    auto C = Tensor<double>::param({n, m}, random_values(size_t(n) * m, rng));
    auto d = Tensor<double>::param({m}, random_values(size_t(m), rng));
    auto gain = Tensor<double>::param({m}, random_values(size_t(m), rng, 0.5, 1.5));
    auto bias = Tensor<double>::param({m}, random_values(size_t(m), rng));

    auto build = [&]() {
      auto mm = ad::matmul(A, B);                       // {n,m}
      auto brd = ad::add(mm, d);                        // broadcast add
      auto prod = ad::mul(brd, C);                      // elementwise
      auto dif = ad::sub(prod, C);
      auto act = ad::tanh_t(ad::sigmoid(dif));
      auto ln = ad::layer_norm(act, gain, bias);
      auto sm = ad::softmax_lastdim(ln);
      auto cl = ad::clamp(sm, 1e-7, 1.0 - 1e-7);
      auto lg = ad::log_t(cl);
      auto rel = ad::relu(ad::sub(lg, C));
      auto ab = ad::abs_t(ad::concat<double>({rel, prod}, 1));
      auto sl = ad::slice(ab, 1, 1, m + 1);
      auto tp = ad::transpose(sl);
      return ad::mean_all(ad::mul(tp, tp));
    };
    auto rep = ad::grad_check(build, {A, B, C, d, gain, bias}, 1e-5, 1e-4);
    INFO("seed ", seed, " max rel err ", rep.max_rel_err);
    CHECK(rep.pass);
  }
}

TEST_CASE("gather/stack/rowwise_dot gradients") {
  for (uint64_t seed = 100; seed < 105; ++seed) {
    Rng rng(seed);
    auto W = Tensor<double>::param({6, 3}, random_values(18, rng));
    std::vector<int> ids = {1, 0, 5, 1};  // repeats accumulate; 0 is skipped
    auto U = Tensor<double>::param({4, 3}, random_values(12, rng));
    auto build = [&]() {
      auto emb = ad::gather_rows(W, ids, /*skip_id=*/0);
      auto rd = ad::rowwise_dot(emb, U);
      auto r0 = ad::reshape(ad::row(emb, 2), {3});
      auto st = ad::stack_rows<double>({r0, r0});
      return ad::add(ad::sum_all(ad::sigmoid(rd)), ad::mean_all(st));
    };
    auto rep = ad::grad_check(build, {W, U}, 1e-5, 1e-4);
    CHECK(rep.pass);
  }
  // PAD-style skipped rows receive no gradient
  auto W = Tensor<double>::param({3, 2}, {1, 1, 1, 1, 1, 1});
  auto emb = ad::gather_rows(W, {0, 1}, 0);
  CHECK(emb.values()[0] == 0.0);  // skipped row reads as zero
  CHECK(emb.values()[1] == 0.0);
  auto loss = ad::sum_all(emb);
  ad::backward(loss);
  CHECK(W.grad()[0] == 0.0);
  CHECK(W.grad()[1] == 0.0);
  CHECK(W.grad()[2] == 1.0);
}

TEST_CASE("softmax rows sum to 1 and masked positions get exactly zero") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    int rows = 1 + int(rng.uniform_int(4));
    int cols = 2 + int(rng.uniform_int(6));
    std::vector<uint8_t> mask(size_t(cols), 0);
    int live = 1 + int(rng.uniform_int(cols));
    for (int i = 0; i < live; ++i) mask[size_t(i)] = 1;
    rng.shuffle(mask);
    bool any = false;
    for (auto m : mask) any = any || m;
    if (!any) mask[0] = 1;
    auto X = Tensor<double>::from_values(
        {rows, cols}, random_values(size_t(rows) * cols, rng, -5, 5));
    auto S = ad::softmax_lastdim(X, &mask);
    for (int i = 0; i < rows; ++i) {
      double sum = 0;
      for (int j = 0; j < cols; ++j) {
        double v = S.values()[size_t(i) * cols + j];
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (!mask[size_t(j)]) CHECK(v == 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  std::vector<uint8_t> none = {0, 0};
  auto X = Tensor<double>::from_values({2}, {1.0, 2.0});
  CHECK_THROWS_AS((void)ad::softmax_lastdim(X, &none), ValidationError);
}

TEST_CASE("backward linearity: grad of sum equals sum of grads") {
  for (uint64_t seed = 7; seed < 12; ++seed) {
    Rng rng(seed);
    auto W = Tensor<double>::param({3, 3}, random_values(9, rng));
    auto x = Tensor<double>::from_values({3, 1}, random_values(3, rng));

    auto build_a = [&]() { return ad::sum_all(ad::tanh_t(ad::matmul(W, x))); };
    auto build_b = [&]() {
      return ad::mean_all(ad::sigmoid(ad::matmul(ad::transpose(W), x)));
    };

    W.zero_grad();
    auto la = build_a();
    ad::backward(la);
    auto ga = W.grad();
    W.zero_grad();
    auto lb = build_b();
    ad::backward(lb);
    auto gb = W.grad();
    W.zero_grad();
    auto lsum = ad::add(build_a(), build_b());
    ad::backward(lsum);
    for (size_t i = 0; i < ga.size(); ++i)
      CHECK(W.grad()[i] == doctest::Approx(ga[i] + gb[i]).epsilon(1e-12));
  }
}

TEST_CASE("tape is single-use and cleared after backward") {
  auto x = Tensor<double>::param({}, {1.0});
  auto y = ad::mul(x, x);
  CHECK(y.node()->parents.size() == 2);
  ad::backward(y);
  CHECK(y.node()->parents.empty());
  CHECK(!y.node()->backward);
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("no-grad mode records nothing") {
  auto x = Tensor<double>::param({}, {1.0});
  {
    ad::NoGradGuard ng;
    auto y = ad::mul(x, x);
    CHECK(!y.requires_grad());
    CHECK(y.node()->parents.empty());
  }
  auto y2 = ad::mul(x, x);
  CHECK(y2.requires_grad());
}
