#include <cmath>
#include <cstring>

#include "doctest.h"
#include "e2emd/nn/kernels.hpp"
#include "oracles.hpp"

using namespace e2emd;
using namespace e2emd::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  const auto v = oracle::random_values(element_count(shape), seed);
  return Tensor(std::move(shape), std::vector<float>(v.begin(), v.end()));
}

oracle::Array as_array(const Tensor& t) {
  return {t.shape(), std::vector<double>(t.begin(), t.end())};
}

double max_abs_diff(const Tensor& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(double(got[i]) - want[i]));
  return worst;
}

constexpr Exec kBoth[] = {Exec::reference, Exec::parallel};

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 input and kernel sums to 9") {
  Tensor in({1, 1, 3, 3}, 1.0f), k({1, 1, 3, 3}, 1.0f), b({1}, 0.0f);
  for (Exec e : kBoth) {
    const Tensor out = conv2d_forward(in, k, b, 1, 0, e);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out[0] == 9.0f);
  }
}

TEST_CASE("conv2d: unit 1x1 kernel is the identity") {
  const Tensor in = random_tensor({2, 1, 4, 5}, 7);
  Tensor k({1, 1, 1, 1}, 1.0f), b({1}, 0.0f);
  for (Exec e : kBoth) CHECK(conv2d_forward(in, k, b, 1, 0, e) == in);
}

TEST_CASE("conv2d: strided padded case matches the loop oracle") {
  const Tensor in = random_tensor({1, 2, 5, 5}, 1);
  const Tensor k = random_tensor({3, 2, 3, 3}, 2);
  const Tensor b = random_tensor({3}, 3);
  const auto want = oracle::conv2d(as_array(in), as_array(k), as_array(b).data, 2, 1);
  for (Exec e : kBoth) {
    const Tensor out = conv2d_forward(in, k, b, 2, 1, e);
    CHECK(out.shape() == Shape{1, 3, 3, 3});
    CHECK(max_abs_diff(out, want.data) < 1e-5);
  }
}

TEST_CASE("conv2d: channel mismatch names the axes") {
  Tensor in({1, 2, 4, 4}), k({1, 3, 3, 3}), b({1});
  try {
    conv2d_forward(in, k, b, 1, 0);
    FAIL("expected DimensionError");
  } catch (const DimensionError& err) {
    CHECK(std::string(err.what()).find("axis 1") != std::string::npos);
  }
  Tensor small({1, 3, 2, 2});
  CHECK_THROWS_AS(conv2d_forward(small, k, b, 1, 0), DimensionError);
}

TEST_CASE("maxpool2d: basics, tie rule and errors") {
  Tensor in({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto res = maxpool2d_forward(in, 2, 2);
  CHECK(res.output.size() == 1);
  CHECK(res.output[0] == 4.0f);
  CHECK(res.argmax[0] == 3);

  Tensor flat({1, 1, 4, 4}, 0.5f);
  for (Exec e : kBoth) {
    auto r = maxpool2d_forward(flat, 2, 2, e);
    for (float v : r.output) CHECK(v == 0.5f);
    // First element of each window in row-major order.
    CHECK(r.argmax == std::vector<std::size_t>{0, 2, 8, 10});
  }
  CHECK_THROWS_AS(maxpool2d_forward(in, 3, 1), DimensionError);
}

TEST_CASE("maxpool2d: random 6x6 plane matches the loop oracle") {
  const Tensor in = random_tensor({1, 1, 6, 6}, 11);
  const auto want = oracle::maxpool2d(as_array(in), 2, 2);
  for (Exec e : kBoth) CHECK(max_abs_diff(maxpool2d_forward(in, 2, 2, e).output, want.data) == 0.0);
}

TEST_CASE("dense: identity, hand sum, loop oracle") {
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
  const Tensor x = random_tensor({2, 3}, 5);
  for (Exec e : kBoth) CHECK(dense_forward(x, eye, Tensor({3}), e) == x);

  Tensor in({1, 2}, std::vector<float>{1, 2}), w({2, 1}, std::vector<float>{1, 1}), b({1}, std::vector<float>{0.5f});
  CHECK(dense_forward(in, w, b)[0] == 3.5f);

  const Tensor a = random_tensor({4, 8}, 6), wr = random_tensor({8, 3}, 7), br = random_tensor({3}, 8);
  const auto want = oracle::dense(as_array(a).data, 4, 8, as_array(wr).data, 3, as_array(br).data);
  for (Exec e : kBoth) CHECK(max_abs_diff(dense_forward(a, wr, br, e), want) < 1e-5);

  CHECK_THROWS_AS(dense_forward(a, random_tensor({7, 3}, 1), br), DimensionError);
}

TEST_CASE("forward kernels match loop oracles on randomized shapes") {
  std::mt19937_64 gen(2024);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + gen() % (hi - lo + 1); };
  for (int trial = 0; trial < 120; ++trial) {
    CAPTURE(trial);
    const std::size_t n = pick(1, 3), c = pick(1, 4), o = pick(1, 5), kh = pick(1, 3), kw = pick(1, 3);
    const std::size_t s = pick(1, 2), p = pick(0, 2);
    const std::size_t h = pick(kh, 9), w = pick(kw, 9);
    const Tensor in = random_tensor({n, c, h, w}, gen());
    const Tensor k = random_tensor({o, c, kh, kw}, gen());
    const Tensor b = random_tensor({o}, gen());
    const auto conv_want = oracle::conv2d(as_array(in), as_array(k), as_array(b).data, s, p);
    for (Exec e : kBoth) CHECK(max_abs_diff(conv2d_forward(in, k, b, s, p, e), conv_want.data) < 1e-5);

    const std::size_t win = pick(1, std::min<std::size_t>(3, std::min(h, w)));
    const auto pool_want = oracle::maxpool2d(as_array(in), win, s);
    for (Exec e : kBoth) CHECK(max_abs_diff(maxpool2d_forward(in, win, s, e).output, pool_want.data) < 1e-5);

    const std::size_t f = pick(1, 70), g = pick(1, 40);
    const Tensor x = random_tensor({n, f}, gen()), wd = random_tensor({f, g}, gen()), bd = random_tensor({g}, gen());
    const auto dense_want = oracle::dense(as_array(x).data, n, f, as_array(wd).data, g, as_array(bd).data);
    for (Exec e : kBoth) CHECK(max_abs_diff(dense_forward(x, wd, bd, e), dense_want) < 1e-5);
  }
}

TEST_CASE("backward kernels: parallel path agrees with the reference path") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + gen() % 3, c = 1 + gen() % 3, o = 1 + gen() % 4, h = 3 + gen() % 6;
    const std::size_t s = 1 + gen() % 2, p = gen() % 2;
    const Tensor in = random_tensor({n, c, h, h}, gen()), k = random_tensor({o, c, 3, 3}, gen());
    const std::size_t oh = (h + 2 * p - 3) / s + 1;
    const Tensor gout = random_tensor({n, o, oh, oh}, gen());
    const auto r = conv2d_backward(in, k, gout, s, p, true, Exec::reference);
    const auto q = conv2d_backward(in, k, gout, s, p, true, Exec::parallel);
    CHECK(max_abs_diff(q.kernel, as_array(r.kernel).data) < 1e-5);
    CHECK(max_abs_diff(q.bias, as_array(r.bias).data) < 1e-5);
    CHECK(max_abs_diff(q.input, as_array(r.input).data) < 1e-5);

    const std::size_t f = 1 + gen() % 50, g = 1 + gen() % 30;
    const Tensor x = random_tensor({n, f}, gen()), w = random_tensor({f, g}, gen()), gy = random_tensor({n, g}, gen());
    const auto dr = dense_backward(x, w, gy, true, Exec::reference);
    const auto dq = dense_backward(x, w, gy, true, Exec::parallel);
    CHECK(max_abs_diff(dq.weights, as_array(dr.weights).data) < 1e-5);
    CHECK(max_abs_diff(dq.bias, as_array(dr.bias).data) < 1e-5);
    CHECK(max_abs_diff(dq.input, as_array(dr.input).data) < 1e-5);
  }
}

TEST_CASE("gemm: tile edges on both paths") {
  for (std::size_t m : {1u, 4u, 7u}) {
    for (std::size_t n : {1u, 31u, 32u, 33u, 97u}) {
      const std::size_t k = 13;
      const Tensor a = random_tensor({m, k}, m * 100 + n), b = random_tensor({k, n}, n);
      Tensor cr({m, n}), cp({m, n});
      gemm(m, n, k, a.ptr(), k, b.ptr(), n, cr.ptr(), n, false, Exec::reference);
      gemm(m, n, k, a.ptr(), k, b.ptr(), n, cp.ptr(), n, false, Exec::parallel);
      CHECK(max_abs_diff(cp, as_array(cr).data) < 1e-5);
    }
  }
}

TEST_CASE("softmax: symmetry, stability and the 64-bit formula") {
  Tensor z({1, 2}, std::vector<float>{0, 0});
  const Tensor p = softmax(z);
  CHECK(p[0] == 0.5f);
  CHECK(p[1] == 0.5f);

  Tensor big({1, 2}, std::vector<float>{1000, 0});
  const Tensor q = softmax(big);
  CHECK(q[0] == 1.0f);
  CHECK(q[1] == 0.0f);
  CHECK(q.all_finite());

  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 4, c = 2 + gen() % 6;
    const double scale = trial % 5 == 0 ? 1000.0 : 5.0;
    const auto v = oracle::random_values(n * c, gen(), -scale, scale);
    const Tensor logits({n, c}, std::vector<float>(v.begin(), v.end()));
    const Tensor probs = softmax(logits);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(logits.begin() + i * c, logits.begin() + (i + 1) * c);
      const auto want = oracle::softmax_row(row);
      double sum = 0;
      for (std::size_t j = 0; j < c; ++j) {
        sum += probs[i * c + j];
        CHECK(std::abs(probs[i * c + j] - want[j]) < 1e-6);
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
  CHECK_THROWS_AS(softmax(Tensor({2, 1})), DimensionError);
}

TEST_CASE("cross entropy: analytic values and label range") {
  Tensor half({1, 2}, std::vector<float>{0.5f, 0.5f});
  CHECK(cross_entropy_loss(half, {0}) == doctest::Approx(0.693147).epsilon(1e-6));
  Tensor onehot({2, 2}, std::vector<float>{1, 0, 0, 1});
  CHECK(cross_entropy_loss(onehot, {0, 1}) == 0.0f);

  Tensor64 rows({3, 3}, std::vector<double>{0.2, 0.3, 0.5, 0.6, 0.1, 0.3, 0.25, 0.25, 0.5});
  const double want = -(std::log(0.5) + std::log(0.6) + std::log(0.25)) / 3.0;
  CHECK(std::abs(cross_entropy_loss(rows, {2, 0, 1}) - want) < 1e-6);

  // Clamped at 1e-12 instead of diverging.
  Tensor64 wrong({1, 2}, std::vector<double>{1.0, 0.0});
  CHECK(cross_entropy_loss(wrong, {1}) == doctest::Approx(-std::log(1e-12)));

  CHECK_THROWS_AS(cross_entropy_loss(half, {2}), IndexError);
  CHECK_THROWS_AS(cross_entropy_loss(half, {-1}), IndexError);
}

TEST_CASE("upsample2d: nearest neighbour and its adjoint") {
  Tensor in({1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor up = upsample2d_forward(in, 2);
  CHECK(up.shape() == Shape{1, 1, 4, 4});
  CHECK(up[0] == 1);
  CHECK(up[3] == 2);
  CHECK(up[15] == 4);
  const Tensor back = upsample2d_backward(Tensor({1, 1, 4, 4}, 1.0f), 2);
  for (float v : back) CHECK(v == 4.0f);
}
