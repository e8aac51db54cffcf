#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sigwav/autodiff.hpp"
#include "sigwav/error.hpp"
#include "sigwav/gradcheck.hpp"

using namespace sigwav;
using doctest::Approx;

namespace {

std::vector<double> values(Var v) { return {v.value().begin(), v.value().end()}; }

Var row(Tape& t, std::vector<double> x) {
  const std::size_t n = x.size();
  return t.constant(Tensor({1, 1, n}, std::move(x)));
}

ErrorCategory category_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  FAIL("no error raised");
  return ErrorCategory::contract;
}

}  // namespace

TEST_CASE("conv1d dilated kernel") {
  Tape t;
  ConvOptions o;
  o.dilation = 2;
  auto y = conv1d(row(t, {1, 2, 3, 4, 5}), t.constant(Tensor({1, 1, 3}, {1, 0, -1})), std::nullopt, o);
  CHECK(y.shape() == Shape{1, 1, 1});
  CHECK(y.value()[0] == Approx(-4.0));
}

TEST_CASE("conv1d identity kernel") {
  Tape t;
  auto y = conv1d(row(t, {1, 2, 3}), t.constant(Tensor({1, 1, 1}, {1})), std::nullopt);
  CHECK(values(y) == std::vector<double>{1, 2, 3});
}

TEST_CASE("conv1d stride two") {
  Tape t;
  ConvOptions o;
  o.stride = 2;
  auto y = conv1d(row(t, {1, 2, 3, 4}), t.constant(Tensor({1, 1, 2}, {1, 1})), std::nullopt, o);
  CHECK(values(y) == std::vector<double>{3, 7});
}

TEST_CASE("conv1d errors") {
  Tape t;
  auto x = row(t, {1, 2});
  CHECK(category_of([&] { conv1d(x, t.constant(Tensor({1, 2, 1}, 1.0)), std::nullopt); }) ==
        ErrorCategory::dimension);
  CHECK(category_of([&] { conv1d(x, t.constant(Tensor({1, 1, 3}, 1.0)), std::nullopt); }) ==
        ErrorCategory::input_too_short);
}

TEST_CASE("conv1d matches loop oracle on random geometry") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> ext(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t B = ext(rng), C = ext(rng), K = ext(rng), S = ext(rng);
    const std::size_t stride = ext(rng) % 3 + 1, dil = ext(rng) % 3 + 1;
    const int mode = static_cast<int>(rng() % 3);
    const std::size_t pad = mode == 1 ? rng() % 3 : 0;
    const std::size_t W = dil * (S - 1) + 1 + rng() % 6;
    auto in = oracle::random_tensor({B, C, W}, rng);
    auto w = oracle::random_tensor({K, C, S}, rng);
    auto b = oracle::random_tensor({K}, rng);
    std::size_t out_w = 0;
    auto expect = oracle::conv1d(in.data, B, C, W, w.data, K, S, &b.data, stride, dil, mode, pad, out_w);
    Tape t;
    ConvOptions o;
    o.stride = stride;
    o.dilation = dil;
    if (mode == 1) o.padding = Padding::zero(pad);
    if (mode == 2) o.padding = Padding::circular();
    auto y = conv1d(t.constant(in), t.constant(w), t.constant(b), o);
    REQUIRE(y.shape() == Shape{B, K, out_w});
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y.value()[i] == Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("serial and parallel kernels agree") {
  std::mt19937_64 rng(5);
  auto a = oracle::random_tensor({7, 5}, rng), b = oracle::random_tensor({5, 6}, rng);
  std::vector<double> c1(42), c2(42);
  kernels::gemm(false, false, 7, 6, 5, a.data.data(), b.data.data(), c1.data(), false);
  kernels::serial::gemm(false, false, 7, 6, 5, a.data.data(), b.data.data(), c2.data(), false);
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == Approx(c2[i]).epsilon(1e-13));

  kernels::ConvGeometry g;
  g.batch = 2;
  g.in_channels = 3;
  g.in_width = 40;
  g.out_channels = 4;
  g.kernel = 3;
  g.dilation = 2;
  auto in = oracle::random_tensor({2, 3, 40}, rng), w = oracle::random_tensor({4, 3, 3}, rng);
  std::vector<double> o1(2 * 4 * g.out_width()), o2(o1.size());
  kernels::conv1d_forward(g, in.data.data(), w.data.data(), nullptr, o1.data());
  kernels::serial::conv1d_forward(g, in.data.data(), w.data.data(), nullptr, o2.data());
  for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1[i] == Approx(o2[i]).epsilon(1e-13));
}

TEST_CASE("pointwise values") {
  Tape t;
  auto z = t.constant(Tensor::scalar(0.0));
  CHECK(sigmoid(z).item() == 0.5);
  CHECK(tanh(z).item() == 0.0);
  CHECK(leaky_relu(t.constant(Tensor::scalar(-1.0)), 0.01).item() == Approx(-0.01));
  CHECK(category_of([&] { log(t.constant(Tensor::scalar(0.0))); }) == ErrorCategory::domain);
}

TEST_CASE("broadcast add and mul agree with scalar loops") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> ext(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    Shape full{ext(rng), ext(rng), ext(rng)};
    Shape sa = full, sb = full;
    for (std::size_t d = 0; d < 3; ++d) {
      if (rng() % 3 == 0) sa[d] = 1;
      else if (rng() % 3 == 0) sb[d] = 1;
    }
    auto a = oracle::random_tensor(sa, rng), b = oracle::random_tensor(sb, rng);
    Tape t;
    auto s = add(t.constant(a), t.constant(b));
    auto m = mul(t.constant(a), t.constant(b));
    Shape out{std::max(sa[0], sb[0]), std::max(sa[1], sb[1]), std::max(sa[2], sb[2])};
    REQUIRE(s.shape() == out);
    std::size_t i = 0;
    for (std::size_t x = 0; x < out[0]; ++x)
      for (std::size_t y = 0; y < out[1]; ++y)
        for (std::size_t z = 0; z < out[2]; ++z, ++i) {
          auto ia = ((x % sa[0]) * sa[1] + (y % sa[1])) * sa[2] + (z % sa[2]);
          auto ib = ((x % sb[0]) * sb[1] + (y % sb[1])) * sb[2] + (z % sb[2]);
          CHECK(s.value()[i] == a.data[ia] + b.data[ib]);
          CHECK(m.value()[i] == a.data[ia] * b.data[ib]);
        }
  }
}

TEST_CASE("matmul") {
  Tape t;
  auto id = t.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  CHECK(values(matmul(id, t.constant(Tensor({2, 1}, {3, 4})))) == std::vector<double>{3, 4});
  CHECK(matmul(t.constant(Tensor({1, 2}, {1, 2})), t.constant(Tensor({2, 1}, {3, 4}))).item() == 11.0);
  CHECK(category_of([&] { matmul(id, t.constant(Tensor({3, 1}, 1.0))); }) == ErrorCategory::dimension);

  std::mt19937_64 rng(2);
  auto a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 2}, rng);
  auto c = matmul(t.constant(a), t.constant(b));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += a.data[i * 4 + k] * b.data[k * 2 + j];
      CHECK(c.value()[i * 2 + j] == Approx(acc).epsilon(1e-14));
    }
}

TEST_CASE("reductions") {
  Tape t;
  CHECK(sum(t.constant(Tensor({3}, {1, 2, 3})), 0).item() == 6.0);
  CHECK(mean(t.constant(Tensor({2}, {2, 4})), 0).item() == 3.0);
  CHECK(values(sum(t.constant(Tensor({2, 2}, {1, 2, 3, 4})), 1)) == std::vector<double>{3, 7});
  CHECK(category_of([&] { sum(t.constant(Tensor({2}, 1.0)), 1); }) == ErrorCategory::dimension);
}

TEST_CASE("softmax family") {
  Tape t;
  CHECK(values(softmax(t.constant(Tensor({2}, {0, 0})), 0)) == std::vector<double>{0.5, 0.5});
  auto ls = values(log_softmax(t.constant(Tensor({2}, {0, 0})), 0));
  CHECK(ls[0] == Approx(-std::log(2.0)));
  CHECK(ls[1] == Approx(-std::log(2.0)));
  CHECK(values(softmax(t.constant(Tensor({2}, {1000, 1000})), 0)) == std::vector<double>{0.5, 0.5});

  std::mt19937_64 rng(4);
  auto x = oracle::random_tensor({3, 5}, rng, -20, 20);
  auto s = softmax(t.constant(x), 1);
  auto l = log_softmax(t.constant(x), 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double acc = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      acc += s.value()[r * 5 + c];
      CHECK(std::exp(l.value()[r * 5 + c]) == Approx(s.value()[r * 5 + c]).epsilon(1e-12));
    }
    CHECK(std::abs(acc - 1.0) < 1e-9);
  }
}

TEST_CASE("instance norm") {
  Tape t;
  auto g1 = t.constant(Tensor({1}, 1.0)), b0 = t.constant(Tensor({1}, 0.0));
  auto y = values(instance_norm(row(t, {1, 2, 3}), g1, b0));
  CHECK(y[0] == Approx(-1.22473569).epsilon(1e-8));
  CHECK(y[1] == Approx(0.0));
  CHECK(y[2] == Approx(1.22473569).epsilon(1e-8));
  CHECK(values(instance_norm(row(t, {4, 4, 4}), g1, b0)) == std::vector<double>{0, 0, 0});
  auto five = values(instance_norm(row(t, {1, 7, -2}), t.constant(Tensor({1}, 0.0)),
                                   t.constant(Tensor({1}, 5.0))));
  CHECK(five == std::vector<double>{5, 5, 5});
  auto single = values(instance_norm(row(t, {3}), g1, b0));
  CHECK(std::isfinite(single[0]));
}

TEST_CASE("backward") {
  Tape t;
  auto x = t.leaf(Tensor({2, 3}, 0.7));
  t.backward(sum_all(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  Tape t2;
  auto y = t2.leaf(Tensor({1}, {3.0}));
  t2.backward(sum_all(mul(y, y)));
  CHECK(y.grad()[0] == 6.0);

  Parameter p("p", Tensor({1}, {3.0}));
  for (int i = 0; i < 2; ++i) {
    Tape tp;
    auto v = tp.param(p);
    tp.backward(sum_all(mul(v, v)));
  }
  CHECK(p.grad[0] == 12.0);

  Tape t3;
  auto z = t3.leaf(Tensor({2}, 1.0));
  CHECK(category_of([&] { t3.backward(z); }) == ErrorCategory::contract);
}

TEST_CASE("forward values are bit-identical across tapes") {
  std::mt19937_64 rng(9);
  auto x = oracle::random_tensor({2, 3, 16}, rng), w = oracle::random_tensor({4, 3, 3}, rng);
  auto run = [&] {
    Tape t;
    auto y = tanh(conv1d(t.constant(x), t.constant(w), std::nullopt));
    return values(softmax(y, 2));
  };
  CHECK(run() == run());
}

TEST_CASE("gradient suite stays under tolerance") {
  auto reports = gradcheck_suite(1234);
  CHECK(reports.size() >= 40);
  for (const auto& r : reports) {
    INFO(r.op);
    CHECK(r.entries > 0);
    CHECK(r.max_rel_error < kGradcheckTolerance);
  }
}
