#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sigwav/error.hpp"
#include "sigwav/training.hpp"
#include "sigwav/wavelet.hpp"

using namespace sigwav;
using namespace sigwav::wavelet;
using doctest::Approx;

namespace {

// db10 low-pass taps from an mpmath spectral factorization
// (tests/oracles/db10_spectral.py), smallest leading tap first.
const double kDb10Oracle[20] = {
    -0.000013264202894521244812, 0.000093588670320069591334, -0.00011646685512928545095,
    -0.00068585669495971162656,  0.0019924052951850561172,   0.0013953517470529011658,
    -0.010733175483330575044,    0.0036065535669561696554,   0.03321267405934100174,
    -0.029457536821875812858,    -0.071394147166397087145,   0.09305736460357235116,
    0.12736934033579326008,      -0.1959462743773770435,     -0.24984642432731537942,
    0.28117234366057746075,      0.68845903945360356574,     0.52720118893172558648,
    0.18817680007769148902,      0.026670057900555553587};

double energy(std::span<const double> x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

struct Cascade {
  std::vector<Tensor> details;
  Tensor approx;
};

Cascade cascade(const Tensor& signal, const Tensor& h, const Tensor& g, std::size_t levels) {
  Tape t;
  Cascade c;
  Var a = t.constant(signal);
  for (std::size_t j = 0; j < levels; ++j) {
    auto [an, dn] = decompose_level(a, t.constant(h), t.constant(g));
    c.details.push_back(dn.tensor());
    a = an;
  }
  c.approx = a.tensor();
  return c;
}

}  // namespace

TEST_CASE("db10 orthonormality and reference table") {
  Tensor h = init_daubechies(10);
  REQUIRE(h.size() == 20);
  double s = 0, s2 = 0;
  for (double v : h.data) {
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s - std::sqrt(2.0)) < 1e-10);
  CHECK(std::abs(s2 - 1.0) < 1e-10);
  for (std::size_t k = 1; k < 10; ++k) {
    double acc = 0;
    for (std::size_t n = 0; n + 2 * k < 20; ++n) acc += h[n] * h[n + 2 * k];
    CHECK(std::abs(acc) < 1e-10);
  }
  for (std::size_t n = 0; n < 20; ++n) CHECK(std::abs(h[n] - kDb10Oracle[19 - n]) < 1e-8);
  CHECK_THROWS_AS(init_daubechies(7), Error);
}

TEST_CASE("derive_cqf") {
  auto g = derive_cqf(Tensor({2}, {0.7071, 0.7071}));
  CHECK(g[0] == Approx(0.7071));
  CHECK(g[1] == Approx(-0.7071));
  auto g4 = derive_cqf(Tensor({4}, {1, 0, 0, 0}));
  CHECK(g4.data == std::vector<double>{0, 0, 0, -1});

  auto gd = derive_cqf(init_daubechies(10));
  double sg = 0;
  for (double v : gd.data) sg += v;
  CHECK(std::abs(sg) < 1e-10);

  try {
    derive_cqf(Tensor({3}, 1.0));
    FAIL("odd length accepted");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::config);
  }
}

TEST_CASE("CQF orthogonality for random even-length filters") {
  std::mt19937_64 rng(21);
  for (std::size_t K : {2u, 4u, 8u, 20u}) {
    auto h = oracle::random_tensor({K}, rng);
    auto g = derive_cqf(h);
    for (long k = -static_cast<long>(K); k <= static_cast<long>(K); ++k) {
      double acc = 0;
      for (long n = 0; n < static_cast<long>(K); ++n) {
        long m = n - 2 * k;
        if (m >= 0 && m < static_cast<long>(K)) acc += h[n] * g[m];
      }
      CHECK(std::abs(acc) < 1e-12);
    }
  }
}

TEST_CASE("decompose_level Haar") {
  Tensor h = init_daubechies(1), g = derive_cqf(h);
  Tape t;
  auto [a1, d1] = decompose_level(t.constant(Tensor({1, 1, 4}, 1.0)), t.constant(h), t.constant(g));
  CHECK(a1.value()[0] == Approx(std::sqrt(2.0)));
  CHECK(a1.value()[1] == Approx(std::sqrt(2.0)));
  CHECK(d1.value()[0] == Approx(0.0));
  CHECK(d1.value()[1] == Approx(0.0));
  auto [a2, d2] = decompose_level(t.constant(Tensor({1, 1, 4}, {1, -1, 1, -1})), t.constant(h),
                                  t.constant(g));
  CHECK(a2.value()[0] == Approx(0.0));
  CHECK(a2.value()[1] == Approx(0.0));
  CHECK(d2.value()[0] == Approx(std::sqrt(2.0)));
  CHECK(d2.value()[1] == Approx(std::sqrt(2.0)));

  try {
    decompose_level(t.constant(Tensor({1, 1, 1}, 1.0)), t.constant(h), t.constant(g));
    FAIL("width 1 accepted");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::input_too_short);
  }
}

TEST_CASE("energy partition per level") {
  std::mt19937_64 rng(8);
  Tensor h = init_daubechies(10), g = derive_cqf(h);
  for (std::size_t W : {64u, 256u, 1024u}) {
    auto x = oracle::random_tensor({1, 1, W}, rng);
    Tape t;
    auto [a, d] = decompose_level(t.constant(x), t.constant(h), t.constant(g));
    CHECK(std::abs(energy(a.value()) + energy(d.value()) - energy(x.data)) < 1e-8);
  }
}

TEST_CASE("perfect reconstruction, db10, lengths 2^9..2^12, levels 1..5") {
  std::mt19937_64 rng(77);
  Tensor h = init_daubechies(10), g = derive_cqf(h);
  for (std::size_t W = 512; W <= 4096; W *= 2)
    for (std::size_t L = 1; L <= 5; ++L) {
      auto x = oracle::random_tensor({1, 1, W}, rng);
      auto c = cascade(x, h, g, L);
      std::vector<FilterPair> filters(L, FilterPair{h, g});
      auto y = reconstruct(c.details, c.approx, filters, W);
      double err = 0;
      for (std::size_t i = 0; i < W; ++i) err = std::max(err, std::abs(y[i] - x[i]));
      CHECK(err < 1e-6);
    }
}

TEST_CASE("Haar round trip and zero bands") {
  std::mt19937_64 rng(78);
  Tensor h = init_daubechies(1), g = derive_cqf(h);
  auto x = oracle::random_tensor({1, 1, 1024}, rng);
  auto c = cascade(x, h, g, 3);
  std::vector<FilterPair> filters(3, FilterPair{h, g});
  auto y = reconstruct(c.details, c.approx, filters, 1024);
  for (std::size_t i = 0; i < 1024; ++i) CHECK(std::abs(y[i] - x[i]) < 1e-10);

  std::vector<Tensor> zd{Tensor({1, 1, 512}), Tensor({1, 1, 256}), Tensor({1, 1, 128})};
  auto z = reconstruct(zd, Tensor({1, 1, 128}), filters, 1024);
  for (double v : z.data) CHECK(v == 0.0);

  std::vector<FilterPair> two(2, FilterPair{h, g});
  CHECK_THROWS_AS(reconstruct(c.details, c.approx, two, 1024), Error);
}

TEST_CASE("front-end widths, zero signal and minimum length") {
  FrontEndConfig cfg;
  cfg.levels = 3;
  FrontEnd fe(cfg);
  Tape t;
  auto out = fe.forward(t, t.constant(Tensor({1, 1, 1024}, 0.0)));
  REQUIRE(out.details.size() == 3);
  CHECK(out.details[0].shape()[2] == 512);
  CHECK(out.details[1].shape()[2] == 256);
  CHECK(out.details[2].shape()[2] == 128);
  CHECK(out.approximation.shape()[2] == 128);
  for (const auto& b : out.bands())
    for (double v : b.value()) CHECK(v == 0.0);

  try {
    fe.forward(t, t.constant(Tensor({1, 1, 100}, 0.0)));
    FAIL("short input accepted");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::input_too_short);
    CHECK(std::string(e.what()).find("160") != std::string::npos);
  }
}

TEST_CASE("odd widths extend by one sample") {
  FrontEndConfig cfg;
  cfg.levels = 2;
  cfg.kernel_size = 2;
  cfg.sharing = Sharing::db10_fixed;
  cfg.laht_enabled = false;
  FrontEnd fe(cfg);
  Tape t;
  auto out = fe.forward(t, t.constant(Tensor({1, 1, 11}, 1.0)));
  CHECK(out.details[0].shape()[2] == 6);
  CHECK(out.details[1].shape()[2] == 3);
}

TEST_CASE("db10_fixed front-end round trip") {
  std::mt19937_64 rng(5);
  FrontEndConfig cfg;
  cfg.levels = 5;
  cfg.sharing = Sharing::db10_fixed;
  cfg.laht_enabled = false;
  FrontEnd fe(cfg);
  auto x = oracle::random_tensor({1, 1, 2048}, rng);
  Tape t;
  auto out = fe.forward(t, t.constant(x));
  auto y = reconstruct(out, fe.effective_filters(), 2048);
  for (std::size_t i = 0; i < 2048; ++i) CHECK(std::abs(y.value()[i] - x[i]) < 1e-6);
  CHECK(fe.parameters().empty());
}

TEST_CASE("LAHT values") {
  CHECK(laht_value(0.0, -10, 10, 0.01, 0.01) == 0.0);
  for (double x : {-3.0, -0.2, 0.0, 0.4, 2.5})
    CHECK(std::abs(laht_value(x, -7.0, 7.0, 0.0, 0.0) - x) < 1e-12);
  const double big = laht_value(3.0, -50, 50, 1, 1);
  CHECK(big >= 2.99);
  CHECK(big <= 3.0);
  const double mid = laht_value(0.5, -50, 50, 1, 1);
  CHECK(mid >= 0.0);
  CHECK(mid <= 1e-6);
  const double neg = laht_value(-3.0, -50, 50, 1, 1);
  CHECK(neg >= -3.0);
  CHECK(neg <= -2.99);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5), pos(0.01, 3);
  for (int i = 0; i < 1000; ++i) {
    // The magnitude bound needs matched sharpness, alpha = -beta.
    const double x = u(rng), b = pos(rng) * 10;
    const double y = laht_value(x, -b, b, pos(rng), pos(rng));
    CHECK(std::abs(y) <= std::abs(x) * (1 + 1e-9));
    CHECK((y * x >= 0 || std::abs(y) < 1e-12));
  }
}

TEST_CASE("LAHT node matches scalar form") {
  Tape t;
  LahtVars p{t.constant(Tensor::scalar(-4.0)), t.constant(Tensor::scalar(6.0)),
             t.constant(Tensor::scalar(0.3)), t.constant(Tensor::scalar(0.2))};
  auto y = laht(t.constant(Tensor({5}, {-2, -0.1, 0, 0.25, 1.5})), p);
  const double xs[] = {-2, -0.1, 0, 0.25, 1.5};
  for (int i = 0; i < 5; ++i) CHECK(y.value()[i] == Approx(laht_value(xs[i], -4, 6, 0.3, 0.2)).epsilon(1e-14));
}

TEST_CASE("LAHT reparameterization keeps its constraints under Adam") {
  auto p = LahtParams::initial("x");
  CHECK(p.alpha() == Approx(-10.0));
  CHECK(p.beta() == Approx(10.0));
  CHECK(p.bias_pos() == Approx(0.01));
  std::vector<Parameter*> ps{&p.raw_alpha, &p.raw_beta, &p.raw_bias_pos, &p.raw_bias_neg};
  training::AdamState st;
  st.cfg.lr = 0.5;
  for (int step = 0; step < 200; ++step) {
    for (auto* q : ps) q->zero_grad();
    Tape t;
    auto v = p.effective(t);
    // Drives alpha and beta toward zero and biases toward zero.
    auto loss = add(add(mul(v.alpha, v.alpha), mul(v.beta, v.beta)),
                    add(v.bias_pos, v.bias_neg));
    t.backward(sum_all(loss));
    training::adam_step(ps, st);
    CHECK(p.alpha() < 0);
    CHECK(p.beta() > 0);
    CHECK(p.bias_pos() > 0);
    CHECK(p.bias_neg() > 0);
  }
}

TEST_CASE("shared low-pass filter steers the high-pass output") {
  FrontEndConfig cfg;
  cfg.levels = 1;
  cfg.sharing = Sharing::single_kernel;
  cfg.laht_enabled = false;
  FrontEnd fe(cfg);
  REQUIRE(fe.learnable_filter_count() == 1);
  std::mt19937_64 rng(4);
  auto x = oracle::random_tensor({1, 1, 64}, rng);
  Tape t;
  auto out = fe.forward(t, t.constant(x));
  t.backward(sum_all(mul(out.details[0], out.details[0])));
  auto* h = fe.parameters()[0];
  double norm = 0;
  for (double g : h->grad.data) norm += g * g;
  CHECK(norm > 0);
}
