#include "sigwav/wavelet.hpp"

#include <array>
#include <bit>
#include <cmath>

#include "sigwav/error.hpp"

namespace sigwav::wavelet {

namespace {

// Daubechies-10 reconstruction low-pass taps (published table).
constexpr std::array<double, 20> kDb10 = {
    0.026670057900950818,   0.18817680007762133,    0.5272011889309198,
    0.6884590394525921,     0.2811723436604265,     -0.24984642432648865,
    -0.19594627437659665,   0.12736934033574265,    0.09305736460380659,
    -0.07139414716586077,   -0.029457536821945671,  0.03321267405893324,
    0.0036065535669883944,  -0.010733175482979604,  0.0013953517469940798,
    0.00199240529499085,    -0.0006858566950046825, -0.0001164668549943862,
    9.358867000108985e-05,  -1.326420300235487e-05,
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double inverse_softplus(double y) { return std::log(std::expm1(y)); }

}  // namespace

std::string to_string(Sharing s) {
  switch (s) {
    case Sharing::db10_fixed: return "db10_fixed";
    case Sharing::single_kernel: return "single_kernel";
    case Sharing::layer_wise: return "layer_wise";
    case Sharing::all_kernel: return "all_kernel";
  }
  return "?";
}

Sharing parse_sharing(const std::string& s) {
  if (s == "db10_fixed") return Sharing::db10_fixed;
  if (s == "single_kernel") return Sharing::single_kernel;
  if (s == "layer_wise") return Sharing::layer_wise;
  if (s == "all_kernel") return Sharing::all_kernel;
  fail(ErrorCategory::config, "unknown filter sharing mode '" + s + "'");
}

std::size_t minimum_length(const FrontEndConfig& cfg) {
  return (std::size_t{1} << cfg.levels) * cfg.kernel_size;
}

std::size_t max_levels_for(std::size_t shortest_input, std::size_t kernel_size) {
  if (shortest_input < 2 || kernel_size < 1) return 0;
  const std::size_t floor_log = std::bit_width(shortest_input) - 1;
  const std::size_t ceil_log = std::bit_width(kernel_size - 1);
  return floor_log > ceil_log ? floor_log - ceil_log : 0;
}

Tensor init_daubechies(int order) {
  switch (order) {
    case 1: {
      const double v = 1.0 / std::sqrt(2.0);
      return Tensor({2}, {v, v});
    }
    case 2: {
      const double s3 = std::sqrt(3.0), d = 4.0 * std::sqrt(2.0);
      return Tensor({4}, {(1 + s3) / d, (3 + s3) / d, (3 - s3) / d, (1 - s3) / d});
    }
    case 10: return Tensor({20}, std::vector<double>(kDb10.begin(), kDb10.end()));
    default: fail(ErrorCategory::config, "unsupported Daubechies order " + std::to_string(order));
  }
}

Tensor derive_cqf(const Tensor& h) {
  const std::size_t k = h.size();
  require(h.rank() == 1 && k % 2 == 0, ErrorCategory::config,
          "derive_cqf: filter length must be even, got " + std::to_string(k));
  Tensor g({k});
  for (std::size_t n = 0; n < k; ++n) g[n] = (n % 2 ? -1.0 : 1.0) * h[k - 1 - n];
  return g;
}

Var derive_cqf(Var h) {
  const std::size_t k = h.size();
  require(h.shape().size() == 1 && k % 2 == 0, ErrorCategory::config,
          "derive_cqf: filter length must be even, got " + std::to_string(k));
  Tensor signs({k});
  for (std::size_t n = 0; n < k; ++n) signs[n] = n % 2 ? -1.0 : 1.0;
  return mul(reverse(h, 0), h.tape().constant(std::move(signs)));
}

Var circular_extend_to_even(Var a) {
  const std::size_t w = a.shape().back();
  if (w % 2 == 0) return a;
  const std::array<Var, 2> parts{a, slice(a, a.shape().size() - 1, 0, 1)};
  return concat(parts, a.shape().size() - 1);
}

std::pair<Var, Var> decompose_level(Var a, Var h, Var g) {
  const Shape& s = a.shape();
  require(s.size() == 3 && s[1] == 1, ErrorCategory::dimension,
          "decompose_level: expected [B,1,W], got " + sigwav::to_string(s));
  require(s[2] >= 2, ErrorCategory::input_too_short,
          "decompose_level: width " + std::to_string(s[2]) + " < 2");
  require(s[2] % 2 == 0, ErrorCategory::dimension,
          "decompose_level: width must be even, got " + std::to_string(s[2]));
  require(h.size() == g.size(), ErrorCategory::dimension,
          "decompose_level: filter lengths differ");
  const std::size_t k = h.size();
  require(s[2] >= k, ErrorCategory::input_too_short,
          "decompose_level: width " + std::to_string(s[2]) + " shorter than filter length " +
              std::to_string(k));
  ConvOptions opt;
  opt.stride = 2;
  opt.padding = Padding::circular();
  Var a_next = conv1d(a, reshape(h, {1, 1, k}), std::nullopt, opt);
  Var d_next = conv1d(a, reshape(g, {1, 1, k}), std::nullopt, opt);
  return {a_next, d_next};
}

// ---- LAHT ----------------------------------------------------------------------

double laht_value(double x, double alpha, double beta, double bias_pos, double bias_neg) {
  return x * (sigmoid(alpha * (x + bias_neg)) + sigmoid(beta * (x - bias_pos)));
}

Var laht(Var x, const LahtVars& p) {
  for (const Var* v : {&p.alpha, &p.beta, &p.bias_pos, &p.bias_neg})
    require(v->size() == 1, ErrorCategory::dimension, "laht: parameters must be scalars");
  const double a = p.alpha.item(), b = p.beta.item();
  const double bp = p.bias_pos.item(), bn = p.bias_neg.item();
  const auto xv = x.value();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = laht_value(xv[i], a, b, bp, bn);
  return x.tape().record(
      "laht", x.shape(), std::move(y),
      {x.id(), p.alpha.id(), p.beta.id(), p.bias_pos.id(), p.bias_neg.id()},
      [](Tape& t, std::size_t self) {
        auto& n = t.node(self);
        const auto& xv = t.node(n.parents[0]).value;
        const double a = t.node(n.parents[1]).value[0];
        const double b = t.node(n.parents[2]).value[0];
        const double bp = t.node(n.parents[3]).value[0];
        const double bn = t.node(n.parents[4]).value[0];
        auto gx = t.parent_grad(self, 0);
        double ga = 0, gb = 0, gbp = 0, gbn = 0;
        for (std::size_t i = 0; i < xv.size(); ++i) {
          const double x = xv[i], g = n.grad[i];
          const double s1 = sigmoid(a * (x + bn));
          const double s2 = sigmoid(b * (x - bp));
          const double d1 = s1 * (1.0 - s1), d2 = s2 * (1.0 - s2);
          if (!gx.empty()) gx[i] += g * (s1 + s2 + x * (d1 * a + d2 * b));
          ga += g * x * d1 * (x + bn);
          gbn += g * x * d1 * a;
          gb += g * x * d2 * (x - bp);
          gbp -= g * x * d2 * b;
        }
        const double grads[4] = {ga, gb, gbp, gbn};
        for (std::size_t slot = 1; slot <= 4; ++slot) {
          auto gp = t.parent_grad(self, slot);
          if (!gp.empty()) gp[0] += grads[slot - 1];
        }
      });
}

LahtParams LahtParams::initial(const std::string& prefix) {
  LahtParams p;
  p.raw_alpha = Parameter(prefix + ".raw_alpha", Tensor::scalar(std::log(10.0)));
  p.raw_beta = Parameter(prefix + ".raw_beta", Tensor::scalar(std::log(10.0)));
  p.raw_bias_pos = Parameter(prefix + ".raw_bias_pos", Tensor::scalar(inverse_softplus(0.01)));
  p.raw_bias_neg = Parameter(prefix + ".raw_bias_neg", Tensor::scalar(inverse_softplus(0.01)));
  return p;
}

LahtVars LahtParams::effective(Tape& tape) {
  return {neg(exp(tape.param(raw_alpha))), exp(tape.param(raw_beta)),
          softplus(tape.param(raw_bias_pos)), softplus(tape.param(raw_bias_neg))};
}

double LahtParams::alpha() const { return -std::exp(raw_alpha.value[0]); }
double LahtParams::beta() const { return std::exp(raw_beta.value[0]); }
double LahtParams::bias_pos() const { return softplus(raw_bias_pos.value[0]); }
double LahtParams::bias_neg() const { return softplus(raw_bias_neg.value[0]); }

// ---- front-end -----------------------------------------------------------------

std::vector<Var> DecompositionOutput::bands() const {
  std::vector<Var> out = details;
  out.push_back(approximation);
  return out;
}

FrontEnd::FrontEnd(FrontEndConfig cfg) : cfg_(cfg) {
  require(cfg_.levels >= 1, ErrorCategory::config, "front-end needs at least one level");
  require(cfg_.kernel_size >= 2 && cfg_.kernel_size % 2 == 0, ErrorCategory::config,
          "front-end kernel size must be even, got " + std::to_string(cfg_.kernel_size));
  require(cfg_.levels < 24, ErrorCategory::config, "front-end level count too large");
  const int order = static_cast<int>(cfg_.kernel_size / 2);
  require(order == 1 || order == 2 || order == 10, ErrorCategory::config,
          "no Daubechies initialization for kernel size " + std::to_string(cfg_.kernel_size));
  fixed_h_ = init_daubechies(order);
  fixed_g_ = derive_cqf(fixed_h_);

  const std::size_t L = cfg_.levels;
  switch (cfg_.sharing) {
    case Sharing::db10_fixed: break;
    case Sharing::single_kernel: lowpass_.emplace_back("frontend.h", fixed_h_); break;
    case Sharing::layer_wise:
      for (std::size_t j = 0; j < L; ++j)
        lowpass_.emplace_back("frontend.h" + std::to_string(j), fixed_h_);
      break;
    case Sharing::all_kernel:
      for (std::size_t j = 0; j < L; ++j) {
        lowpass_.emplace_back("frontend.h" + std::to_string(j), fixed_h_);
        highpass_.emplace_back("frontend.g" + std::to_string(j), fixed_g_);
      }
      break;
  }
  if (cfg_.laht_enabled)
    for (std::size_t j = 0; j < L; ++j)
      laht_.push_back(LahtParams::initial("frontend.laht" + std::to_string(j)));
}

std::vector<Parameter*> FrontEnd::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : lowpass_) out.push_back(&p);
  for (auto& p : highpass_) out.push_back(&p);
  for (auto& l : laht_)
    for (Parameter* p : {&l.raw_alpha, &l.raw_beta, &l.raw_bias_pos, &l.raw_bias_neg})
      out.push_back(p);
  return out;
}

std::pair<Var, Var> FrontEnd::level_filters(Tape& tape, std::size_t level) {
  switch (cfg_.sharing) {
    case Sharing::db10_fixed: return {tape.constant(fixed_h_), tape.constant(fixed_g_)};
    case Sharing::single_kernel: {
      Var h = tape.param(lowpass_[0]);
      return {h, derive_cqf(h)};
    }
    case Sharing::layer_wise: {
      Var h = tape.param(lowpass_[level]);
      return {h, derive_cqf(h)};
    }
    case Sharing::all_kernel:
      return {tape.param(lowpass_[level]), tape.param(highpass_[level])};
  }
  fail(ErrorCategory::config, "unknown sharing mode");
}

std::vector<FilterPair> FrontEnd::effective_filters() const {
  std::vector<FilterPair> out;
  for (std::size_t j = 0; j < cfg_.levels; ++j) {
    switch (cfg_.sharing) {
      case Sharing::db10_fixed: out.push_back({fixed_h_, fixed_g_}); break;
      case Sharing::single_kernel:
        out.push_back({lowpass_[0].value, derive_cqf(lowpass_[0].value)});
        break;
      case Sharing::layer_wise:
        out.push_back({lowpass_[j].value, derive_cqf(lowpass_[j].value)});
        break;
      case Sharing::all_kernel: out.push_back({lowpass_[j].value, highpass_[j].value}); break;
    }
  }
  return out;
}

DecompositionOutput FrontEnd::forward(Tape& tape, Var signal) {
  const Shape& s = signal.shape();
  require(s.size() == 3 && s[1] == 1, ErrorCategory::dimension,
          "front-end: expected signal [B,1,W], got " + sigwav::to_string(s));
  const std::size_t min_len = minimum_length();
  require(s[2] >= min_len, ErrorCategory::input_too_short,
          "front-end: input of " + std::to_string(s[2]) + " samples is shorter than the " +
              std::to_string(cfg_.levels) + "-level minimum of " + std::to_string(min_len));

  DecompositionOutput out;
  Var a = signal;
  for (std::size_t j = 0; j < cfg_.levels; ++j) {
    a = circular_extend_to_even(a);
    auto [h, g] = level_filters(tape, j);
    auto [a_next, d_next] = decompose_level(a, h, g);
    if (cfg_.laht_enabled) {
      const LahtVars p = laht_[j].effective(tape);
      d_next = laht(d_next, p);
      if (j + 1 < cfg_.levels || cfg_.laht_final_approx) a_next = laht(a_next, p);
    }
    out.details.push_back(d_next);
    a = a_next;
  }
  out.approximation = a;
  return out;
}

// ---- reconstruction --------------------------------------------------------------

Tensor reconstruct(const std::vector<Tensor>& details, const Tensor& approximation,
                   const std::vector<FilterPair>& filters, std::size_t signal_length) {
  const std::size_t L = details.size();
  require(filters.size() == L, ErrorCategory::dimension,
          "reconstruct: " + std::to_string(L) + " detail bands but " +
              std::to_string(filters.size()) + " filter levels");
  std::vector<std::size_t> widths{signal_length};
  for (std::size_t j = 0; j < L; ++j) widths.push_back((widths.back() + 1) / 2);
  require(approximation.size() == widths[L], ErrorCategory::dimension,
          "reconstruct: approximation width does not match the signal length");

  std::vector<double> a(approximation.data);
  for (std::size_t j = L; j-- > 0;) {
    const auto& d = details[j].data;
    const std::size_t half = widths[j + 1];
    require(d.size() == half && a.size() == half, ErrorCategory::dimension,
            "reconstruct: band width mismatch at level " + std::to_string(j + 1));
    const auto& h = filters[j].lowpass.data;
    const auto& g = filters[j].highpass.data;
    const std::size_t w = 2 * half;
    std::vector<double> x(w, 0.0);
    for (std::size_t p = 0; p < half; ++p)
      for (std::size_t n = 0; n < h.size(); ++n) x[(2 * p + n) % w] += h[n] * a[p] + g[n] * d[p];
    x.resize(widths[j]);
    a = std::move(x);
  }
  return Tensor({1, 1, signal_length}, std::move(a));
}

Var reconstruct(const DecompositionOutput& bands, const std::vector<FilterPair>& filters,
                std::size_t signal_length) {
  std::vector<Tensor> details;
  for (const auto& d : bands.details) details.push_back(Tensor({d.size()}, {d.value().begin(), d.value().end()}));
  const auto& av = bands.approximation.value();
  Tensor approx({av.size()}, {av.begin(), av.end()});
  Tape& tape = bands.approximation.tape();
  return tape.constant(reconstruct(details, approx, filters, signal_length));
}

}  // namespace sigwav::wavelet
