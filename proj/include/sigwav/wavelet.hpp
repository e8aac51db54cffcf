#pragma once

// Learnable fast discrete wavelet transform front-end.
//
// Each level correlates the current approximation with a low-pass filter h
// and a high-pass filter g at stride 2 under periodic extension:
//
//   a_next[p] = sum_n h[n] * a[(2p + n) mod W]
//   d_next[p] = sum_n g[n] * a[(2p + n) mod W]
//
// and recurses on a_next. Odd widths are first extended by one sample
// (a[0] appended). Bands come out high-frequency first: d_1 ... d_L, a_L.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sigwav/autodiff.hpp"

namespace sigwav::wavelet {

enum class Sharing { db10_fixed, single_kernel, layer_wise, all_kernel };

std::string to_string(Sharing s);
Sharing parse_sharing(const std::string& s);

struct FrontEndConfig {
  std::size_t levels = 8;
  std::size_t kernel_size = 20;
  Sharing sharing = Sharing::all_kernel;
  bool laht_enabled = true;
  // Threshold the final approximation a_L as well as every detail band.
  bool laht_final_approx = true;
};

// Smallest accepted input width: 2^levels * kernel_size.
std::size_t minimum_length(const FrontEndConfig& cfg);
// Largest L the config invariant allows for a given shortest input:
// floor(log2(len)) - ceil(log2(K)).
std::size_t max_levels_for(std::size_t shortest_input, std::size_t kernel_size);

// Orthonormal Daubechies low-pass filter with `order` vanishing moments
// (1 = Haar, 2, 10). Sum of taps is sqrt(2), sum of squares is 1.
Tensor init_daubechies(int order);

// g[n] = (-1)^n * h[K-1-n]; K must be even.
Tensor derive_cqf(const Tensor& h);
Var derive_cqf(Var h);

// a [B,1,W] with W even -> (a_next, d_next), each [B,1,W/2].
std::pair<Var, Var> decompose_level(Var a, Var h, Var g);

// Appends a[..., 0] when the width is odd.
Var circular_extend_to_even(Var a);

// ---- LAHT --------------------------------------------------------------------

// x * [S(alpha*(x + bias_neg)) + S(beta*(x - bias_pos))]
double laht_value(double x, double alpha, double beta, double bias_pos, double bias_neg);

// Effective LAHT values as [1]-shaped nodes.
struct LahtVars {
  Var alpha, beta, bias_pos, bias_neg;
};

Var laht(Var x, const LahtVars& p);

// Raw learnable scalars; effective values are
// alpha = -exp(raw_alpha), beta = exp(raw_beta), bias = softplus(raw_bias).
struct LahtParams {
  Parameter raw_alpha, raw_beta, raw_bias_pos, raw_bias_neg;

  // alpha ~ -10, beta ~ 10, both biases ~ 0.01.
  static LahtParams initial(const std::string& prefix);

  LahtVars effective(Tape& tape);
  double alpha() const;
  double beta() const;
  double bias_pos() const;
  double bias_neg() const;
};

// ---- front-end ---------------------------------------------------------------

struct DecompositionOutput {
  std::vector<Var> details;  // d_1 ... d_L
  Var approximation;         // a_L

  std::vector<Var> bands() const;
};

struct FilterPair {
  Tensor lowpass, highpass;
};

class FrontEnd {
 public:
  explicit FrontEnd(FrontEndConfig cfg);

  const FrontEndConfig& config() const { return cfg_; }
  std::size_t minimum_length() const { return wavelet::minimum_length(cfg_); }

  DecompositionOutput forward(Tape& tape, Var signal);

  std::vector<Parameter*> parameters();
  // Learnable filters (h and independent g); db10_fixed has none.
  std::size_t learnable_filter_count() const { return lowpass_.size() + highpass_.size(); }

  // Per-level filters as currently parameterized (after CQF derivation).
  std::vector<FilterPair> effective_filters() const;
  const std::vector<LahtParams>& laht_params() const { return laht_; }

 private:
  std::pair<Var, Var> level_filters(Tape& tape, std::size_t level);

  FrontEndConfig cfg_;
  Tensor fixed_h_, fixed_g_;
  std::vector<Parameter> lowpass_;
  std::vector<Parameter> highpass_;
  std::vector<LahtParams> laht_;
};

// Inverse cascade for orthonormal filters: upsample by 2 and accumulate the
// periodic synthesis of each level, truncating odd-width extensions.
// `signal_length` is the width of the original input.
Tensor reconstruct(const std::vector<Tensor>& details, const Tensor& approximation,
                   const std::vector<FilterPair>& filters, std::size_t signal_length);
Var reconstruct(const DecompositionOutput& bands, const std::vector<FilterPair>& filters,
                std::size_t signal_length);

}  // namespace sigwav::wavelet
