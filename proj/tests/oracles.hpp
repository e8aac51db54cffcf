#pragma once

// Independent reference implementations used as test oracles. Written as
// plain loops straight from the definitions, sharing no code with the library.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "sigwav/tensor.hpp"

namespace oracle {

inline sigwav::Tensor random_tensor(sigwav::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  sigwav::Tensor t(std::move(shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

// out[b,k,q] = bias[k] + sum_c sum_s in[b,c,q*stride + dil*s] w[k,c,s] over
// the padded input. pad_mode: 0 none, 1 zero(pad each side), 2 circular
// (right-wrap of dil*(S-1) samples).
inline std::vector<double> conv1d(const std::vector<double>& in, std::size_t B, std::size_t C,
                                  std::size_t W, const std::vector<double>& w, std::size_t K,
                                  std::size_t S, const std::vector<double>* bias, std::size_t stride,
                                  std::size_t dil, int pad_mode, std::size_t pad,
                                  std::size_t& out_w) {
  std::size_t Wp = W;
  if (pad_mode == 1) Wp = W + 2 * pad;
  if (pad_mode == 2) Wp = W + dil * (S - 1);
  auto at = [&](std::size_t b, std::size_t c, std::size_t p) -> double {
    if (pad_mode == 1) {
      if (p < pad || p >= pad + W) return 0.0;
      return in[(b * C + c) * W + (p - pad)];
    }
    return in[(b * C + c) * W + (p % W)];
  };
  const std::size_t span = dil * (S - 1) + 1;
  if (pad_mode == 2) {
    out_w = (W + stride - 1) / stride;
  } else {
    out_w = Wp < span ? 0 : (Wp - span) / stride + 1;
  }
  std::vector<double> out(B * K * out_w, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t q = 0; q < out_w; ++q) {
        double acc = bias ? (*bias)[k] : 0.0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t s = 0; s < S; ++s) acc += at(b, c, q * stride + dil * s) * w[(k * C + c) * S + s];
        out[(b * K + k) * out_w + q] = acc;
      }
  return out;
}

struct Counts {
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> precision, recall, f1;
  std::vector<std::size_t> support;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  double weighted_p = 0, weighted_r = 0, weighted_f1 = 0;
  double accuracy = 0;
};

// Brute-force recount from (truth, pred) pairs: TP/FP/FN tallied per class by
// scanning the pairs, zero denominators give 0.
inline Counts recount(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                      std::size_t classes) {
  Counts r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.confusion[truth[i]][pred[i]] += 1;
    if (truth[i] == pred[i]) ++correct;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c && pred[i] == c) ++tp;
      if (truth[i] != c && pred[i] == c) ++fp;
      if (truth[i] == c && pred[i] != c) ++fn;
    }
    const double p = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rc = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f = p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0;
    r.precision.push_back(p);
    r.recall.push_back(rc);
    r.f1.push_back(f);
    r.support.push_back(tp + fn);
  }
  const double n = static_cast<double>(truth.size());
  for (std::size_t c = 0; c < classes; ++c) {
    r.macro_p += r.precision[c] / classes;
    r.macro_r += r.recall[c] / classes;
    r.macro_f1 += r.f1[c] / classes;
    const double w = static_cast<double>(r.support[c]) / n;
    r.weighted_p += w * r.precision[c];
    r.weighted_r += w * r.recall[c];
    r.weighted_f1 += w * r.f1[c];
  }
  r.accuracy = static_cast<double>(correct) / n;
  return r;
}

}  // namespace oracle
