#include "sigwav/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <vector>

namespace sigwav::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

// Maps a position in the padded input to a source index, or -1 for zero fill.
inline long source_index(const ConvGeometry& g, std::size_t padded_pos) {
  switch (g.pad_mode) {
    case PadMode::none: return static_cast<long>(padded_pos);
    case PadMode::zero: {
      long src = static_cast<long>(padded_pos) - static_cast<long>(g.pad);
      return (src < 0 || src >= static_cast<long>(g.in_width)) ? -1 : src;
    }
    case PadMode::circular: return static_cast<long>(padded_pos % g.in_width);
  }
  return -1;
}

// Contiguous range [q0, q1) of output positions whose tap `offset` reads an
// in-range, unwrapped sample; only used for stride 1.
inline void direct_range(const ConvGeometry& g, std::size_t offset, std::size_t out_w,
                         std::size_t& q0, std::size_t& q1) {
  long lo = 0;
  long hi = static_cast<long>(out_w);
  long shift = static_cast<long>(offset);
  if (g.pad_mode == PadMode::zero) shift -= static_cast<long>(g.pad);
  // source = q + shift must lie in [0, in_width)
  lo = std::max(lo, -shift);
  hi = std::min(hi, static_cast<long>(g.in_width) - shift);
  if (hi < lo) hi = lo;
  q0 = static_cast<std::size_t>(lo);
  q1 = static_cast<std::size_t>(hi);
}

void transpose_copy(std::size_t rows, std::size_t cols, const double* src, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

std::size_t ConvGeometry::padded_width() const {
  switch (pad_mode) {
    case PadMode::none: return in_width;
    case PadMode::zero: return in_width + 2 * pad;
    case PadMode::circular: return in_width + dilation * (kernel - 1);
  }
  return in_width;
}

std::size_t ConvGeometry::out_width() const {
  const std::size_t span = dilation * (kernel - 1) + 1;
  const std::size_t wp = padded_width();
  if (wp < span || stride == 0) return 0;
  return (wp - span) / stride + 1;
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  std::vector<double> at, bt;
  if (trans_a) {
    transpose_copy(k, m, a, at);
    a = at.data();
  }
  if (trans_b) {
    transpose_copy(n, k, b, bt);
    b = bt.data();
  }
  gemm_nn(m, n, k, a, b, c);
}

void conv1d_forward(const ConvGeometry& g, const double* in, const double* w, const double* bias,
                    double* out) {
  const std::size_t out_w = g.out_width();
  const std::size_t rows = g.batch * g.out_channels;
  const bool parallel = rows > 1 && rows * out_w * g.in_channels * g.kernel >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t b = row / g.out_channels;
    const std::size_t k = row % g.out_channels;
    double* o = out + row * out_w;
    std::fill(o, o + out_w, bias ? bias[k] : 0.0);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* x = in + (b * g.in_channels + c) * g.in_width;
      const double* wk = w + (k * g.in_channels + c) * g.kernel;
      for (std::size_t s = 0; s < g.kernel; ++s) {
        const double wv = wk[s];
        const std::size_t offset = g.dilation * s;
        if (g.stride == 1 && g.pad_mode != PadMode::circular) {
          std::size_t q0, q1;
          direct_range(g, offset, out_w, q0, q1);
          const long shift = static_cast<long>(offset) -
                             (g.pad_mode == PadMode::zero ? static_cast<long>(g.pad) : 0);
          const double* xs = x + shift;
          for (std::size_t q = q0; q < q1; ++q) o[q] += wv * xs[q];
        } else {
          for (std::size_t q = 0; q < out_w; ++q) {
            const long src = source_index(g, q * g.stride + offset);
            if (src >= 0) o[q] += wv * x[src];
          }
        }
      }
    }
  }
}

void conv1d_backward(const ConvGeometry& g, const double* in, const double* w,
                     const double* grad_out, double* grad_in, double* grad_w, double* grad_bias) {
  const std::size_t out_w = g.out_width();
  const bool parallel = g.batch * g.out_channels * out_w * g.in_channels * g.kernel >= kParallelWork;
  const bool fast = g.stride == 1 && g.pad_mode != PadMode::circular;

  if (grad_w || grad_bias) {
#pragma omp parallel for schedule(static) if (parallel && g.out_channels > 1)
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      for (std::size_t b = 0; b < g.batch; ++b) {
        const double* go = grad_out + (b * g.out_channels + k) * out_w;
        if (grad_bias) {
          double acc = 0.0;
          for (std::size_t q = 0; q < out_w; ++q) acc += go[q];
          grad_bias[k] += acc;
        }
        if (!grad_w) continue;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          const double* x = in + (b * g.in_channels + c) * g.in_width;
          double* gw = grad_w + (k * g.in_channels + c) * g.kernel;
          for (std::size_t s = 0; s < g.kernel; ++s) {
            const std::size_t offset = g.dilation * s;
            double acc = 0.0;
            if (fast) {
              std::size_t q0, q1;
              direct_range(g, offset, out_w, q0, q1);
              const long shift = static_cast<long>(offset) -
                                 (g.pad_mode == PadMode::zero ? static_cast<long>(g.pad) : 0);
              const double* xs = x + shift;
              for (std::size_t q = q0; q < q1; ++q) acc += go[q] * xs[q];
            } else {
              for (std::size_t q = 0; q < out_w; ++q) {
                const long src = source_index(g, q * g.stride + offset);
                if (src >= 0) acc += go[q] * x[src];
              }
            }
            gw[s] += acc;
          }
        }
      }
    }
  }

  if (grad_in) {
    const std::size_t rows = g.batch * g.in_channels;
#pragma omp parallel for schedule(static) if (parallel && rows > 1)
    for (std::size_t row = 0; row < rows; ++row) {
      const std::size_t b = row / g.in_channels;
      const std::size_t c = row % g.in_channels;
      double* gi = grad_in + row * g.in_width;
      for (std::size_t k = 0; k < g.out_channels; ++k) {
        const double* go = grad_out + (b * g.out_channels + k) * out_w;
        const double* wk = w + (k * g.in_channels + c) * g.kernel;
        for (std::size_t s = 0; s < g.kernel; ++s) {
          const double wv = wk[s];
          const std::size_t offset = g.dilation * s;
          if (fast) {
            std::size_t q0, q1;
            direct_range(g, offset, out_w, q0, q1);
            const long shift = static_cast<long>(offset) -
                               (g.pad_mode == PadMode::zero ? static_cast<long>(g.pad) : 0);
            double* gs = gi + shift;
            for (std::size_t q = q0; q < q1; ++q) gs[q] += wv * go[q];
          } else {
            for (std::size_t q = 0; q < out_w; ++q) {
              const long src = source_index(g, q * g.stride + offset);
              if (src >= 0) gi[src] += wv * go[q];
            }
          }
        }
      }
    }
  }
}

namespace serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

void conv1d_forward(const ConvGeometry& g, const double* in, const double* w, const double* bias,
                    double* out) {
  const std::size_t out_w = g.out_width();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (std::size_t q = 0; q < out_w; ++q) {
        double acc = bias ? bias[k] : 0.0;
        for (std::size_t c = 0; c < g.in_channels; ++c)
          for (std::size_t s = 0; s < g.kernel; ++s) {
            const long src = source_index(g, q * g.stride + g.dilation * s);
            if (src < 0) continue;
            acc += in[(b * g.in_channels + c) * g.in_width + src] *
                   w[(k * g.in_channels + c) * g.kernel + s];
          }
        out[(b * g.out_channels + k) * out_w + q] = acc;
      }
}

void conv1d_backward(const ConvGeometry& g, const double* in, const double* w,
                     const double* grad_out, double* grad_in, double* grad_w, double* grad_bias) {
  const std::size_t out_w = g.out_width();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t k = 0; k < g.out_channels; ++k)
      for (std::size_t q = 0; q < out_w; ++q) {
        const double go = grad_out[(b * g.out_channels + k) * out_w + q];
        if (grad_bias) grad_bias[k] += go;
        for (std::size_t c = 0; c < g.in_channels; ++c)
          for (std::size_t s = 0; s < g.kernel; ++s) {
            const long src = source_index(g, q * g.stride + g.dilation * s);
            if (src < 0) continue;
            const std::size_t ii = (b * g.in_channels + c) * g.in_width + src;
            const std::size_t wi = (k * g.in_channels + c) * g.kernel + s;
            if (grad_in) grad_in[ii] += w[wi] * go;
            if (grad_w) grad_w[wi] += in[ii] * go;
          }
      }
}

}  // namespace serial

}  // namespace sigwav::kernels
