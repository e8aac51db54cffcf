#pragma once

// Dense compute kernels behind the autodiff ops. Each kernel has an
// OpenMP-parallel implementation and a plain serial reference in
// `kernels::serial` used by the tests and the benchmark.

#include <cstddef>

namespace sigwav::kernels {

enum class PadMode { none, zero, circular };

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  PadMode pad_mode = PadMode::none;
  std::size_t pad = 0;  // zero padding on each side (PadMode::zero only)

  std::size_t padded_width() const;
  // 0 when the kernel does not fit.
  std::size_t out_width() const;
};

// C[M,N] = op(A)·op(B), op(A) is [M,K]. Accumulates into C when `accumulate`.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

// out[b,k,q] = bias[k] + sum_c sum_s in[b,c,q*stride + dilation*s] * w[k,c,s]
// (cross-correlation over the padded input). bias may be null.
void conv1d_forward(const ConvGeometry& g, const double* in, const double* w, const double* bias,
                    double* out);

// Accumulates into whichever of grad_in / grad_w / grad_bias is non-null.
void conv1d_backward(const ConvGeometry& g, const double* in, const double* w,
                     const double* grad_out, double* grad_in, double* grad_w, double* grad_bias);

namespace serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate);

void conv1d_forward(const ConvGeometry& g, const double* in, const double* w, const double* bias,
                    double* out);

void conv1d_backward(const ConvGeometry& g, const double* in, const double* w,
                     const double* grad_out, double* grad_in, double* grad_w, double* grad_bias);

}  // namespace serial

}  // namespace sigwav::kernels
