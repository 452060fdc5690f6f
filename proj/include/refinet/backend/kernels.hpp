#pragma once

// Inner-loop kernels behind the differentiable ops. Every kernel has a scalar
// reference (templated, also used for the 64-bit verification path) and,
// where the loop is data parallel, an AVX2 variant for float selected at
// runtime.
//
// Kernels that only vectorise across independent outputs (conv forward,
// conv input-gradient, axpy-style updates, Adam) perform the same per-element
// operation sequence as the reference and therefore match it bit for bit.
// Reductions (conv weight-gradient, dot products, L1 sums) use lane-wise
// partial sums and match to rounding only.

#include <cstddef>
#include <string_view>

namespace refinet::kernels {

struct ConvDims {
  std::size_t batch;
  std::size_t in_ch;
  std::size_t out_ch;
  std::size_t height;
  std::size_t width;
};

struct AdamCoefficients {
  float lr;
  float beta1;
  float beta2;
  float one_minus_beta1;
  float one_minus_beta2;
  float epsilon;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

/// Function table for float kernels. All buffers are dense NCHW.
struct KernelTable {
  std::string_view name;

  // out = conv(in, weight) + bias; out is overwritten.
  void (*conv3x3_forward)(const float* in, const float* weight, const float* bias, float* out,
                          const ConvDims& d);
  // grad_in += conv_transpose(grad_out, weight)
  void (*conv3x3_backward_input)(const float* grad_out, const float* weight, float* grad_in,
                                 const ConvDims& d);
  // grad_weight += corr(in, grad_out); grad_bias += sum(grad_out). Either
  // output may be null.
  void (*conv3x3_backward_weight)(const float* in, const float* grad_out, float* grad_weight,
                                  float* grad_bias, const ConvDims& d);
  // sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // sum_i |a[i] - b[i]|
  float (*abs_diff_sum)(const float* a, const float* b, std::size_t n);
  // ga[i] += scale * sign(a[i] - b[i]); gb may be null, else gb[i] -= same.
  void (*abs_diff_backward)(const float* a, const float* b, float scale, float* ga, float* gb,
                            std::size_t n);
  void (*adam_update)(float* param, const float* grad, float* m, float* s, std::size_t n,
                      const AdamCoefficients& c);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();
bool cpu_has_avx2();

/// Kernel set used by float ops. Defaults to the best supported variant;
/// REFINET_KERNELS=scalar|avx2 overrides at first use.
const KernelTable& active();
/// Force a variant ("scalar" or "avx2"). Returns false if unavailable.
bool select(std::string_view name);

}  // namespace refinet::kernels
