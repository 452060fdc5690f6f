// AVX2 float kernels. Only the functions below the target pragma are built
// for AVX2; they are reached through the dispatch table after a CPUID check.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "refinet/backend/kernels.hpp"
#include "refinet/backend/kernels_scalar.hpp"

#pragma GCC push_options
#pragma GCC target("avx2")

namespace refinet::kernels {
namespace {

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

// row[x] = row[x] + wv * src[x] for x in [0, n)
inline void madd_row(float* row, const float* src, float wv, std::size_t n) {
  const __m256 w = _mm256_set1_ps(wv);
  std::size_t x = 0;
  for (; x + 8 <= n; x += 8) {
    const __m256 acc = _mm256_loadu_ps(row + x);
    const __m256 prod = _mm256_mul_ps(w, _mm256_loadu_ps(src + x));
    _mm256_storeu_ps(row + x, _mm256_add_ps(acc, prod));
  }
  for (; x < n; ++x) row[x] = row[x] + wv * src[x];
}

void conv3x3_forward(const float* in, const float* weight, const float* bias, float* out,
                     const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<float> padded(d.in_ch * pplane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    scalar::pad_planes(in + b * d.in_ch * hw, d.in_ch, d.height, d.width, padded.data());
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      float* dst = out + (b * d.out_ch + o) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = bias[o];
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const float* src = padded.data() + ci * pplane;
        const float* k = weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const float wv = k[ky * 3 + kx];
            for (std::size_t y = 0; y < d.height; ++y)
              madd_row(dst + y * d.width, src + (y + ky) * pw + kx, wv, d.width);
          }
      }
    }
  }
}

void conv3x3_backward_input(const float* grad_out, const float* weight, float* grad_in,
                            const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<float> padded(d.in_ch * pplane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (auto& v : padded) v = 0.0f;
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      const float* go = grad_out + (b * d.out_ch + o) * hw;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        float* dst = padded.data() + ci * pplane;
        const float* k = weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const float wv = k[ky * 3 + kx];
            for (std::size_t y = 0; y < d.height; ++y)
              madd_row(dst + (y + ky) * pw + kx, go + y * d.width, wv, d.width);
          }
      }
    }
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      const float* src = padded.data() + ci * pplane;
      float* gi = grad_in + (b * d.in_ch + ci) * hw;
      for (std::size_t y = 0; y < d.height; ++y)
        madd_row(gi + y * d.width, src + (y + 1) * pw + 1, 1.0f, d.width);
    }
  }
}

void conv3x3_backward_weight(const float* in, const float* grad_out, float* grad_weight,
                             float* grad_bias, const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<float> padded(d.in_ch * pplane);
  const std::size_t vec_end = d.width - d.width % 8;
  for (std::size_t b = 0; b < d.batch; ++b) {
    if (grad_weight != nullptr)
      scalar::pad_planes(in + b * d.in_ch * hw, d.in_ch, d.height, d.width, padded.data());
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      const float* go = grad_out + (b * d.out_ch + o) * hw;
      if (grad_bias != nullptr) {
        __m256 acc = _mm256_setzero_ps();
        std::size_t i = 0;
        for (; i + 8 <= hw; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(go + i));
        float tail = 0.0f;
        for (; i < hw; ++i) tail += go[i];
        grad_bias[o] += hsum(acc) + tail;
      }
      if (grad_weight == nullptr) continue;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const float* src = padded.data() + ci * pplane;
        float* gk = grad_weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            __m256 acc = _mm256_setzero_ps();
            float tail = 0.0f;
            for (std::size_t y = 0; y < d.height; ++y) {
              const float* row = src + (y + ky) * pw + kx;
              const float* grow = go + y * d.width;
              for (std::size_t x = 0; x < vec_end; x += 8)
                acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(grow + x),
                                                       _mm256_loadu_ps(row + x)));
              for (std::size_t x = vec_end; x < d.width; ++x) tail += grow[x] * row[x];
            }
            gk[ky * 3 + kx] += hsum(acc) + tail;
          }
      }
    }
  }
}

float dot(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) { madd_row(y, x, alpha, n); }

float abs_diff_sum(const float* a, const float* b, std::size_t n) {
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 diff = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    acc = _mm256_add_ps(acc, _mm256_and_ps(diff, abs_mask));
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += std::abs(a[i] - b[i]);
  return hsum(acc) + tail;
}

void abs_diff_backward(const float* a, const float* b, float scale, float* ga, float* gb,
                       std::size_t n) {
  const __m256 pos = _mm256_set1_ps(scale);
  const __m256 neg = _mm256_set1_ps(-scale);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 diff = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    const __m256 gt = _mm256_cmp_ps(diff, zero, _CMP_GT_OQ);
    const __m256 lt = _mm256_cmp_ps(diff, zero, _CMP_LT_OQ);
    const __m256 g = _mm256_or_ps(_mm256_and_ps(gt, pos), _mm256_and_ps(lt, neg));
    if (ga != nullptr) _mm256_storeu_ps(ga + i, _mm256_add_ps(_mm256_loadu_ps(ga + i), g));
    if (gb != nullptr) _mm256_storeu_ps(gb + i, _mm256_sub_ps(_mm256_loadu_ps(gb + i), g));
  }
  if (i < n) scalar::abs_diff_backward(a + i, b + i, scale, ga ? ga + i : nullptr,
                                       gb ? gb + i : nullptr, n - i);
}

void adam_update(float* param, const float* grad, float* m, float* s, std::size_t n,
                 const AdamCoefficients& c) {
  const __m256 b1 = _mm256_set1_ps(c.beta1);
  const __m256 b2 = _mm256_set1_ps(c.beta2);
  const __m256 omb1 = _mm256_set1_ps(c.one_minus_beta1);
  const __m256 omb2 = _mm256_set1_ps(c.one_minus_beta2);
  const __m256 bc1 = _mm256_set1_ps(c.bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(c.bias_correction2);
  const __m256 lr = _mm256_set1_ps(c.lr);
  const __m256 eps = _mm256_set1_ps(c.epsilon);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 si = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(s + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(s + i, si);
    const __m256 m_hat = _mm256_div_ps(mi, bc1);
    const __m256 s_hat = _mm256_div_ps(si, bc2);
    const __m256 step =
        _mm256_div_ps(_mm256_mul_ps(lr, m_hat), _mm256_add_ps(_mm256_sqrt_ps(s_hat), eps));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  if (i < n) scalar::adam_update(param + i, grad + i, m + i, s + i, n - i, c);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{
      "avx2",          conv3x3_forward, conv3x3_backward_input, conv3x3_backward_weight, dot, axpy,
      abs_diff_sum,    abs_diff_backward, adam_update,
  };
  return &table;
}

}  // namespace refinet::kernels

#pragma GCC pop_options
