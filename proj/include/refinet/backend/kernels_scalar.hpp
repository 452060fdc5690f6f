#pragma once

// Scalar reference kernels, templated on the element type.

#include <cmath>
#include <cstddef>
#include <vector>

#include "refinet/backend/kernels.hpp"

namespace refinet::kernels::scalar {

// Copies `channels` planes of h*w into a zero border of width one.
template <typename T>
void pad_planes(const T* src, std::size_t channels, std::size_t h, std::size_t w, T* dst) {
  const std::size_t pw = w + 2;
  const std::size_t ph = h + 2;
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = dst + c * ph * pw;
    for (std::size_t i = 0; i < ph * pw; ++i) plane[i] = T(0);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) plane[(y + 1) * pw + x + 1] = src[(c * h + y) * w + x];
  }
}

template <typename T>
void conv3x3_forward(const T* in, const T* weight, const T* bias, T* out, const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<T> padded(d.in_ch * pplane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    pad_planes(in + b * d.in_ch * hw, d.in_ch, d.height, d.width, padded.data());
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      T* dst = out + (b * d.out_ch + o) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = bias[o];
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const T* src = padded.data() + ci * pplane;
        const T* k = weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const T wv = k[ky * 3 + kx];
            for (std::size_t y = 0; y < d.height; ++y) {
              const T* row = src + (y + ky) * pw + kx;
              T* orow = dst + y * d.width;
              for (std::size_t x = 0; x < d.width; ++x) orow[x] = orow[x] + wv * row[x];
            }
          }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_input(const T* grad_out, const T* weight, T* grad_in, const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<T> padded(d.in_ch * pplane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (auto& v : padded) v = T(0);
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      const T* go = grad_out + (b * d.out_ch + o) * hw;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        T* dst = padded.data() + ci * pplane;
        const T* k = weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const T wv = k[ky * 3 + kx];
            for (std::size_t y = 0; y < d.height; ++y) {
              T* row = dst + (y + ky) * pw + kx;
              const T* grow = go + y * d.width;
              for (std::size_t x = 0; x < d.width; ++x) row[x] = row[x] + wv * grow[x];
            }
          }
      }
    }
    for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
      const T* src = padded.data() + ci * pplane;
      T* gi = grad_in + (b * d.in_ch + ci) * hw;
      for (std::size_t y = 0; y < d.height; ++y)
        for (std::size_t x = 0; x < d.width; ++x)
          gi[y * d.width + x] = gi[y * d.width + x] + src[(y + 1) * pw + x + 1];
    }
  }
}

template <typename T>
void conv3x3_backward_weight(const T* in, const T* grad_out, T* grad_weight, T* grad_bias,
                             const ConvDims& d) {
  const std::size_t hw = d.height * d.width;
  const std::size_t pw = d.width + 2;
  const std::size_t pplane = (d.height + 2) * pw;
  std::vector<T> padded(d.in_ch * pplane);
  for (std::size_t b = 0; b < d.batch; ++b) {
    if (grad_weight != nullptr)
      pad_planes(in + b * d.in_ch * hw, d.in_ch, d.height, d.width, padded.data());
    for (std::size_t o = 0; o < d.out_ch; ++o) {
      const T* go = grad_out + (b * d.out_ch + o) * hw;
      if (grad_bias != nullptr) {
        T acc = T(0);
        for (std::size_t i = 0; i < hw; ++i) acc += go[i];
        grad_bias[o] += acc;
      }
      if (grad_weight == nullptr) continue;
      for (std::size_t ci = 0; ci < d.in_ch; ++ci) {
        const T* src = padded.data() + ci * pplane;
        T* gk = grad_weight + (o * d.in_ch + ci) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            T acc = T(0);
            for (std::size_t y = 0; y < d.height; ++y) {
              const T* row = src + (y + ky) * pw + kx;
              const T* grow = go + y * d.width;
              for (std::size_t x = 0; x < d.width; ++x) acc += grow[x] * row[x];
            }
            gk[ky * 3 + kx] += acc;
          }
      }
    }
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

template <typename T>
T abs_diff_sum(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

template <typename T>
void abs_diff_backward(const T* a, const T* b, T scale, T* ga, T* gb, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T diff = a[i] - b[i];
    const T g = diff > T(0) ? scale : (diff < T(0) ? -scale : T(0));
    if (ga != nullptr) ga[i] = ga[i] + g;
    if (gb != nullptr) gb[i] = gb[i] - g;
  }
}

inline void adam_update(float* param, const float* grad, float* m, float* s, std::size_t n,
                        const AdamCoefficients& c) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    const float mi = c.beta1 * m[i] + c.one_minus_beta1 * g;
    const float si = c.beta2 * s[i] + c.one_minus_beta2 * (g * g);
    m[i] = mi;
    s[i] = si;
    const float m_hat = mi / c.bias_correction1;
    const float s_hat = si / c.bias_correction2;
    param[i] = param[i] - c.lr * m_hat / (std::sqrt(s_hat) + c.epsilon);
  }
}

}  // namespace refinet::kernels::scalar
