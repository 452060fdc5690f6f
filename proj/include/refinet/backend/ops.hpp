#pragma once

// Differentiable operations. Each op records a backward closure on its output
// when any input requires a gradient. Instantiated for float and double.

#include <span>

#include "refinet/backend/tensor.hpp"

namespace refinet {

enum class ResizeDirection { Up, Down };

/// 3x3 cross-correlation, stride 1, zero padding 1.
/// weight: (out_ch, in_ch, 3, 3), bias: (out_ch, 1, 1, 1).
template <typename T>
BasicTensor<T> conv3x3(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                       const BasicTensor<T>& bias);

/// Exponential linear unit with alpha = 1.
template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x);

/// Nearest-neighbour resize by an integer factor. Downsampling keeps the
/// top-left pixel of each factor x factor block.
template <typename T>
BasicTensor<T> resize_nearest(const BasicTensor<T>& x, std::size_t factor, ResizeDirection dir);

/// y = x W^T + b with x viewed as (batch, c*h*w).
/// weight: (out, in, 1, 1), bias: (out, 1, 1, 1); result: (batch, out, 1, 1).
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias);

/// Same values, new shape with the same element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

/// Channel-wise concatenation; batch and spatial dims must agree.
template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// mean(|a - b|) as a (1,1,1,1) tensor.
template <typename T>
BasicTensor<T> l1_mean(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// alpha * a + beta * b, elementwise.
template <typename T>
BasicTensor<T> axpby(const BasicTensor<T>& a, T alpha, const BasicTensor<T>& b, T beta);

/// sum_i x[i] * weights[i] as a scalar tensor; weights are constants.
template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& x, std::span<const T> weights);

}  // namespace refinet
