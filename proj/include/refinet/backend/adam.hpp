#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "refinet/backend/tensor.hpp"

namespace refinet {

struct AdamConfig {
  float lr = 0.001f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Moment buffers for one parameter list, index-aligned with it.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> s;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::span<const Tensor> params);
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Throws if a parameter has no gradient or the buffers do not
/// line up with the parameters.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace refinet
