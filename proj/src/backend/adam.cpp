#include "refinet/backend/adam.hpp"

#include <cmath>
#include <string>

#include "refinet/backend/kernels.hpp"

namespace refinet {

AdamState::AdamState(AdamConfig cfg, std::span<const Tensor> params) : config(cfg) {
  m.reserve(params.size());
  s.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.size(), 0.0f);
    s.emplace_back(p.size(), 0.0f);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.m.size() != params.size() || state.s.size() != params.size())
    throw ShapeError("adam_step: optimizer holds " + std::to_string(state.m.size()) +
                     " moment buffers for " + std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad())
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.m[i].size() != params[i].size() || state.s[i].size() != params[i].size())
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " + std::to_string(i));
  }

  state.step += 1;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const kernels::AdamCoefficients coeff{
      cfg.lr,
      cfg.beta1,
      cfg.beta2,
      1.0f - cfg.beta1,
      1.0f - cfg.beta2,
      cfg.epsilon,
      static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t)),
      static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t)),
  };
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    k.adam_update(p.data(), params[i].grad().data(), state.m[i].data(), state.s[i].data(), p.size(),
                  coeff);
  }
}

}  // namespace refinet
