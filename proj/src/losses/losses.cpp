#include "refinet/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "refinet/backend/ops.hpp"

namespace refinet {

void LossWeights::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(lambda_k > 0.0)) throw ConfigError("lambda_k must be positive");
  if (!(lambda_r >= 0.0 && lambda_r <= 1.0)) throw ConfigError("lambda_r must lie in [0, 1]");
}

bool LossReport::finite() const {
  for (double v : {L_gan_x, L_gan_gz, L_rcn, L_D, L_G, k_t, M})
    if (!std::isfinite(v)) return false;
  return true;
}

std::string LossReport::csv_header() { return "step,L_gan_x,L_gan_gz,L_rcn,L_D,L_G,k_t,M"; }

std::string LossReport::csv_row() const {
  // %.9g round-trips a float exactly, so logs compare bitwise.
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<unsigned long long>(step), L_gan_x, L_gan_gz, L_rcn, L_D, L_G, k_t, M);
  return buf;
}

template <typename T>
BasicTensor<T> loss_gan(const BasicTensor<T>& v, const BasicTensor<T>& d_out) {
  return l1_mean(v, d_out);
}

template <typename T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& v_hr, const BasicTensor<T>& g_out) {
  return l1_mean(v_hr, g_out);
}

double discriminator_loss(double L_gan_x, double L_gan_gz, double k_t) {
  return L_gan_x - k_t * L_gan_gz;
}

template <typename T>
BasicTensor<T> discriminator_loss(const BasicTensor<T>& L_gan_x, const BasicTensor<T>& L_gan_gz,
                                  double k_t) {
  return axpby(L_gan_x, T(1), L_gan_gz, static_cast<T>(-k_t));
}

double generator_loss(double L_gan_gz, double L_rcn, double lambda_r) {
  return (1.0 - lambda_r) * L_gan_gz + lambda_r * L_rcn;
}

template <typename T>
BasicTensor<T> generator_loss(const BasicTensor<T>& L_gan_gz, const BasicTensor<T>& L_rcn,
                              double lambda_r) {
  return axpby(L_gan_gz, static_cast<T>(1.0 - lambda_r), L_rcn, static_cast<T>(lambda_r));
}

double update_k(double k_t, const LossWeights& weights, double L_gan_x, double L_gan_gz) {
  const double next = k_t + weights.lambda_k * (weights.gamma * L_gan_x - L_gan_gz);
  return std::clamp(next, 0.0, 1.0);
}

double convergence_measure(double L_gan_x, double L_gan_gz, double gamma) {
  return L_gan_x + std::abs(gamma * L_gan_x - L_gan_gz);
}

#define REFINET_INSTANTIATE_LOSSES(T)                                                          \
  template BasicTensor<T> loss_gan(const BasicTensor<T>&, const BasicTensor<T>&);              \
  template BasicTensor<T> reconstruction_loss(const BasicTensor<T>&, const BasicTensor<T>&);   \
  template BasicTensor<T> discriminator_loss(const BasicTensor<T>&, const BasicTensor<T>&,     \
                                             double);                                          \
  template BasicTensor<T> generator_loss(const BasicTensor<T>&, const BasicTensor<T>&, double);

REFINET_INSTANTIATE_LOSSES(float)
REFINET_INSTANTIATE_LOSSES(double)

#undef REFINET_INSTANTIATE_LOSSES

}  // namespace refinet
