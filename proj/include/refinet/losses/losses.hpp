#pragma once

// Boundary-equilibrium loss system with the reconstruction-weighted generator
// objective. Scalar overloads are the plain arithmetic; tensor overloads build
// the same expressions on the autodiff graph.

#include <cstdint>
#include <string>

#include "refinet/backend/tensor.hpp"

namespace refinet {

struct LossWeights {
  double gamma = 0.5;      // diversity ratio, (0, 1]
  double lambda_k = 0.001; // gain of the k_t controller, > 0
  double lambda_r = 0.5;   // reconstruction weight, [0, 1]

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// One training step's losses and the k_t that was used for it.
struct LossReport {
  std::uint64_t step = 0;
  double L_gan_x = 0.0;
  double L_gan_gz = 0.0;
  double L_rcn = 0.0;
  double L_D = 0.0;
  double L_G = 0.0;
  double k_t = 0.0;
  double M = 0.0;  // convergence measure, monitoring only

  bool finite() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// |v - D(v)|, averaged over all elements.
template <typename T>
BasicTensor<T> loss_gan(const BasicTensor<T>& v, const BasicTensor<T>& d_out);

/// |v_hr - G(v_lr)|, averaged over all elements.
template <typename T>
BasicTensor<T> reconstruction_loss(const BasicTensor<T>& v_hr, const BasicTensor<T>& g_out);

/// L_D = L_gan_x - k_t * L_gan_gz
double discriminator_loss(double L_gan_x, double L_gan_gz, double k_t);
template <typename T>
BasicTensor<T> discriminator_loss(const BasicTensor<T>& L_gan_x, const BasicTensor<T>& L_gan_gz,
                                  double k_t);

/// L_G = (1 - lambda_r) * L_gan_gz + lambda_r * L_rcn
double generator_loss(double L_gan_gz, double L_rcn, double lambda_r);
template <typename T>
BasicTensor<T> generator_loss(const BasicTensor<T>& L_gan_gz, const BasicTensor<T>& L_rcn,
                              double lambda_r);

/// k_t + lambda_k * (gamma * L_gan_x - L_gan_gz), clamped to [0, 1].
double update_k(double k_t, const LossWeights& weights, double L_gan_x, double L_gan_gz);

/// L_gan_x + |gamma * L_gan_x - L_gan_gz|
double convergence_measure(double L_gan_x, double L_gan_gz, double gamma);

}  // namespace refinet
