#include "refinet/backend/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "refinet/backend/ops.hpp"

namespace refinet {

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

template <typename T>
double check_gradient(const std::function<BasicTensor<T>(const std::vector<BasicTensor<T>>&)>& f,
                      std::vector<BasicTensor<T>>& leaves, double step, double analytic_scale) {
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  backward(f(leaves));

  std::vector<double> analytic;
  std::vector<double> numeric;
  for (auto& leaf : leaves) {
    const auto g = leaf.grad();
    for (std::size_t i = 0; i < leaf.size(); ++i)
      analytic.push_back(analytic_scale * (g.empty() ? 0.0 : static_cast<double>(g[i])));
    auto values = leaf.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      values[i] = static_cast<T>(original + step);
      const T plus = values[i];
      const double f_plus = static_cast<double>(f(leaves).item());
      values[i] = static_cast<T>(original - step);
      const T minus = values[i];
      const double f_minus = static_cast<double>(f(leaves).item());
      values[i] = original;
      numeric.push_back((f_plus - f_minus) /
                        (static_cast<double>(plus) - static_cast<double>(minus)));
    }
  }
  return relative_error(analytic, numeric);
}

template double check_gradient<float>(
    const std::function<BasicTensor<float>(const std::vector<BasicTensor<float>>&)>&,
    std::vector<BasicTensor<float>>&, double, double);
template double check_gradient<double>(
    const std::function<BasicTensor<double>(const std::vector<BasicTensor<double>>&)>&,
    std::vector<BasicTensor<double>>&, double, double);

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename T>
BasicTensor<T> random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> values(shape.size());
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return BasicTensor<T>::from_data(shape, std::move(values));
}

template <typename T>
std::vector<T> random_weights(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> w(n);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  return w;
}

template <typename T>
struct Trial {
  std::vector<BasicTensor<T>> leaves;
  std::function<BasicTensor<T>(const std::vector<BasicTensor<T>>&)> f;
};

// Projects a tensor-valued op onto random weights so the checked function is scalar.
template <typename T, typename Op>
Trial<T> projected(Rng& rng, std::vector<BasicTensor<T>> leaves, Op op) {
  const std::size_t out_size = op(leaves).size();
  auto weights = random_weights<T>(rng, out_size);
  return {std::move(leaves), [op, weights](const std::vector<BasicTensor<T>>& in) {
            return weighted_sum(op(in), std::span<const T>(weights));
          }};
}

template <typename T>
Trial<T> conv_trial(Rng& rng) {
  const std::size_t n = pick(rng, 1, 2), ci = pick(rng, 1, 3), co = pick(rng, 1, 3);
  const std::size_t h = pick(rng, 2, 5), w = pick(rng, 2, 5);
  return projected<T>(rng,
                      {random_tensor<T>(rng, {n, ci, h, w}), random_tensor<T>(rng, {co, ci, 3, 3}),
                       random_tensor<T>(rng, {co, 1, 1, 1})},
                      [](const auto& in) { return conv3x3(in[0], in[1], in[2]); });
}

template <typename T>
Trial<T> elu_trial(Rng& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 2, 4)};
  return projected<T>(rng, {random_tensor<T>(rng, s, -2.0, 2.0)},
                      [](const auto& in) { return elu(in[0]); });
}

template <typename T>
Trial<T> upsample_trial(Rng& rng) {
  const std::size_t factor = pick(rng, 1, 3);
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  return projected<T>(rng, {random_tensor<T>(rng, s)}, [factor](const auto& in) {
    return resize_nearest(in[0], factor, ResizeDirection::Up);
  });
}

template <typename T>
Trial<T> downsample_trial(Rng& rng) {
  const std::size_t factor = pick(rng, 1, 3);
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), factor * pick(rng, 1, 3), factor * pick(rng, 1, 3)};
  return projected<T>(rng, {random_tensor<T>(rng, s)}, [factor](const auto& in) {
    return resize_nearest(in[0], factor, ResizeDirection::Down);
  });
}

template <typename T>
Trial<T> fc_trial(Rng& rng) {
  const Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 2), pick(rng, 1, 2)};
  const std::size_t out = pick(rng, 1, 4);
  return projected<T>(rng,
                      {random_tensor<T>(rng, s), random_tensor<T>(rng, {out, s.per_sample(), 1, 1}),
                       random_tensor<T>(rng, {out, 1, 1, 1})},
                      [](const auto& in) { return fully_connected(in[0], in[1], in[2]); });
}

template <typename T>
Trial<T> reshape_trial(Rng& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  return projected<T>(rng, {random_tensor<T>(rng, s)}, [s](const auto& in) {
    return reshape(in[0], Shape{s.n, s.per_sample(), 1, 1});
  });
}

template <typename T>
Trial<T> concat_trial(Rng& rng) {
  const std::size_t n = pick(rng, 1, 2), h = pick(rng, 1, 3), w = pick(rng, 1, 3);
  return projected<T>(rng,
                      {random_tensor<T>(rng, {n, pick(rng, 1, 3), h, w}),
                       random_tensor<T>(rng, {n, pick(rng, 1, 3), h, w})},
                      [](const auto& in) { return concat_channels(in[0], in[1]); });
}

template <typename T>
Trial<T> l1_trial(Rng& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)};
  auto a = random_tensor<T>(rng, s);
  auto b = random_tensor<T>(rng, s);
  // Keep every |a - b| clear of the kink so a finite step never crosses it.
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(static_cast<double>(a.data()[i] - b.data()[i])) < 0.05)
      b.data()[i] = static_cast<T>(a.data()[i] + T(0.1));
  return {{a, b}, [](const auto& in) { return l1_mean(in[0], in[1]); }};
}

template <typename T>
Trial<T> axpby_trial(Rng& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
  const T alpha = static_cast<T>(std::uniform_real_distribution<double>(-2, 2)(rng));
  const T beta = static_cast<T>(std::uniform_real_distribution<double>(-2, 2)(rng));
  return projected<T>(rng, {random_tensor<T>(rng, s), random_tensor<T>(rng, s)},
                      [alpha, beta](const auto& in) { return axpby(in[0], alpha, in[1], beta); });
}

// conv -> elu -> downsample -> fc -> reshape -> upsample -> conv -> l1 against a target.
template <typename T>
Trial<T> chain_trial(Rng& rng) {
  const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 2), f = pick(rng, 1, 3);
  const std::size_t hidden = pick(rng, 1, 3);
  const Shape in_shape{n, c, 4, 4};
  const Shape mid{n, f, 2, 2};
  auto target = random_tensor<T>(rng, in_shape, -3.0, 3.0);
  std::vector<BasicTensor<T>> leaves{
      random_tensor<T>(rng, in_shape),
      random_tensor<T>(rng, {f, c, 3, 3}, -0.5, 0.5),
      random_tensor<T>(rng, {f, 1, 1, 1}, -0.5, 0.5),
      random_tensor<T>(rng, {hidden, mid.per_sample(), 1, 1}, -0.5, 0.5),
      random_tensor<T>(rng, {hidden, 1, 1, 1}, -0.5, 0.5),
      random_tensor<T>(rng, {mid.per_sample(), hidden, 1, 1}, -0.5, 0.5),
      random_tensor<T>(rng, {mid.per_sample(), 1, 1, 1}, -0.5, 0.5),
      random_tensor<T>(rng, {c, f, 3, 3}, -0.5, 0.5),
      random_tensor<T>(rng, {c, 1, 1, 1}, -0.5, 0.5),
  };
  return {std::move(leaves), [target, mid](const auto& in) {
            auto h = elu(conv3x3(in[0], in[1], in[2]));
            h = resize_nearest(h, 2, ResizeDirection::Down);
            h = elu(fully_connected(h, in[3], in[4]));
            h = reshape(fully_connected(h, in[5], in[6]), mid);
            h = resize_nearest(h, 2, ResizeDirection::Up);
            return l1_mean(conv3x3(h, in[7], in[8]), target.detach());
          }};
}

template <typename T>
using TrialFactory = Trial<T> (*)(Rng&);

struct OpCase {
  const char* name;
  TrialFactory<float> make_f32;
  TrialFactory<double> make_f64;
};

#define REFINET_CASE(label, fn) OpCase{label, &fn<float>, &fn<double>}

const std::vector<OpCase>& op_cases() {
  static const std::vector<OpCase> cases{
      REFINET_CASE("conv3x3", conv_trial),
      REFINET_CASE("elu", elu_trial),
      REFINET_CASE("resize_nearest_up", upsample_trial),
      REFINET_CASE("resize_nearest_down", downsample_trial),
      REFINET_CASE("fully_connected", fc_trial),
      REFINET_CASE("reshape", reshape_trial),
      REFINET_CASE("concat_channels", concat_trial),
      REFINET_CASE("l1_mean", l1_trial),
      REFINET_CASE("axpby", axpby_trial),
      REFINET_CASE("composite_chain", chain_trial),
  };
  return cases;
}

#undef REFINET_CASE

}  // namespace

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options) {
  std::vector<GradCheckResult> results;
  std::size_t case_index = 0;
  for (const auto& c : op_cases()) {
    const double scale = options.perturb_op == c.name ? 1.1 : 1.0;
    GradCheckResult r;
    r.op = c.name;
    r.trials = options.trials;
    // Separate streams per op keep each row independent of the op list order.
    Rng rng32(options.seed * 1000003ULL + case_index);
    Rng rng64(options.seed * 1000003ULL + case_index);
    for (std::size_t t = 0; t < options.trials; ++t) {
      auto t32 = c.make_f32(rng32);
      r.max_rel_error_f32 = std::max(
          r.max_rel_error_f32, check_gradient<float>(t32.f, t32.leaves, options.step_f32, scale));
      auto t64 = c.make_f64(rng64);
      r.max_rel_error_f64 = std::max(
          r.max_rel_error_f64, check_gradient<double>(t64.f, t64.leaves, options.step_f64, scale));
    }
    r.passed = r.max_rel_error_f32 < options.tolerance_f32 &&
               r.max_rel_error_f64 < options.tolerance_f64;
    results.push_back(r);
    ++case_index;
  }
  return results;
}

}  // namespace refinet
