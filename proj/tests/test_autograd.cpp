#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "refinet/backend/gradcheck.hpp"
#include "refinet/backend/ops.hpp"
#include "test_util.hpp"

using namespace refinet;

TEST(Backward, L1AgainstZeroGivesInverseCount) {
  std::mt19937_64 rng(1);
  auto p = test::random_tensor(rng, {2, 3, 4, 5}, 0.1, 1.0, true);
  backward(l1_mean(p, Tensor::zeros(p.shape())));
  ASSERT_TRUE(p.has_grad());
  for (float g : p.grad()) EXPECT_FLOAT_EQ(g, 1.0f / 120.0f);
}

TEST(Backward, IndependentLeafGetsNoGradient) {
  std::mt19937_64 rng(2);
  auto p = test::random_tensor(rng, {1, 1, 2, 2}, -1, 1, true);
  auto q = test::random_tensor(rng, {1, 1, 2, 2}, -1, 1, true);
  backward(l1_mean(q, Tensor::zeros(q.shape())));
  for (float g : p.grad()) EXPECT_EQ(g, 0.0f);
}

TEST(Backward, DetachedPathContributesNothing) {
  std::mt19937_64 rng(3);
  auto p = test::random_tensor(rng, {1, 2, 3, 3}, 0.5, 1.0, true);
  auto loss = axpby(l1_mean(p.detach(), Tensor::zeros(p.shape())), 1.0f,
                    l1_mean(p, Tensor::zeros(p.shape())), 2.0f);
  backward(loss);
  for (float g : p.grad()) EXPECT_FLOAT_EQ(g, 2.0f / 18.0f);
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  auto p = Tensor::filled({1, 1, 1, 4}, 1.0f, true);
  backward(l1_mean(p, Tensor::zeros(p.shape())));
  backward(l1_mean(p, Tensor::zeros(p.shape())));
  for (float g : p.grad()) EXPECT_FLOAT_EQ(g, 0.5f);
  p.zero_grad();
  EXPECT_FALSE(p.has_grad());
}

TEST(Backward, SharedSubexpressionSumsBothPaths) {
  auto p = Tensor::filled({1, 1, 1, 2}, 1.0f, true);
  auto e = elu(p);
  backward(axpby(l1_mean(e, Tensor::zeros(e.shape())), 1.0f, l1_mean(e, Tensor::zeros(e.shape())),
                 3.0f));
  for (float g : p.grad()) EXPECT_FLOAT_EQ(g, 2.0f);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto p = Tensor::filled({1, 1, 2, 2}, 1.0f, true);
  EXPECT_THROW(backward(elu(p)), ShapeError);
}

TEST(Backward, GradientShapeMatchesData) {
  std::mt19937_64 rng(4);
  auto x = test::random_tensor(rng, {2, 3, 4, 4}, -1, 1, true);
  auto w = test::random_tensor(rng, {2, 3, 3, 3}, -1, 1, true);
  auto b = test::random_tensor(rng, {2, 1, 1, 1}, -1, 1, true);
  backward(l1_mean(conv3x3(x, w, b), Tensor::zeros({2, 2, 4, 4})));
  EXPECT_EQ(x.grad().size(), x.size());
  EXPECT_EQ(w.grad().size(), w.size());
  EXPECT_EQ(b.grad().size(), b.size());
  for (const auto* t : {&x, &w, &b})
    for (float g : t->grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error({3, 4}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(relative_error({0, 0}, {0, 0}), 0.0);
  EXPECT_NEAR(relative_error({1, 0}, {0, 1}), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(relative_error({1.1, 0}, {1.0, 0}), 0.1 / 1.1, 1e-12);
}

TEST(GradCheck, EveryOpPassesInBothPrecisions) {
  GradCheckOptions opt;
  opt.seed = 17;
  const auto results = run_gradcheck(opt);
  ASSERT_EQ(results.size(), 10u);
  for (const auto& r : results) {
    EXPECT_GE(r.trials, 20u);
    EXPECT_LT(r.max_rel_error_f32, 1e-2) << r.op;
    EXPECT_LT(r.max_rel_error_f64, 1e-4) << r.op;
    EXPECT_TRUE(r.passed) << r.op;
  }
}

TEST(GradCheck, PerturbedOpIsCaught) {
  GradCheckOptions opt;
  opt.trials = 3;
  opt.perturb_op = "elu";
  for (const auto& r : run_gradcheck(opt)) {
    if (r.op == "elu") {
      EXPECT_FALSE(r.passed);
      EXPECT_NEAR(r.max_rel_error_f64, 0.1 / 1.1, 1e-3);
    } else {
      EXPECT_TRUE(r.passed) << r.op;
    }
  }
}

TEST(GradCheck, FixedSeedIsReproducible) {
  GradCheckOptions opt;
  opt.trials = 4;
  opt.seed = 99;
  const auto a = run_gradcheck(opt);
  const auto b = run_gradcheck(opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].max_rel_error_f32, b[i].max_rel_error_f32);
    EXPECT_EQ(a[i].max_rel_error_f64, b[i].max_rel_error_f64);
  }
}

TEST(Cast, DoubleCopyKeepsValues) {
  std::mt19937_64 rng(5);
  auto x = test::random_tensor(rng, {1, 2, 3, 3});
  auto d = cast<double>(x, true);
  EXPECT_TRUE(d.requires_grad());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(static_cast<double>(x.data()[i]), d.data()[i]);
}
