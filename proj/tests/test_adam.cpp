#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "refinet/backend/adam.hpp"
#include "refinet/backend/ops.hpp"

using namespace refinet;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<Tensor> params{Tensor::from_data({1, 1, 1, 3}, {0.5f, -1.0f, 2.0f}, true)};
  AdamState st(AdamConfig{}, params);
  for (int i = 0; i < 3; ++i) {
    params[0].mutable_grad();  // allocates zeros
    adam_step(params, st);
  }
  EXPECT_EQ(params[0].data()[0], 0.5f);
  EXPECT_EQ(params[0].data()[1], -1.0f);
  EXPECT_EQ(params[0].data()[2], 2.0f);
  EXPECT_EQ(st.step, 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor::scalar(1.0f, true)};
  params[0].mutable_grad()[0] = 1.0f;
  AdamState st(AdamConfig{0.001f, 0.5f, 0.999f, 1e-8f}, params);
  adam_step(params, st);
  EXPECT_NEAR(params[0].item(), 0.999f, 1e-6);
}

TEST(Adam, ThreeStepsOnQuadraticMatchRecurrence) {
  // f(p) = 0.5 * a * p^2, grad = a * p.
  const double a = 3.0, lr = 0.001, b1 = 0.5, b2 = 0.999, eps = 1e-8;
  std::vector<Tensor> params{Tensor::scalar(0.8f, true)};
  AdamState st(AdamConfig{}, params);

  double p = 0.8, m = 0.0, s = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = a * static_cast<double>(params[0].item());
    params[0].zero_grad();
    params[0].mutable_grad()[0] = static_cast<float>(g);
    adam_step(params, st);

    const double gr = a * p;
    m = b1 * m + (1 - b1) * gr;
    s = b2 * s + (1 - b2) * gr * gr;
    const double mh = m / (1 - std::pow(b1, t));
    const double sh = s / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(sh) + eps);
    EXPECT_NEAR(params[0].item(), p, 1e-6) << "t=" << t;
    EXPECT_NEAR(st.m[0][0], m, 1e-6);
    EXPECT_NEAR(st.s[0][0], s, 1e-6);
  }
  EXPECT_EQ(st.step, 3u);
}

TEST(Adam, MomentsMatchParameterShapes) {
  std::vector<Tensor> params{Tensor::zeros({2, 3, 3, 3}, true), Tensor::zeros({2, 1, 1, 1}, true)};
  AdamState st(AdamConfig{}, params);
  ASSERT_EQ(st.m.size(), 2u);
  EXPECT_EQ(st.m[0].size(), 54u);
  EXPECT_EQ(st.s[1].size(), 2u);
}

TEST(Adam, RejectsMissingGradient) {
  std::vector<Tensor> params{Tensor::scalar(1.0f, true)};
  AdamState st(AdamConfig{}, params);
  EXPECT_THROW(adam_step(params, st), ShapeError);
  EXPECT_EQ(st.step, 0u);
}

TEST(Adam, RejectsMismatchedBuffers) {
  std::vector<Tensor> params{Tensor::scalar(1.0f, true)};
  AdamState st(AdamConfig{}, params);
  std::vector<Tensor> other{Tensor::scalar(1.0f, true), Tensor::scalar(2.0f, true)};
  for (auto& t : other) t.mutable_grad();
  EXPECT_THROW(adam_step(other, st), ShapeError);
}
