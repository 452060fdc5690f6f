#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "refinet/backend/ops.hpp"
#include "test_util.hpp"

using namespace refinet;
using refinet::test::random_tensor;

namespace {

// Direct nested-loop cross-correlation with zero padding, independent of the
// padded-plane kernels.
std::vector<double> naive_conv(const Tensor& in, const Tensor& w, const Tensor& b) {
  const Shape s = in.shape();
  const Shape ws = w.shape();
  std::vector<double> out(s.n * ws.n * s.h * s.w);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < ws.n; ++o)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          double acc = b.data()[o];
          for (std::size_t i = 0; i < s.c; ++i)
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const long yy = static_cast<long>(y + ky) - 1;
                const long xx = static_cast<long>(x + kx) - 1;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(s.h) || xx >= static_cast<long>(s.w))
                  continue;
                acc += static_cast<double>(w.data()[((o * s.c + i) * 3 + ky) * 3 + kx]) *
                       in.data()[((n * s.c + i) * s.h + yy) * s.w + xx];
              }
          out[((n * ws.n + o) * s.h + y) * s.w + x] = acc;
        }
  return out;
}

}  // namespace

TEST(Conv3x3, AllOnesGivesNineInCentreFourInCorners) {
  auto in = Tensor::filled({1, 1, 3, 3}, 1.0f);
  auto w = Tensor::filled({1, 1, 3, 3}, 1.0f);
  auto b = Tensor::zeros({1, 1, 1, 1});
  auto out = conv3x3(in, w, b);
  ASSERT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
  EXPECT_FLOAT_EQ(out.data()[4], 9.0f);
  for (std::size_t corner : {0, 2, 6, 8}) EXPECT_FLOAT_EQ(out.data()[corner], 4.0f);
  for (std::size_t edge : {1, 3, 5, 7}) EXPECT_FLOAT_EQ(out.data()[edge], 6.0f);
}

TEST(Conv3x3, ZeroKernelYieldsBias) {
  std::mt19937_64 rng(1);
  auto in = random_tensor(rng, {2, 3, 5, 4});
  auto w = Tensor::zeros({2, 3, 3, 3});
  auto b = Tensor::from_data({2, 1, 1, 1}, {0.25f, -1.5f});
  auto out = conv3x3(in, w, b);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t i = 0; i < 20; ++i)
        EXPECT_EQ(out.data()[(n * 2 + o) * 20 + i], o == 0 ? 0.25f : -1.5f);
}

TEST(Conv3x3, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(7);
  auto in = random_tensor(rng, {1, 2, 4, 4});
  auto w = random_tensor(rng, {3, 2, 3, 3});
  auto b = random_tensor(rng, {3, 1, 1, 1});
  const auto expected = naive_conv(in, w, b);
  const auto out = conv3x3(in, w, b);
  ASSERT_EQ(out.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(out.data()[i], expected[i], 1e-5);
}

TEST(Conv3x3, OracleAgreesOnAssortedShapes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape s{1 + rng() % 3, 1 + rng() % 4, 1 + rng() % 17, 1 + rng() % 17};
    const std::size_t co = 1 + rng() % 4;
    auto in = random_tensor(rng, s);
    auto w = random_tensor(rng, {co, s.c, 3, 3});
    auto b = random_tensor(rng, {co, 1, 1, 1});
    const auto expected = naive_conv(in, w, b);
    const auto out = conv3x3(in, w, b);
    for (std::size_t i = 0; i < expected.size(); ++i) ASSERT_NEAR(out.data()[i], expected[i], 1e-5);
  }
}

TEST(Conv3x3, LinearInInputForFixedWeights) {
  std::mt19937_64 rng(3);
  auto w = random_tensor(rng, {4, 3, 3, 3});
  auto zero_b = Tensor::zeros({4, 1, 1, 1});
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_tensor(rng, {2, 3, 6, 6});
    auto c = random_tensor(rng, {2, 3, 6, 6});
    const float alpha = 0.7f, beta = -1.3f;
    const auto lhs = conv3x3(axpby(a, alpha, c, beta), w, zero_b);
    const auto rhs = axpby(conv3x3(a, w, zero_b), alpha, conv3x3(c, w, zero_b), beta);
    for (std::size_t i = 0; i < lhs.size(); ++i) ASSERT_NEAR(lhs.data()[i], rhs.data()[i], 1e-5);
  }
  auto out = conv3x3(random_tensor(rng, {1, 3, 5, 5}), Tensor::zeros({4, 3, 3, 3}), zero_b);
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv3x3, RejectsChannelMismatch) {
  auto in = Tensor::zeros({1, 2, 4, 4});
  auto w = Tensor::zeros({3, 5, 3, 3});
  auto b = Tensor::zeros({3, 1, 1, 1});
  EXPECT_THROW(conv3x3(in, w, b), ShapeError);
  EXPECT_THROW(conv3x3(in, Tensor::zeros({3, 2, 3, 3}), Tensor::zeros({2, 1, 1, 1})), ShapeError);
  EXPECT_THROW(conv3x3(in, Tensor::zeros({3, 2, 5, 5}), b), ShapeError);
}

TEST(Elu, ClosedFormValues) {
  auto x = Tensor::from_data({1, 1, 1, 3}, {0.0f, 2.0f, -1.0f});
  auto y = elu(x);
  EXPECT_EQ(y.data()[0], 0.0f);
  EXPECT_EQ(y.data()[1], 2.0f);
  EXPECT_NEAR(y.data()[2], std::exp(-1.0) - 1.0, 1e-6);
  EXPECT_NEAR(y.data()[2], -0.632121, 1e-6);
}

TEST(Elu, MonotoneNonDecreasing) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> dist(-10.0f, 10.0f);
  for (int i = 0; i < 1000; ++i) {
    float a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    auto y = elu(Tensor::from_data({1, 1, 1, 2}, {a, b}));
    ASSERT_LE(y.data()[0], y.data()[1]) << a << " " << b;
  }
  // No jump at the branch point.
  auto near0 = elu(Tensor::from_data({1, 1, 1, 2}, {-1e-6f, 1e-6f}));
  EXPECT_NEAR(near0.data()[0], near0.data()[1], 3e-6);
}

TEST(ResizeNearest, UpsampleReplicatesBlocks) {
  auto x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  auto up = resize_nearest(x, 2, ResizeDirection::Up);
  const std::vector<float> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  ASSERT_EQ(up.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), up.data().begin()));
  auto down = resize_nearest(up, 2, ResizeDirection::Down);
  EXPECT_TRUE(std::equal(down.data().begin(), down.data().end(), x.data().begin()));
}

TEST(ResizeNearest, DownsampleKeepsTopLeft) {
  std::vector<float> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<float>(i);
  auto down = resize_nearest(Tensor::from_data({1, 1, 4, 4}, v), 2, ResizeDirection::Down);
  const std::vector<float> expected{0, 2, 8, 10};
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), down.data().begin()));
}

TEST(ResizeNearest, FactorOneIsIdentity) {
  std::mt19937_64 rng(2);
  auto x = random_tensor(rng, {2, 3, 5, 7});
  for (auto dir : {ResizeDirection::Up, ResizeDirection::Down}) {
    auto y = resize_nearest(x, 1, dir);
    EXPECT_EQ(y.shape(), x.shape());
    EXPECT_TRUE(refinet::test::bitwise_equal(x.data(), y.data()));
  }
}

TEST(ResizeNearest, UpThenDownIsIdentityForAllFactors) {
  std::mt19937_64 rng(9);
  for (std::size_t k = 1; k <= 6; ++k)
    for (int trial = 0; trial < 5; ++trial) {
      auto x = random_tensor(rng, {1 + rng() % 2, 1 + rng() % 3, 1 + rng() % 6, 1 + rng() % 6});
      auto back = resize_nearest(resize_nearest(x, k, ResizeDirection::Up), k, ResizeDirection::Down);
      ASSERT_TRUE(refinet::test::bitwise_equal(x.data(), back.data())) << "k=" << k;
    }
}

TEST(ResizeNearest, RejectsNonDivisibleDownsample) {
  EXPECT_THROW(resize_nearest(Tensor::zeros({1, 1, 5, 4}), 2, ResizeDirection::Down), ShapeError);
  EXPECT_THROW(resize_nearest(Tensor::zeros({1, 1, 4, 4}), 0, ResizeDirection::Up), ShapeError);
}

TEST(FullyConnected, IdentityWeightPassesThrough) {
  std::mt19937_64 rng(4);
  auto x = random_tensor(rng, {2, 3, 1, 1});
  std::vector<float> eye(9, 0.0f);
  for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
  auto y = fully_connected(x, Tensor::from_data({3, 3, 1, 1}, eye), Tensor::zeros({3, 1, 1, 1}));
  EXPECT_TRUE(refinet::test::bitwise_equal(x.data(), y.data()));
}

TEST(FullyConnected, ZeroWeightGivesBiasRows) {
  std::mt19937_64 rng(4);
  auto x = random_tensor(rng, {3, 2, 2, 2});
  auto b = Tensor::from_data({2, 1, 1, 1}, {0.5f, -2.0f});
  auto y = fully_connected(x, Tensor::zeros({2, 8, 1, 1}), b);
  ASSERT_EQ(y.shape(), (Shape{3, 2, 1, 1}));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(y.data()[r * 2], 0.5f);
    EXPECT_EQ(y.data()[r * 2 + 1], -2.0f);
  }
}

TEST(FullyConnected, MatchesHandMultiplication) {
  std::mt19937_64 rng(8);
  auto x = random_tensor(rng, {2, 3, 1, 1});
  auto w = random_tensor(rng, {4, 3, 1, 1});
  auto b = random_tensor(rng, {4, 1, 1, 1});
  auto y = fully_connected(x, w, b);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t m = 0; m < 4; ++m) {
      double acc = b.data()[m];
      for (std::size_t k = 0; k < 3; ++k)
        acc += static_cast<double>(x.data()[r * 3 + k]) * w.data()[m * 3 + k];
      EXPECT_NEAR(y.data()[r * 4 + m], acc, 1e-6);
    }
}

TEST(FullyConnected, RejectsDimensionMismatch) {
  EXPECT_THROW(fully_connected(Tensor::zeros({2, 3, 1, 1}), Tensor::zeros({4, 5, 1, 1}),
                               Tensor::zeros({4, 1, 1, 1})),
               ShapeError);
  EXPECT_THROW(fully_connected(Tensor::zeros({2, 3, 1, 1}), Tensor::zeros({4, 3, 1, 1}),
                               Tensor::zeros({3, 1, 1, 1})),
               ShapeError);
}

TEST(L1Mean, Examples) {
  auto a = Tensor::from_data({1, 1, 1, 2}, {0.0f, 1.0f});
  auto b = Tensor::from_data({1, 1, 1, 2}, {1.0f, 1.0f});
  EXPECT_FLOAT_EQ(l1_mean(a, b).item(), 0.5f);
  EXPECT_EQ(l1_mean(a, a).item(), 0.0f);
}

TEST(L1Mean, MatchesScalarLoopOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape s{1 + rng() % 4, 1 + rng() % 3, 1 + rng() % 9, 1 + rng() % 9};
    auto a = random_tensor(rng, s);
    auto b = random_tensor(rng, s);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      acc += std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]));
    EXPECT_NEAR(l1_mean(a, b).item(), acc / static_cast<double>(s.size()), 1e-6);
  }
}

TEST(L1Mean, SymmetricNonNegativeZeroOnlyWhenEqual) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Shape s{1, 1 + rng() % 3, 1 + rng() % 5, 1 + rng() % 5};
    auto a = random_tensor(rng, s);
    auto b = random_tensor(rng, s);
    const float ab = l1_mean(a, b).item();
    EXPECT_EQ(ab, l1_mean(b, a).item());
    EXPECT_GT(ab, 0.0f);
    EXPECT_EQ(l1_mean(a, a.clone()).item(), 0.0f);
  }
}

TEST(L1Mean, RejectsShapeMismatch) {
  EXPECT_THROW(l1_mean(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 2, 3})), ShapeError);
}

TEST(ConcatChannels, InterleavesPerSample) {
  auto a = Tensor::from_data({2, 1, 1, 2}, {1, 2, 3, 4});
  auto b = Tensor::from_data({2, 2, 1, 2}, {5, 6, 7, 8, 9, 10, 11, 12});
  auto c = concat_channels(a, b);
  const std::vector<float> expected{1, 2, 5, 6, 7, 8, 3, 4, 9, 10, 11, 12};
  ASSERT_EQ(c.shape(), (Shape{2, 3, 1, 2}));
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), c.data().begin()));
  EXPECT_THROW(concat_channels(a, Tensor::zeros({2, 1, 2, 2})), ShapeError);
}

TEST(Tensor, RejectsInconsistentConstruction) {
  EXPECT_THROW(Tensor::from_data({1, 1, 2, 2}, {1.0f, 2.0f}), ShapeError);
  EXPECT_THROW(Tensor::zeros({0, 1, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor::zeros({1, 1, 2, 2}).item(), ShapeError);
  EXPECT_THROW(reshape(Tensor::zeros({1, 1, 2, 2}), Shape{1, 1, 1, 3}), ShapeError);
}

TEST(Tensor, DetachSharesStorageWithoutGradient) {
  auto p = Tensor::filled({1, 1, 1, 2}, 1.0f, true);
  auto d = p.detach();
  EXPECT_FALSE(d.requires_grad());
  p.data()[0] = 5.0f;
  EXPECT_EQ(d.data()[0], 5.0f);
  auto c = p.clone();
  p.data()[0] = 6.0f;
  EXPECT_EQ(c.data()[0], 5.0f);
}
