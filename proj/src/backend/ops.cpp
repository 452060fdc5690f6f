#include "refinet/backend/ops.hpp"

#include <cmath>
#include <initializer_list>
#include <type_traits>
#include <utility>

#include "refinet/backend/kernels.hpp"
#include "refinet/backend/kernels_scalar.hpp"

namespace refinet {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::Node<T>>;

// Float goes through the runtime-selected table, double through the reference.
template <typename T>
struct Route {
  static void conv_forward(const T* in, const T* w, const T* b, T* out, const kernels::ConvDims& d) {
    kernels::scalar::conv3x3_forward(in, w, b, out, d);
  }
  static void conv_backward_input(const T* go, const T* w, T* gi, const kernels::ConvDims& d) {
    kernels::scalar::conv3x3_backward_input(go, w, gi, d);
  }
  static void conv_backward_weight(const T* in, const T* go, T* gw, T* gb,
                                   const kernels::ConvDims& d) {
    kernels::scalar::conv3x3_backward_weight(in, go, gw, gb, d);
  }
  static T dot(const T* a, const T* b, std::size_t n) { return kernels::scalar::dot(a, b, n); }
  static void axpy(T alpha, const T* x, T* y, std::size_t n) { kernels::scalar::axpy(alpha, x, y, n); }
  static T abs_diff_sum(const T* a, const T* b, std::size_t n) {
    return kernels::scalar::abs_diff_sum(a, b, n);
  }
  static void abs_diff_backward(const T* a, const T* b, T scale, T* ga, T* gb, std::size_t n) {
    kernels::scalar::abs_diff_backward(a, b, scale, ga, gb, n);
  }
};

template <>
struct Route<float> {
  static void conv_forward(const float* in, const float* w, const float* b, float* out,
                           const kernels::ConvDims& d) {
    kernels::active().conv3x3_forward(in, w, b, out, d);
  }
  static void conv_backward_input(const float* go, const float* w, float* gi,
                                  const kernels::ConvDims& d) {
    kernels::active().conv3x3_backward_input(go, w, gi, d);
  }
  static void conv_backward_weight(const float* in, const float* go, float* gw, float* gb,
                                   const kernels::ConvDims& d) {
    kernels::active().conv3x3_backward_weight(in, go, gw, gb, d);
  }
  static float dot(const float* a, const float* b, std::size_t n) {
    return kernels::active().dot(a, b, n);
  }
  static void axpy(float alpha, const float* x, float* y, std::size_t n) {
    kernels::active().axpy(alpha, x, y, n);
  }
  static float abs_diff_sum(const float* a, const float* b, std::size_t n) {
    return kernels::active().abs_diff_sum(a, b, n);
  }
  static void abs_diff_backward(const float* a, const float* b, float scale, float* ga, float* gb,
                                std::size_t n) {
    kernels::active().abs_diff_backward(a, b, scale, ga, gb, n);
  }
};

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> values,
                           std::initializer_list<const BasicTensor<T>*> inputs) {
  auto out = BasicTensor<T>::from_data(shape, std::move(values));
  bool track = false;
  for (const auto* in : inputs) track = track || in->requires_grad();
  if (track) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const auto* in : inputs) node.parents.push_back(in->node());
  }
  return out;
}

template <typename T>
T* grad_target(const NodePtr<T>& node) {
  if (!node->requires_grad) return nullptr;
  node->ensure_grad();
  return node->grad.data();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

}  // namespace

template <typename T>
BasicTensor<T> conv3x3(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                       const BasicTensor<T>& bias) {
  const Shape& s = input.shape();
  const Shape& ws = weight.shape();
  require(ws.h == 3 && ws.w == 3,
          "conv3x3: weight must be (out, in, 3, 3), got " + ws.str());
  require(ws.c == s.c, "conv3x3: input has " + std::to_string(s.c) + " channels but weight " +
                           ws.str() + " expects " + std::to_string(ws.c));
  require(bias.shape() == Shape{ws.n, 1, 1, 1},
          "conv3x3: bias must be (" + std::to_string(ws.n) + ", 1, 1, 1), got " +
              bias.shape().str());

  const kernels::ConvDims dims{s.n, s.c, ws.n, s.h, s.w};
  const Shape out_shape{s.n, ws.n, s.h, s.w};
  std::vector<T> out(out_shape.size());
  Route<T>::conv_forward(input.data().data(), weight.data().data(), bias.data().data(), out.data(),
                         dims);
  auto result = make_result(out_shape, std::move(out), {&input, &weight, &bias});
  if (result.requires_grad()) {
    result.node()->backward = [in = input.node(), w = weight.node(), b = bias.node(),
                               dims](std::span<const T> g) {
      if (T* gi = grad_target(in)) Route<T>::conv_backward_input(g.data(), w->data->data(), gi, dims);
      T* gw = grad_target(w);
      T* gb = grad_target(b);
      if (gw != nullptr || gb != nullptr)
        Route<T>::conv_backward_weight(in->data->data(), g.data(), gw, gb, dims);
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> elu(const BasicTensor<T>& x) {
  const auto xs = x.data();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] > T(0) ? xs[i] : std::expm1(xs[i]);
  auto result = make_result(x.shape(), std::move(out), {&x});
  if (result.requires_grad()) {
    // d/dx = 1 for x > 0, exp(x) = elu(x) + 1 otherwise
    result.node()->backward = [in = x.node(), y = result.node()->data](std::span<const T> g) {
      T* gi = grad_target(in);
      const auto& xv = *in->data;
      const auto& yv = *y;
      for (std::size_t i = 0; i < g.size(); ++i)
        gi[i] += xv[i] > T(0) ? g[i] : g[i] * (yv[i] + T(1));
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> resize_nearest(const BasicTensor<T>& x, std::size_t factor, ResizeDirection dir) {
  if (factor == 0) throw ShapeError("resize_nearest: factor must be >= 1");
  const Shape s = x.shape();
  if (dir == ResizeDirection::Down)
    require(s.h % factor == 0 && s.w % factor == 0,
            "resize_nearest: " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                " is not divisible by downsample factor " + std::to_string(factor));
  const bool up = dir == ResizeDirection::Up;
  const Shape os{s.n, s.c, up ? s.h * factor : s.h / factor, up ? s.w * factor : s.w / factor};
  const std::size_t planes = s.n * s.c;
  // Source index in x for every output element.
  auto source = [=](std::size_t p, std::size_t y, std::size_t xo) {
    const std::size_t sy = up ? y / factor : y * factor;
    const std::size_t sx = up ? xo / factor : xo * factor;
    return (p * s.h + sy) * s.w + sx;
  };
  const auto xs = x.data();
  std::vector<T> out(os.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < os.h; ++y)
      for (std::size_t xo = 0; xo < os.w; ++xo) out[(p * os.h + y) * os.w + xo] = xs[source(p, y, xo)];
  auto result = make_result(os, std::move(out), {&x});
  if (result.requires_grad()) {
    result.node()->backward = [in = x.node(), source, os, planes](std::span<const T> g) {
      T* gi = grad_target(in);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < os.h; ++y)
          for (std::size_t xo = 0; xo < os.w; ++xo)
            gi[source(p, y, xo)] += g[(p * os.h + y) * os.w + xo];
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& bias) {
  const std::size_t batch = x.shape().n;
  const std::size_t in_dim = x.shape().per_sample();
  const Shape& ws = weight.shape();
  const std::size_t out_dim = ws.n;
  require(ws.h == 1 && ws.w == 1, "fully_connected: weight must be (out, in, 1, 1), got " + ws.str());
  require(ws.c == in_dim, "fully_connected: input has " + std::to_string(in_dim) +
                              " features per sample but weight " + ws.str() + " expects " +
                              std::to_string(ws.c));
  require(bias.shape() == Shape{out_dim, 1, 1, 1},
          "fully_connected: bias must be (" + std::to_string(out_dim) + ", 1, 1, 1), got " +
              bias.shape().str());

  const T* xv = x.data().data();
  const T* wv = weight.data().data();
  const T* bv = bias.data().data();
  std::vector<T> out(batch * out_dim);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < out_dim; ++m)
      out[b * out_dim + m] = Route<T>::dot(xv + b * in_dim, wv + m * in_dim, in_dim) + bv[m];
  auto result = make_result(Shape{batch, out_dim, 1, 1}, std::move(out), {&x, &weight, &bias});
  if (result.requires_grad()) {
    result.node()->backward = [xn = x.node(), wn = weight.node(), bn = bias.node(), batch, in_dim,
                               out_dim](std::span<const T> g) {
      const T* xd = xn->data->data();
      const T* wd = wn->data->data();
      if (T* gx = grad_target(xn))
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t m = 0; m < out_dim; ++m)
            Route<T>::axpy(g[b * out_dim + m], wd + m * in_dim, gx + b * in_dim, in_dim);
      if (T* gw = grad_target(wn))
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t m = 0; m < out_dim; ++m)
            Route<T>::axpy(g[b * out_dim + m], xd + b * in_dim, gw + m * in_dim, in_dim);
      if (T* gb = grad_target(bn))
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t m = 0; m < out_dim; ++m) gb[m] += g[b * out_dim + m];
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  require(shape.size() == x.size(),
          "reshape: cannot view " + x.shape().str() + " as " + shape.str());
  const auto xs = x.data();
  auto result = make_result(shape, std::vector<T>(xs.begin(), xs.end()), {&x});
  if (result.requires_grad()) {
    result.node()->backward = [in = x.node()](std::span<const T> g) {
      T* gi = grad_target(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
          "concat_channels: " + sa.str() + " and " + sb.str() + " differ outside the channel axis");
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t na = sa.per_sample();
  const std::size_t nb = sb.per_sample();
  std::vector<T> out;
  out.reserve(os.size());
  for (std::size_t i = 0; i < sa.n; ++i) {
    out.insert(out.end(), a.data().begin() + i * na, a.data().begin() + (i + 1) * na);
    out.insert(out.end(), b.data().begin() + i * nb, b.data().begin() + (i + 1) * nb);
  }
  auto result = make_result(os, std::move(out), {&a, &b});
  if (result.requires_grad()) {
    result.node()->backward = [an = a.node(), bn = b.node(), na, nb, batch = sa.n](std::span<const T> g) {
      T* ga = grad_target(an);
      T* gb = grad_target(bn);
      for (std::size_t i = 0; i < batch; ++i) {
        const T* src = g.data() + i * (na + nb);
        if (ga != nullptr)
          for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += src[j];
        if (gb != nullptr)
          for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += src[na + j];
      }
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> l1_mean(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(),
          "l1_mean: shapes differ, " + a.shape().str() + " vs " + b.shape().str());
  const std::size_t n = a.size();
  const T total = Route<T>::abs_diff_sum(a.data().data(), b.data().data(), n);
  auto result = make_result(Shape{}, std::vector<T>{total / static_cast<T>(n)}, {&a, &b});
  if (result.requires_grad()) {
    result.node()->backward = [an = a.node(), bn = b.node(), n](std::span<const T> g) {
      const T scale = g[0] / static_cast<T>(n);
      Route<T>::abs_diff_backward(an->data->data(), bn->data->data(), scale, grad_target(an),
                                  grad_target(bn), n);
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> axpby(const BasicTensor<T>& a, T alpha, const BasicTensor<T>& b, T beta) {
  require(a.shape() == b.shape(),
          "axpby: shapes differ, " + a.shape().str() + " vs " + b.shape().str());
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * a.data()[i] + beta * b.data()[i];
  auto result = make_result(a.shape(), std::move(out), {&a, &b});
  if (result.requires_grad()) {
    result.node()->backward = [an = a.node(), bn = b.node(), alpha, beta](std::span<const T> g) {
      if (T* ga = grad_target(an))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
      if (T* gb = grad_target(bn))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += beta * g[i];
    };
  }
  return result;
}

template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& x, std::span<const T> weights) {
  require(weights.size() == x.size(), "weighted_sum: " + std::to_string(weights.size()) +
                                          " weights for " + std::to_string(x.size()) + " values");
  T acc = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) acc += x.data()[i] * weights[i];
  auto result = make_result(Shape{}, std::vector<T>{acc}, {&x});
  if (result.requires_grad()) {
    result.node()->backward = [in = x.node(), w = std::vector<T>(weights.begin(), weights.end())](
                                  std::span<const T> g) {
      T* gi = grad_target(in);
      for (std::size_t i = 0; i < w.size(); ++i) gi[i] += g[0] * w[i];
    };
  }
  return result;
}

#define REFINET_INSTANTIATE_OPS(T)                                                              \
  template BasicTensor<T> conv3x3(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                  const BasicTensor<T>&);                                        \
  template BasicTensor<T> elu(const BasicTensor<T>&);                                            \
  template BasicTensor<T> resize_nearest(const BasicTensor<T>&, std::size_t, ResizeDirection);   \
  template BasicTensor<T> fully_connected(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                          const BasicTensor<T>&);                                \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                 \
  template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> l1_mean(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> axpby(const BasicTensor<T>&, T, const BasicTensor<T>&, T);            \
  template BasicTensor<T> weighted_sum(const BasicTensor<T>&, std::span<const T>);

REFINET_INSTANTIATE_OPS(float)
REFINET_INSTANTIATE_OPS(double)

#undef REFINET_INSTANTIATE_OPS

}  // namespace refinet
