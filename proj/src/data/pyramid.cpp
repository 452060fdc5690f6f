#include "refinet/data/pyramid.hpp"

#include <string>

#include "refinet/backend/ops.hpp"

namespace refinet {

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

template <typename T>
const BasicTensor<T>* BasicImagePyramid<T>::level(std::size_t res) const {
  std::size_t r = lowest_res;
  for (const auto& lvl : levels) {
    if (r == res) return &lvl;
    r *= 2;
  }
  return nullptr;
}

namespace {

void check_resolutions(std::size_t lowest_res, std::size_t target_res) {
  if (!is_power_of_two(lowest_res) || !is_power_of_two(target_res))
    throw ConfigError("pyramid resolutions must be powers of two (lowest " +
                      std::to_string(lowest_res) + ", target " + std::to_string(target_res) + ")");
  if (lowest_res > target_res / 2)
    throw ConfigError("lowest resolution " + std::to_string(lowest_res) +
                      " must be at most half the target resolution " + std::to_string(target_res));
}

template <typename T>
void check_square(const BasicTensor<T>& image) {
  if (image.shape().h != image.shape().w)
    throw ShapeError("pyramid source must be square, got " + image.shape().str());
}

// Ladder from `top` (resolution top_res) down to lowest_res, ascending order.
template <typename T>
std::vector<BasicTensor<T>> ladder_below(const BasicTensor<T>& top, std::size_t top_res,
                                         std::size_t lowest_res, bool include_top) {
  std::vector<BasicTensor<T>> descending;
  BasicTensor<T> cur = top.detach();
  if (include_top) descending.push_back(cur);
  for (std::size_t r = top_res; r > lowest_res; r /= 2) {
    cur = resize_nearest(cur, 2, ResizeDirection::Down);
    descending.push_back(cur);
  }
  return {descending.rbegin(), descending.rend()};
}

}  // namespace

template <typename T>
BasicImagePyramid<T> make_pyramid(const BasicTensor<T>& image, std::size_t lowest_res) {
  check_square(image);
  const std::size_t target = image.shape().h;
  check_resolutions(lowest_res, target);
  BasicImagePyramid<T> p;
  p.lowest_res = lowest_res;
  p.target_res = target;
  p.levels = ladder_below(image, target, lowest_res, false);
  p.source_hr = image.detach();
  return p;
}

template <typename T>
BasicImagePyramid<T> make_partial_pyramid(const BasicTensor<T>& image, std::size_t lowest_res,
                                          std::size_t target_res) {
  check_square(image);
  check_resolutions(lowest_res, target_res);
  const std::size_t res = image.shape().h;
  if (!is_power_of_two(res) || res < lowest_res || res > target_res / 2)
    throw ConfigError("input resolution " + std::to_string(res) + " must be a power of two in [" +
                      std::to_string(lowest_res) + ", " + std::to_string(target_res / 2) + "]");
  BasicImagePyramid<T> p;
  p.lowest_res = lowest_res;
  p.target_res = target_res;
  p.levels = ladder_below(image, res, lowest_res, true);
  return p;
}

template struct BasicImagePyramid<float>;
template struct BasicImagePyramid<double>;
template BasicImagePyramid<float> make_pyramid(const BasicTensor<float>&, std::size_t);
template BasicImagePyramid<double> make_pyramid(const BasicTensor<double>&, std::size_t);
template BasicImagePyramid<float> make_partial_pyramid(const BasicTensor<float>&, std::size_t,
                                                       std::size_t);
template BasicImagePyramid<double> make_partial_pyramid(const BasicTensor<double>&, std::size_t,
                                                        std::size_t);

}  // namespace refinet
