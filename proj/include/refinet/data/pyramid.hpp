#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "refinet/backend/tensor.hpp"

namespace refinet {

/// Progressively downscaled copies of an image batch, standing in for the
/// noise latent. levels[i] has resolution lowest_res << i and the full
/// ladder stops at target_res / 2. Inputs refined without ground truth may
/// carry a truncated ladder and no source.
template <typename T>
struct BasicImagePyramid {
  std::size_t lowest_res = 0;
  std::size_t target_res = 0;
  std::vector<BasicTensor<T>> levels;
  std::optional<BasicTensor<T>> source_hr;

  std::size_t batch() const { return levels.empty() ? 0 : levels.front().shape().n; }
  /// Level at the given resolution, or nullptr if the ladder does not reach it.
  const BasicTensor<T>* level(std::size_t res) const;
};

using ImagePyramid = BasicImagePyramid<float>;

bool is_power_of_two(std::size_t v);

/// Build the full ladder lowest_res .. target_res/2 from a (N, C, R, R) batch by
/// repeated x2 nearest-neighbour downsampling. The source is kept as source_hr.
template <typename T>
BasicImagePyramid<T> make_pyramid(const BasicTensor<T>& image, std::size_t lowest_res);

/// Ladder for an input with no ground truth: the image itself becomes the
/// highest available level (its resolution must be a power of two between
/// lowest_res and target_res / 2) and smaller levels are derived from it.
template <typename T>
BasicImagePyramid<T> make_partial_pyramid(const BasicTensor<T>& image, std::size_t lowest_res,
                                          std::size_t target_res);

}  // namespace refinet
