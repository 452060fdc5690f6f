#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "refinet/backend/tensor.hpp"

namespace refinet {

/// 8-bit interleaved RGB image.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

/// [0, 255] -> [-1, 1]
float normalize(std::uint8_t v);
/// Clamp to [-1, 1], then invert normalize() with rounding. NaN maps to 0.
std::uint8_t denormalize(float v);

/// Decode any 8/16-bit PNG (gray, RGB, palette, alpha) to RGB. Throws IoError.
Image8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image8& image);

Image8 center_crop_square(const Image8& image);
/// Nearest-neighbour resample to size x size (source index floor(i * src / dst)).
Image8 resize_nearest_image(const Image8& image, std::size_t size);

/// (1, 3, H, W) normalized tensor.
Tensor image_to_tensor(const Image8& image);
/// Sample `index` of an (N, 3, H, W) tensor, denormalized.
Image8 tensor_to_image(const Tensor& t, std::size_t index = 0);

}  // namespace refinet
