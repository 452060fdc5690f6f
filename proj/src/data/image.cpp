#include "refinet/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace refinet {

float normalize(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t denormalize(float v) {
  if (std::isnan(v)) return 0;
  const float clamped = std::clamp(v, -1.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround((clamped + 1.0f) * 127.5f));
}

Image8 read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&img, path.c_str()) == 0)
    throw IoError("cannot decode " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  Image8 out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr) == 0) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot decode " + path.string() + ": " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr) == 0)
    throw IoError("cannot write " + path.string() + ": " + img.message);
}

Image8 center_crop_square(const Image8& image) {
  const std::size_t side = std::min(image.width, image.height);
  const std::size_t x0 = (image.width - side) / 2;
  const std::size_t y0 = (image.height - side) / 2;
  Image8 out{side, side, std::vector<std::uint8_t>(side * side * 3)};
  for (std::size_t y = 0; y < side; ++y)
    std::memcpy(&out.pixels[y * side * 3], &image.pixels[((y0 + y) * image.width + x0) * 3], side * 3);
  return out;
}

Image8 resize_nearest_image(const Image8& image, std::size_t size) {
  Image8 out{size, size, std::vector<std::uint8_t>(size * size * 3)};
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = y * image.height / size;
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = x * image.width / size;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = image.at(sx, sy, c);
    }
  }
  return out;
}

Tensor image_to_tensor(const Image8& image) {
  const std::size_t hw = image.width * image.height;
  std::vector<float> values(3 * hw);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i) values[c * hw + i] = normalize(image.pixels[i * 3 + c]);
  return Tensor::from_data(Shape{1, 3, image.height, image.width}, std::move(values));
}

Image8 tensor_to_image(const Tensor& t, std::size_t index) {
  const Shape& s = t.shape();
  if (s.c != 3 || index >= s.n)
    throw ShapeError("tensor_to_image: need sample " + std::to_string(index) + " of an (N, 3, H, W) tensor, got " + s.str());
  const std::size_t hw = s.plane();
  const float* src = t.data().data() + index * 3 * hw;
  Image8 out{s.w, s.h, std::vector<std::uint8_t>(hw * 3)};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < hw; ++i) out.pixels[i * 3 + c] = denormalize(src[c * hw + i]);
  return out;
}

}  // namespace refinet
