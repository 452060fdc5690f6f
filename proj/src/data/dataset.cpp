#include "refinet/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>

namespace refinet {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(std::mt19937_64& rng, std::size_t bound) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

}  // namespace

Dataset::Dataset(std::size_t target_res, std::vector<std::string> ids, std::vector<float> pixels)
    : target_res_(target_res), ids_(std::move(ids)), pixels_(std::move(pixels)) {
  if (ids_.empty()) throw ConfigError("dataset must contain at least one image");
  if (pixels_.size() != ids_.size() * 3 * target_res * target_res)
    throw ShapeError("dataset pixel buffer does not match " + std::to_string(ids_.size()) +
                     " images at " + std::to_string(target_res));
}

Tensor Dataset::item(std::size_t i) const {
  const std::size_t i_arr[] = {i};
  return gather(i_arr);
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t per = 3 * target_res_ * target_res_;
  std::vector<float> values;
  values.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("dataset index " + std::to_string(i));
    values.insert(values.end(), pixels_.begin() + i * per, pixels_.begin() + (i + 1) * per);
  }
  return Tensor::from_data(Shape{indices.size(), 3, target_res_, target_res_}, std::move(values));
}

Dataset load_image_dir(const std::filesystem::path& dir, std::size_t target_res,
                       std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("image directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  if (files.empty()) throw IoError("image directory is empty: " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<std::string> ids;
  std::vector<float> pixels;
  for (const auto& f : files) {
    Image8 img;
    try {
      img = read_png(f);
    } catch (const IoError& e) {
      const std::string msg = std::string("skipping ") + e.what();
      if (warnings != nullptr)
        warnings->push_back(msg);
      else
        std::cerr << "warning: " << msg << "\n";
      continue;
    }
    const Image8 square = resize_nearest_image(center_crop_square(img), target_res);
    const Tensor t = image_to_tensor(square);
    pixels.insert(pixels.end(), t.data().begin(), t.data().end());
    ids.push_back(f.stem().string());
  }
  if (ids.empty()) throw IoError("no decodable images in " + dir.string());
  return Dataset(target_res, std::move(ids), std::move(pixels));
}

Image8 make_toy_image(std::size_t res, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image8 img{res, res, std::vector<std::uint8_t>(res * res * 3)};
  const double cx = unit(rng), cy = unit(rng);
  const double radius = 0.4 + 0.8 * unit(rng);
  double inner[3], outer[3];
  for (auto& v : inner) v = unit(rng);
  for (auto& v : outer) v = unit(rng);
  for (std::size_t y = 0; y < res; ++y)
    for (std::size_t x = 0; x < res; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(res);
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(res);
      const double t = std::min(1.0, std::hypot(px - cx, py - cy) / radius);
      for (std::size_t c = 0; c < 3; ++c)
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(255.0 * (inner[c] + t * (outer[c] - inner[c]))));
    }
  const std::size_t rects = 1 + below(rng, 3);
  for (std::size_t r = 0; r < rects; ++r) {
    const double x0 = unit(rng), y0 = unit(rng);
    const double w = 0.1 + 0.4 * unit(rng), h = 0.1 + 0.4 * unit(rng);
    std::uint8_t color[3];
    for (auto& c : color) c = static_cast<std::uint8_t>(below(rng, 256));
    const auto lo_x = static_cast<std::size_t>(x0 * static_cast<double>(res));
    const auto lo_y = static_cast<std::size_t>(y0 * static_cast<double>(res));
    const auto hi_x = std::min(res, static_cast<std::size_t>((x0 + w) * static_cast<double>(res)) + 1);
    const auto hi_y = std::min(res, static_cast<std::size_t>((y0 + h) * static_cast<double>(res)) + 1);
    for (std::size_t y = lo_y; y < hi_y; ++y)
      for (std::size_t x = lo_x; x < hi_x; ++x)
        for (std::size_t c = 0; c < 3; ++c) img.at(x, y, c) = color[c];
  }
  return img;
}

Dataset make_toy_dataset(std::size_t count, std::size_t res, std::uint64_t seed) {
  std::vector<std::string> ids;
  std::vector<float> pixels;
  pixels.reserve(count * 3 * res * res);
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor t = image_to_tensor(make_toy_image(res, splitmix64(seed ^ splitmix64(i))));
    pixels.insert(pixels.end(), t.data().begin(), t.data().end());
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%04zu", i);
    ids.emplace_back(name);
  }
  return Dataset(res, std::move(ids), std::move(pixels));
}

void write_toy_images(const std::filesystem::path& dir, std::size_t count, std::size_t res,
                      std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "toy_%04zu.png", i);
    write_png(dir / name, make_toy_image(res, splitmix64(seed ^ splitmix64(i))));
  }
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(splitmix64(seed) ^ splitmix64(~epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[below(rng, i)]);
  return order;
}

EpochBatches::EpochBatches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                           std::uint64_t epoch, std::size_t lowest_res)
    : ds_(&ds), batch_size_(batch_size), lowest_res_(lowest_res),
      order_(epoch_permutation(ds.size(), seed, epoch)) {}

std::span<const std::size_t> EpochBatches::indices(std::size_t b) const {
  if (b >= size()) throw std::out_of_range("batch index " + std::to_string(b));
  return std::span<const std::size_t>(order_).subspan(b * batch_size_, batch_size_);
}

Batch EpochBatches::operator[](std::size_t b) const {
  const auto idx = indices(b);
  Batch batch;
  batch.indices.assign(idx.begin(), idx.end());
  batch.pyramid = make_pyramid(ds_->gather(idx), lowest_res_);
  return batch;
}

EpochBatches batch_iter(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                        std::uint64_t epoch, std::size_t lowest_res) {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (batch_size > ds.size())
    throw ConfigError("batch_size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(ds.size()));
  return EpochBatches(ds, batch_size, seed, epoch, lowest_res);
}

}  // namespace refinet
