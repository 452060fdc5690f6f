#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refinet/backend/tensor.hpp"
#include "refinet/data/image.hpp"
#include "refinet/data/pyramid.hpp"

namespace refinet {

/// Immutable set of normalized square RGB images at one resolution.
class Dataset {
 public:
  Dataset(std::size_t target_res, std::vector<std::string> ids, std::vector<float> pixels);

  std::size_t size() const { return ids_.size(); }
  std::size_t target_res() const { return target_res_; }
  const std::vector<std::string>& ids() const { return ids_; }
  /// (1, 3, R, R) copy of item i.
  Tensor item(std::size_t i) const;
  /// (k, 3, R, R) stack of the given items, in order.
  Tensor gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t target_res_;
  std::vector<std::string> ids_;
  std::vector<float> pixels_;
};

/// Decode every file in `dir` (sorted by name), center-crop, resize to
/// target_res. Undecodable files are skipped and reported through
/// `warnings` (or stderr when null). Throws IoError if nothing decodes.
Dataset load_image_dir(const std::filesystem::path& dir, std::size_t target_res,
                       std::vector<std::string>* warnings = nullptr);

/// Procedural image: smooth radial gradient plus 1-3 solid rectangles.
Image8 make_toy_image(std::size_t res, std::uint64_t seed);
/// `count` toy images; item i uses seed derived from (seed, i).
Dataset make_toy_dataset(std::size_t count, std::size_t res, std::uint64_t seed);
/// Write toy images as toy_0000.png ... into `dir`.
void write_toy_images(const std::filesystem::path& dir, std::size_t count, std::size_t res,
                      std::uint64_t seed);

/// Deterministic permutation of [0, n) for (seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

struct Batch {
  std::vector<std::size_t> indices;
  ImagePyramid pyramid;  // source_hr holds the real images
};

/// Batches of one epoch in permutation order; the partial tail is dropped.
class EpochBatches {
 public:
  EpochBatches(const Dataset& ds, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch,
               std::size_t lowest_res);

  std::size_t size() const { return order_.size() / batch_size_; }
  std::span<const std::size_t> indices(std::size_t b) const;
  Batch operator[](std::size_t b) const;

 private:
  const Dataset* ds_;
  std::size_t batch_size_;
  std::size_t lowest_res_;
  std::vector<std::size_t> order_;
};

/// Throws ConfigError when batch_size is 0 or exceeds the dataset size.
EpochBatches batch_iter(const Dataset& ds, std::size_t batch_size, std::uint64_t seed,
                        std::uint64_t epoch, std::size_t lowest_res);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace refinet
