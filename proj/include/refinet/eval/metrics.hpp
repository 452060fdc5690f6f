#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refinet/backend/tensor.hpp"
#include "refinet/data/image.hpp"
#include "refinet/models/model_graph.hpp"

namespace refinet {

/// 10 log10(peak^2 / MSE) with peak = 2 (the [-1, 1] range). Identical
/// inputs give +infinity.
double psnr(const Tensor& a, const Tensor& b);
/// "inf" for the identical-input sentinel, otherwise %.6f.
std::string format_psnr(double db);

struct EvalRecord {
  std::string id;
  double l1_hr = 0.0;        // refined vs. the target-resolution source
  double l1_input_up = 0.0;  // refined vs. the lowest level upsampled to target
  double psnr_hr = 0.0;
  std::string variant;

  static std::string csv_header();
  std::string csv_row() const;
};

struct NamedImage {
  std::string id;
  Image8 image;
};

/// Images from `dir` (sorted by file name), center-cropped and resized to
/// `res` (0 keeps the cropped size). Throws IoError if the directory holds
/// no decodable image.
std::vector<NamedImage> load_named_images(const std::filesystem::path& dir, std::size_t res);

/// Refine each image with the generator, write <id>_refined.png into
/// out_dir and return one record per image in input order. Inputs must
/// already be at the generator's target resolution.
std::vector<EvalRecord> evaluate(const ModelGraph& generator, const std::vector<NamedImage>& inputs,
                                 const std::filesystem::path& out_dir);

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

}  // namespace refinet
