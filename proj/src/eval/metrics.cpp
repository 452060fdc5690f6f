#include "refinet/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "refinet/backend/ops.hpp"
#include "refinet/data/pyramid.hpp"

namespace refinet {

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("psnr: shapes differ, " + a.shape().str() + " vs " + b.shape().str());
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sq += d * d;
  }
  if (sq == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sq / static_cast<double>(a.size());
  return 10.0 * std::log10(4.0 / mse);
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", db);
  return buf;
}

std::string EvalRecord::csv_header() { return "id,l1_hr,l1_input_up,psnr_hr,variant"; }

std::string EvalRecord::csv_row() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.9g,%.9g", l1_hr, l1_input_up);
  return id + "," + buf + "," + format_psnr(psnr_hr) + "," + variant;
}

std::vector<NamedImage> load_named_images(const std::filesystem::path& dir, std::size_t res) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("input directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) {
    try {
      Image8 img = center_crop_square(read_png(f));
      if (res != 0) img = resize_nearest_image(img, res);
      out.push_back({f.stem().string(), std::move(img)});
    } catch (const IoError& e) {
      std::cerr << "warning: skipping " << e.what() << "\n";
    }
  }
  if (out.empty()) throw IoError("no decodable images in " + dir.string());
  return out;
}

std::vector<EvalRecord> evaluate(const ModelGraph& generator, const std::vector<NamedImage>& inputs,
                                 const std::filesystem::path& out_dir) {
  const auto& cfg = generator.generator_config();
  for (const auto& in : inputs)
    if (in.image.width != cfg.target_res || in.image.height != cfg.target_res)
      throw ConfigError("image '" + in.id + "' is " + std::to_string(in.image.width) + "x" +
                        std::to_string(in.image.height) + ", checkpoint expects " +
                        std::to_string(cfg.target_res) + "x" + std::to_string(cfg.target_res));
  std::filesystem::create_directories(out_dir);
  std::vector<EvalRecord> records;
  for (const auto& in : inputs) {
    const Tensor hr = image_to_tensor(in.image);
    const ImagePyramid z = make_pyramid(hr, cfg.lowest_res);
    // Metrics describe the image that is written, so clamp to the pixel range.
    Tensor refined = generator.forward(z, ParamMode::Frozen);
    for (auto& v : refined.data()) v = std::clamp(v, -1.0f, 1.0f);
    const Tensor input_up =
        resize_nearest(z.levels.front(), cfg.target_res / cfg.lowest_res, ResizeDirection::Up);
    EvalRecord r;
    r.id = in.id;
    r.l1_hr = l1_mean(refined, hr).item();
    r.l1_input_up = l1_mean(refined, input_up).item();
    r.psnr_hr = psnr(refined, hr);
    r.variant = to_string(cfg.variant);
    write_png(out_dir / (in.id + "_refined.png"), tensor_to_image(refined));
    records.push_back(r);
  }
  return records;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << EvalRecord::csv_header() << "\n";
  for (const auto& r : records) f << r.csv_row() << "\n";
}

}  // namespace refinet
