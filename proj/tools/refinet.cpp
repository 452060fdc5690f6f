// refinet command-line entry point.
//
// Exit codes: 0 ok, 1 config or input error, 2 numeric abort, 3 gradcheck
// failure. Every subcommand that writes files stages them in a sibling
// directory and renames it into place only on success.

#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <set>
#include <string>

#include "refinet/backend/errors.hpp"
#include "refinet/backend/gradcheck.hpp"
#include "refinet/backend/kernels.hpp"
#include "refinet/data/dataset.hpp"
#include "refinet/data/image.hpp"
#include "refinet/data/pyramid.hpp"
#include "refinet/eval/metrics.hpp"
#include "refinet/training/checkpoint.hpp"
#include "refinet/training/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace refinet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitGradcheck = 3;

struct GradcheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Keys a train config may carry besides the training keys.
const std::set<std::string> kRunKeys{"data_dir", "output_dir", "toy_images", "toy_seed", "resume"};

json read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  try {
    json j = json::parse(f);
    if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

template <typename T>
void overlay(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::string require_string(const json& j, const char* key, const char* what) {
  if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty())
    throw ConfigError(std::string("missing ") + what + " ('" + key + "')");
  return j.at(key).get<std::string>();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

/// Output directory built under a temporary sibling name and moved into place
/// by commit(). Destruction without commit() removes the partial output.
class StagedDir {
 public:
  explicit StagedDir(const fs::path& final_dir) : final_(fs::absolute(final_dir)) {
    if (fs::exists(final_) && !(fs::is_directory(final_) && fs::is_empty(final_)))
      throw ConfigError("output directory " + final_.string() + " already exists and is not empty");
    fs::create_directories(final_.parent_path());
    staging_ = final_.parent_path() /
               ("." + final_.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const fs::path& path() const { return staging_; }
  const fs::path& final_path() const { return final_; }
  void commit() {
    if (fs::exists(final_)) fs::remove(final_);  // empty, checked above
    fs::rename(staging_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path staging_;
  bool committed_ = false;
};

// ---- train -----------------------------------------------------------------

struct TrainFlags {
  std::string config;
  std::optional<std::string> data_dir, output_dir, resume, variant;
  std::optional<std::size_t> toy_images, batch_size, target_res, lowest_res, base_filters,
      embedding_dim, convs_per_block;
  std::optional<std::uint64_t> toy_seed, total_steps, seed, checkpoint_every, log_every;
  std::optional<double> gamma, lambda_k, lambda_r, lr;
  bool quiet = false;
};

void add_train_options(CLI::App& cmd, TrainFlags& f) {
  cmd.add_option("--config", f.config, "JSON run config");
  cmd.add_option("--data-dir", f.data_dir, "Directory of training PNGs");
  cmd.add_option("--toy-images", f.toy_images, "Use N procedural images instead of --data-dir");
  cmd.add_option("--toy-seed", f.toy_seed, "Seed of the procedural images");
  cmd.add_option("--output-dir", f.output_dir, "Run directory (created)");
  cmd.add_option("--resume", f.resume, "Continue from a checkpoint");
  cmd.add_option("--gamma", f.gamma);
  cmd.add_option("--lambda-k", f.lambda_k);
  cmd.add_option("--lambda-r", f.lambda_r);
  cmd.add_option("--lr", f.lr);
  cmd.add_option("--batch-size", f.batch_size);
  cmd.add_option("--total-steps", f.total_steps);
  cmd.add_option("--seed", f.seed);
  cmd.add_option("--target-res", f.target_res);
  cmd.add_option("--lowest-res", f.lowest_res);
  cmd.add_option("--variant", f.variant)->check(CLI::IsMember({"A", "B", "C"}));
  cmd.add_option("--base-filters", f.base_filters);
  cmd.add_option("--embedding-dim", f.embedding_dim);
  cmd.add_option("--convs-per-block", f.convs_per_block);
  cmd.add_option("--checkpoint-every", f.checkpoint_every);
  cmd.add_option("--log-every", f.log_every);
  cmd.add_flag("--quiet", f.quiet, "No progress lines");
}

json resolve_train_config(const TrainFlags& f) {
  json j = f.config.empty() ? json::object() : read_config_file(f.config);
  overlay(j, "data_dir", f.data_dir);
  overlay(j, "toy_images", f.toy_images);
  overlay(j, "toy_seed", f.toy_seed);
  overlay(j, "output_dir", f.output_dir);
  overlay(j, "resume", f.resume);
  overlay(j, "gamma", f.gamma);
  overlay(j, "lambda_k", f.lambda_k);
  overlay(j, "lambda_r", f.lambda_r);
  overlay(j, "lr", f.lr);
  overlay(j, "batch_size", f.batch_size);
  overlay(j, "total_steps", f.total_steps);
  overlay(j, "seed", f.seed);
  overlay(j, "target_res", f.target_res);
  overlay(j, "lowest_res", f.lowest_res);
  overlay(j, "variant", f.variant);
  overlay(j, "base_filters", f.base_filters);
  overlay(j, "embedding_dim", f.embedding_dim);
  overlay(j, "convs_per_block", f.convs_per_block);
  overlay(j, "checkpoint_every", f.checkpoint_every);
  overlay(j, "log_every", f.log_every);
  if (!j.contains("seed")) {
    if (const char* env = std::getenv("REFINET_SEED")) {
      try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        j["seed"] = static_cast<std::uint64_t>(v);
      } catch (const std::exception&) {
        throw ConfigError(std::string("REFINET_SEED is not an unsigned integer: '") + env + "'");
      }
    }
  }
  return j;
}

TrainConfig split_train_config(const json& j) {
  json train_keys = json::object();
  for (const auto& [key, value] : j.items())
    if (!kRunKeys.contains(key)) train_keys[key] = value;
  return train_keys.get<TrainConfig>();
}

// Rows of an earlier log up to and including `step`, header first.
void seed_log_from(const fs::path& source, const fs::path& dest, std::uint64_t step) {
  std::ofstream out(dest, std::ios::trunc);
  if (!out) throw IoError("cannot write " + dest.string());
  out << LossReport::csv_header() << "\n";
  std::ifstream in(source);
  if (!in) return;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) > step) break;
    out << line << "\n";
  }
}

int cmd_train(const TrainFlags& f) {
  json resolved = resolve_train_config(f);
  const TrainConfig cfg = split_train_config(resolved);
  cfg.validate();
  const std::string out_dir = require_string(resolved, "output_dir", "output directory");

  TrainState state;
  std::optional<fs::path> resume_from;
  if (resolved.contains("resume")) {
    resume_from = resolved.at("resume").get<std::string>();
    state = load_checkpoint(*resume_from);
    TrainConfig stored = state.config;
    stored.total_steps = cfg.total_steps;
    stored.checkpoint_every = cfg.checkpoint_every;
    stored.log_every = cfg.log_every;
    if (!(stored == cfg))
      throw ConfigError("resume config differs from the checkpoint's training config "
                        "(only total_steps, checkpoint_every and log_every may change)");
    state.config = stored;
    if (state.step > cfg.total_steps)
      throw ConfigError("checkpoint is at step " + std::to_string(state.step) +
                        ", beyond total_steps " + std::to_string(cfg.total_steps));
  } else {
    state = TrainState::initialize(cfg);
  }

  Dataset ds = [&] {
    if (resolved.contains("data_dir")) {
      const std::string dir = require_string(resolved, "data_dir", "data directory");
      std::vector<std::string> warnings;
      Dataset d = load_image_dir(dir, cfg.target_res, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      return d;
    }
    const std::size_t n = resolved.value("toy_images", std::size_t{0});
    if (n == 0) throw ConfigError("missing data directory ('data_dir'), or set toy_images");
    return make_toy_dataset(n, cfg.target_res, resolved.value("toy_seed", std::uint64_t{0}));
  }();

  // Echo every key, defaults included, so the file reproduces this run.
  json echo = cfg;
  for (const auto& key : kRunKeys)
    if (resolved.contains(key)) echo[key] = resolved.at(key);

  StagedDir out(out_dir);
  write_json(out.path() / "resolved_config.json", echo);
  const fs::path log_path = out.path() / "metrics.csv";
  if (resume_from) seed_log_from(resume_from->parent_path() / "metrics.csv", log_path, state.step);

  const std::uint64_t report_every = std::max<std::uint64_t>(1, cfg.total_steps / 10);
  TrainOutput to{out.path(), log_path, resume_from.has_value(), [&](const LossReport& r) {
                   if (!f.quiet && (r.step % report_every == 0 || r.step == cfg.total_steps))
                     std::printf("step %llu  L_D %.5f  L_G %.5f  L_rcn %.5f  k_t %.5f  M %.5f\n",
                                 static_cast<unsigned long long>(r.step), r.L_D, r.L_G, r.L_rcn,
                                 r.k_t, r.M);
                 }};
  train(state, ds, to);
  out.commit();
  if (!f.quiet) std::printf("wrote %s\n", out.final_path().c_str());
  return kExitOk;
}

// ---- refine ----------------------------------------------------------------

struct RefineFlags {
  std::string config;
  std::optional<std::string> checkpoint, input, output_dir;
};

std::vector<fs::path> list_inputs(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw IoError("input not found: " + input.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("input directory is empty: " + input.string());
  return files;
}

ImagePyramid input_pyramid(const Image8& raw, const GeneratorConfig& g, const std::string& name) {
  Image8 img = center_crop_square(raw);
  const std::size_t res = img.width;
  if (res > g.target_res) img = resize_nearest_image(img, g.target_res);
  const Tensor t = image_to_tensor(img);
  if (img.width == g.target_res) return make_pyramid(t, g.lowest_res);
  if (!is_power_of_two(res) || res < g.lowest_res)
    throw ConfigError(name + ": " + std::to_string(res) + "x" + std::to_string(res) +
                      " input is incompatible with a model refining " + std::to_string(g.lowest_res) +
                      " -> " + std::to_string(g.target_res));
  return make_partial_pyramid(t, g.lowest_res, g.target_res);
}

int cmd_refine(const RefineFlags& f) {
  json j = f.config.empty() ? json::object() : read_config_file(f.config);
  overlay(j, "checkpoint", f.checkpoint);
  overlay(j, "input", f.input);
  overlay(j, "output_dir", f.output_dir);
  const std::string ckpt = require_string(j, "checkpoint", "checkpoint");
  const std::string input = require_string(j, "input", "input file or directory");
  const std::string out_dir = require_string(j, "output_dir", "output directory");

  const TrainState state = load_checkpoint(ckpt);
  const auto& g = state.generator.generator_config();
  const auto files = list_inputs(input);

  // Everything is validated and refined before the output directory appears.
  std::vector<std::pair<std::string, Image8>> results;
  for (const auto& file : files) {
    const ImagePyramid z = input_pyramid(read_png(file), g, file.filename().string());
    Tensor y;
    try {
      y = state.generator.forward(z, ParamMode::Frozen);
    } catch (const ShapeError& e) {
      throw ConfigError(file.filename().string() + ": " + e.what());
    }
    results.emplace_back(file.stem().string() + "_refined.png", tensor_to_image(y));
  }

  StagedDir out(out_dir);
  json echo{{"checkpoint", ckpt}, {"input", input}, {"output_dir", out_dir},
            {"train_config", state.config}, {"generator", g}};
  write_json(out.path() / "resolved_config.json", echo);
  for (const auto& [name, img] : results) write_png(out.path() / name, img);
  out.commit();
  std::printf("refined %zu image(s) into %s\n", results.size(), out.final_path().c_str());
  return kExitOk;
}

// ---- pyramid ---------------------------------------------------------------

struct PyramidFlags {
  std::string config;
  std::optional<std::string> input, output_dir;
  std::optional<std::size_t> lowest_res;
};

int cmd_pyramid(const PyramidFlags& f) {
  json j = f.config.empty() ? json::object() : read_config_file(f.config);
  overlay(j, "input", f.input);
  overlay(j, "output_dir", f.output_dir);
  overlay(j, "lowest_res", f.lowest_res);
  const std::string input = require_string(j, "input", "input image");
  const std::string out_dir = require_string(j, "output_dir", "output directory");
  const std::size_t lowest = j.value("lowest_res", std::size_t{8});

  const Image8 img = read_png(input);
  if (img.width != img.height || !is_power_of_two(img.width))
    throw ConfigError(input + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", need a square power-of-two image");
  const ImagePyramid p = make_pyramid(image_to_tensor(img), lowest);

  StagedDir out(out_dir);
  write_json(out.path() / "resolved_config.json",
             {{"input", input}, {"output_dir", out_dir}, {"lowest_res", lowest}});
  const std::string stem = fs::path(input).stem().string();
  for (const auto& level : p.levels) {
    const std::string res = std::to_string(level.shape().h);
    write_png(out.path() / (stem + "_" + res + "x" + res + ".png"), tensor_to_image(level));
  }
  out.commit();
  std::printf("wrote %zu level(s) into %s\n", p.levels.size(), out.final_path().c_str());
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckFlags {
  std::optional<std::uint64_t> seed;
  std::size_t trials = 20;
  std::string perturb_op;
};

int cmd_gradcheck(const GradcheckFlags& f) {
  GradCheckOptions opt;
  opt.trials = f.trials;
  opt.perturb_op = f.perturb_op;
  if (f.seed) {
    opt.seed = *f.seed;
  } else if (const char* env = std::getenv("REFINET_SEED")) {
    try {
      opt.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("REFINET_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  if (opt.trials == 0) throw ConfigError("trials must be at least 1");
  const auto results = run_gradcheck(opt);
  std::printf("%-22s %7s %14s %14s %s\n", "op", "trials", "max_err_f32", "max_err_f64", "status");
  std::vector<std::string> failed;
  for (const auto& r : results) {
    std::printf("%-22s %7zu %14.6e %14.6e %s\n", r.op.c_str(), r.trials, r.max_rel_error_f32,
                r.max_rel_error_f64, r.passed ? "ok" : "FAIL");
    if (!r.passed) failed.push_back(r.op);
  }
  std::printf("tolerance: f32 < %g, f64 < %g; kernels: %s\n", opt.tolerance_f32, opt.tolerance_f64,
              std::string(kernels::active().name).c_str());
  if (!failed.empty()) {
    std::string list;
    for (const auto& op : failed) list += (list.empty() ? "" : ", ") + op;
    throw GradcheckFailure("gradient check failed for: " + list);
  }
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  std::string config;
  std::optional<std::string> checkpoint, input_dir, output_dir;
};

int cmd_eval(const EvalFlags& f) {
  json j = f.config.empty() ? json::object() : read_config_file(f.config);
  overlay(j, "checkpoint", f.checkpoint);
  overlay(j, "input_dir", f.input_dir);
  overlay(j, "output_dir", f.output_dir);
  const std::string ckpt = require_string(j, "checkpoint", "checkpoint");
  const std::string input_dir = require_string(j, "input_dir", "input directory");
  const std::string out_dir = require_string(j, "output_dir", "output directory");

  const TrainState state = load_checkpoint(ckpt);
  const auto inputs = load_named_images(input_dir, 0);
  StagedDir out(out_dir);
  const auto records = evaluate(state.generator, inputs, out.path());
  write_eval_csv(out.path() / "eval.csv", records);
  write_json(out.path() / "resolved_config.json",
             {{"checkpoint", ckpt}, {"input_dir", input_dir}, {"output_dir", out_dir},
              {"train_config", state.config}});
  out.commit();
  double mean_l1 = 0.0;
  for (const auto& r : records) mean_l1 += r.l1_hr;
  std::printf("evaluated %zu image(s), mean l1_hr %.6f, wrote %s\n", records.size(),
              mean_l1 / static_cast<double>(records.size()), out.final_path().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refinet: image-conditioned BEGAN refiner"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a generator/discriminator pair");
  add_train_options(*train_cmd, train_flags);

  RefineFlags refine_flags;
  auto* refine_cmd = app.add_subcommand("refine", "Refine images with a trained generator");
  refine_cmd->add_option("--config", refine_flags.config, "JSON config");
  refine_cmd->add_option("--checkpoint", refine_flags.checkpoint, "Checkpoint file");
  refine_cmd->add_option("--input", refine_flags.input, "PNG file or directory");
  refine_cmd->add_option("--output-dir", refine_flags.output_dir, "Output directory (created)");

  PyramidFlags pyramid_flags;
  auto* pyramid_cmd = app.add_subcommand("pyramid", "Write the downscaled ladder of an image");
  pyramid_cmd->add_option("--config", pyramid_flags.config, "JSON config");
  pyramid_cmd->add_option("--input", pyramid_flags.input, "Square power-of-two PNG");
  pyramid_cmd->add_option("--lowest-res", pyramid_flags.lowest_res, "Smallest level (default 8)");
  pyramid_cmd->add_option("--output-dir", pyramid_flags.output_dir, "Output directory (created)");

  GradcheckFlags gradcheck_flags;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  gradcheck_cmd->add_option("--seed", gradcheck_flags.seed, "Trial seed");
  gradcheck_cmd->add_option("--trials", gradcheck_flags.trials, "Random cases per op");
  gradcheck_cmd->add_option("--perturb-op", gradcheck_flags.perturb_op)->group("");

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "Score refined outputs against their sources");
  eval_cmd->add_option("--config", eval_flags.config, "JSON config");
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--input-dir", eval_flags.input_dir, "Directory of PNGs");
  eval_cmd->add_option("--output-dir", eval_flags.output_dir, "Output directory (created)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*train_cmd) return cmd_train(train_flags);
    if (*refine_cmd) return cmd_refine(refine_flags);
    if (*pyramid_cmd) return cmd_pyramid(pyramid_flags);
    if (*gradcheck_cmd) return cmd_gradcheck(gradcheck_flags);
    if (*eval_cmd) return cmd_eval(eval_flags);
  } catch (const GradcheckFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGradcheck;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
