#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include <json.hpp>

#include "refinet/backend/adam.hpp"
#include "refinet/data/dataset.hpp"
#include "refinet/losses/losses.hpp"
#include "refinet/models/model_graph.hpp"

namespace refinet {

struct TrainConfig {
  LossWeights weights;
  double lr = 0.001;
  std::size_t batch_size = 25;
  std::uint64_t total_steps = 1000;
  std::uint64_t seed = 0;
  std::size_t target_res = 32;
  std::size_t lowest_res = 8;
  Variant variant = Variant::B;
  std::vector<bool> injection_mask;  // empty: variant default
  std::size_t base_filters = 16;
  std::size_t embedding_dim = 64;
  std::size_t convs_per_block = 2;
  std::uint64_t checkpoint_every = 0;  // 0: only the final step
  std::uint64_t log_every = 1;

  void validate() const;
  DiscriminatorConfig discriminator() const;
  GeneratorConfig generator() const;
  AdamConfig adam() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainState {
  TrainConfig config;
  std::uint64_t step = 0;
  double k_t = 0.0;
  ModelGraph discriminator;
  ModelGraph generator;
  AdamState adam_d;
  AdamState adam_g;

  /// Fresh models from config.seed, k_0 = 0, empty optimizer moments.
  static TrainState initialize(const TrainConfig& config);
};

/// One simultaneous update of both networks from a single forward pass.
/// The pyramid's source_hr is the real batch x (and v_HR). Throws
/// NumericError, leaving the state untouched, if any loss is not finite.
LossReport train_step(TrainState& state, const ImagePyramid& batch);

/// Batch used at global step `step` (0-based): epoch = step / batches_per_epoch.
Batch batch_for_step(const Dataset& ds, const TrainConfig& cfg, std::uint64_t step);

struct TrainOutput {
  std::filesystem::path dir;           // checkpoints land here
  std::filesystem::path log_path;      // CSV metrics
  bool append_log = false;             // resume: keep existing rows
  std::function<void(const LossReport&)> on_step;
};

/// Run until state.step == state.config.total_steps, writing log rows every
/// log_every steps and checkpoints every checkpoint_every steps and at the end.
void train(TrainState& state, const Dataset& ds, const TrainOutput& out);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t step);

/// Mean L1 between G(pyramid(x)) and x over the whole dataset.
double mean_reconstruction_loss(const ModelGraph& generator, const Dataset& ds,
                                std::size_t batch_size);

}  // namespace refinet
