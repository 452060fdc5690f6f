#include "refinet/training/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "refinet/backend/ops.hpp"
#include "refinet/training/checkpoint.hpp"

namespace refinet {

void TrainConfig::validate() const {
  weights.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (total_steps == 0) throw ConfigError("total_steps must be at least 1");
  if (log_every == 0) throw ConfigError("log_every must be at least 1");
  discriminator().validate();
  generator().validate();
}

DiscriminatorConfig TrainConfig::discriminator() const {
  return DiscriminatorConfig{target_res, base_filters, embedding_dim, convs_per_block};
}

GeneratorConfig TrainConfig::generator() const {
  return GeneratorConfig{variant, target_res, base_filters, lowest_res, convs_per_block, injection_mask};
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.lr = static_cast<float>(lr);
  return a;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"gamma", c.weights.gamma},
      {"lambda_k", c.weights.lambda_k},
      {"lambda_r", c.weights.lambda_r},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"total_steps", c.total_steps},
      {"seed", c.seed},
      {"target_res", c.target_res},
      {"lowest_res", c.lowest_res},
      {"variant", to_string(c.variant)},
      {"injection_mask", c.injection_mask},
      {"base_filters", c.base_filters},
      {"embedding_dim", c.embedding_dim},
      {"convs_per_block", c.convs_per_block},
      {"checkpoint_every", c.checkpoint_every},
      {"log_every", c.log_every},
  };
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const std::set<std::string> known{
      "gamma",      "lambda_k",       "lambda_r",      "lr",           "batch_size",
      "total_steps", "seed",          "target_res",    "lowest_res",   "variant",
      "injection_mask", "base_filters", "embedding_dim", "convs_per_block", "checkpoint_every",
      "log_every"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  try {
    TrainConfig d;
    d.weights.gamma = j.value("gamma", d.weights.gamma);
    d.weights.lambda_k = j.value("lambda_k", d.weights.lambda_k);
    d.weights.lambda_r = j.value("lambda_r", d.weights.lambda_r);
    d.lr = j.value("lr", d.lr);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.total_steps = j.value("total_steps", d.total_steps);
    d.seed = j.value("seed", d.seed);
    d.target_res = j.value("target_res", d.target_res);
    d.lowest_res = j.value("lowest_res", d.lowest_res);
    if (j.contains("variant")) d.variant = parse_variant(j.at("variant").get<std::string>());
    d.injection_mask = j.value("injection_mask", d.injection_mask);
    d.base_filters = j.value("base_filters", d.base_filters);
    d.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    d.convs_per_block = j.value("convs_per_block", d.convs_per_block);
    d.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
    d.log_every = j.value("log_every", d.log_every);
    c = d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value in training config: ") + e.what());
  }
}

TrainState TrainState::initialize(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  s.discriminator = build_discriminator(config.discriminator(), splitmix64(config.seed ^ 0xD15C));
  s.generator = build_generator(config.generator(), splitmix64(config.seed ^ 0x6E4E));
  s.adam_d = AdamState(config.adam(), s.discriminator.params());
  s.adam_g = AdamState(config.adam(), s.generator.params());
  return s;
}

LossReport train_step(TrainState& state, const ImagePyramid& batch) {
  if (!batch.source_hr) throw ShapeError("train_step needs pyramids that carry the real images");
  const auto& w = state.config.weights;
  auto& D = state.discriminator;
  auto& G = state.generator;
  const Tensor& x = *batch.source_hr;
  D.zero_grad();
  G.zero_grad();

  const Tensor gz = G.forward(batch);
  const Tensor l_x = loss_gan(x, D.forward(x));

  // Discriminator side: G(z) is a constant.
  const Tensor gz_const = gz.detach();
  const Tensor l_gz_d = loss_gan(gz_const, D.forward(gz_const));
  const Tensor l_d = discriminator_loss(l_x, l_gz_d, state.k_t);

  // Generator side: D's parameters are constants, gradients reach G through
  // both v = G(z) and D(G(z)).
  const Tensor l_rcn = reconstruction_loss(x, gz);
  const Tensor l_gz_g = w.lambda_r < 1.0 ? loss_gan(gz, D.forward(gz, ParamMode::Frozen))
                                         : l_gz_d.detach();
  const Tensor l_g = generator_loss(l_gz_g, l_rcn, w.lambda_r);

  LossReport r;
  r.step = state.step + 1;
  r.L_gan_x = l_x.item();
  r.L_gan_gz = l_gz_d.item();
  r.L_rcn = l_rcn.item();
  r.L_D = l_d.item();
  r.L_G = l_g.item();
  r.k_t = state.k_t;
  r.M = convergence_measure(r.L_gan_x, r.L_gan_gz, w.gamma);
  if (!r.finite())
    throw NumericError("non-finite loss at step " + std::to_string(r.step) + ": " +
                       LossReport::csv_header() + " = " + r.csv_row());

  backward(l_d);
  backward(l_g);
  adam_step(D.params(), state.adam_d);
  adam_step(G.params(), state.adam_g);
  state.k_t = update_k(state.k_t, w, r.L_gan_x, r.L_gan_gz);
  state.step += 1;
  return r;
}

Batch batch_for_step(const Dataset& ds, const TrainConfig& cfg, std::uint64_t step) {
  const auto probe = batch_iter(ds, cfg.batch_size, cfg.seed, 0, cfg.lowest_res);
  const std::uint64_t per_epoch = probe.size();
  const std::uint64_t epoch = step / per_epoch;
  if (epoch == 0) return probe[step];
  return batch_iter(ds, cfg.batch_size, cfg.seed, epoch, cfg.lowest_res)[step % per_epoch];
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t step) {
  char name[40];
  std::snprintf(name, sizeof(name), "ckpt_%06llu.rfnt", static_cast<unsigned long long>(step));
  return dir / name;
}

void train(TrainState& state, const Dataset& ds, const TrainOutput& out) {
  const auto& cfg = state.config;
  cfg.validate();
  if (ds.target_res() != cfg.target_res)
    throw ConfigError("dataset resolution " + std::to_string(ds.target_res()) +
                      " does not match target_res " + std::to_string(cfg.target_res));
  if (cfg.batch_size > ds.size())
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds dataset size " +
                      std::to_string(ds.size()));
  std::filesystem::create_directories(out.dir);

  std::ofstream log;
  const bool keep = out.append_log && std::filesystem::exists(out.log_path);
  log.open(out.log_path, keep ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open metrics log " + out.log_path.string());
  if (!keep) log << LossReport::csv_header() << "\n";

  // Batches are a pure function of (seed, step), so resuming needs no RNG state.
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::optional<EpochBatches> epoch_batches;
  while (state.step < cfg.total_steps) {
    const std::uint64_t per_epoch = ds.size() / cfg.batch_size;
    const std::uint64_t epoch = state.step / per_epoch;
    if (epoch != cached_epoch) {
      epoch_batches.emplace(batch_iter(ds, cfg.batch_size, cfg.seed, epoch, cfg.lowest_res));
      cached_epoch = epoch;
    }
    const Batch batch = (*epoch_batches)[state.step % per_epoch];
    const LossReport r = train_step(state, batch.pyramid);
    if (r.step % cfg.log_every == 0) log << r.csv_row() << "\n" << std::flush;
    if (out.on_step) out.on_step(r);
    const bool scheduled = cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0;
    if (scheduled || state.step == cfg.total_steps)
      save_checkpoint(state, checkpoint_path(out.dir, state.step));
  }
}

double mean_reconstruction_loss(const ModelGraph& generator, const Dataset& ds,
                                std::size_t batch_size) {
  const auto& cfg = generator.generator_config();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
    const Tensor x = ds.gather(idx);
    const ImagePyramid z = make_pyramid(x, cfg.lowest_res);
    const Tensor gz = generator.forward(z, ParamMode::Frozen);
    total += static_cast<double>(reconstruction_loss(x, gz).item()) * static_cast<double>(idx.size());
    count += idx.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace refinet
