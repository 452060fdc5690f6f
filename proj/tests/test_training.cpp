#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "refinet/backend/ops.hpp"
#include "refinet/training/checkpoint.hpp"
#include "refinet/training/trainer.hpp"
#include "test_util.hpp"

using namespace refinet;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.target_res = 16;
  c.lowest_res = 8;
  c.base_filters = 4;
  c.embedding_dim = 8;
  c.convs_per_block = 1;
  c.batch_size = 4;
  c.total_steps = 6;
  c.seed = 3;
  c.variant = Variant::C;
  return c;
}

TrainState deep_copy(const TrainState& s) {
  TrainState c = s;
  c.discriminator = s.discriminator.clone();
  c.generator = s.generator.clone();
  return c;
}

bool same_params(const ModelGraph& a, const ModelGraph& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i)
    if (!test::bitwise_equal(a.params()[i].data(), b.params()[i].data())) return false;
  return true;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TrainOutput to(const std::filesystem::path& dir, bool append = false) {
  TrainOutput out;
  out.dir = dir;
  out.log_path = dir / "log.csv";
  out.append_log = append;
  return out;
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

}  // namespace

TEST(TrainStep, FirstStepUsesZeroK) {
  auto st = TrainState::initialize(small_config());
  const auto ds = make_toy_dataset(8, 16, 1);
  const auto r = train_step(st, batch_for_step(ds, st.config, 0).pyramid);
  EXPECT_EQ(r.step, 1u);
  EXPECT_EQ(r.k_t, 0.0);
  EXPECT_EQ(r.L_D, r.L_gan_x);
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(st.adam_d.step, 1u);
  EXPECT_EQ(st.adam_g.step, 1u);
}

TEST(TrainStep, FullReconstructionWeightIsASupervisedStep) {
  auto cfg = small_config();
  cfg.weights.lambda_r = 1.0;
  auto st = TrainState::initialize(cfg);
  const auto ds = make_toy_dataset(8, 16, 1);
  const auto batch = batch_for_step(ds, cfg, 0);

  auto ref = deep_copy(st);
  ref.generator.zero_grad();
  const auto& x = *batch.pyramid.source_hr;
  backward(reconstruction_loss(x, ref.generator.forward(batch.pyramid)));
  adam_step(ref.generator.params(), ref.adam_g);

  const auto d_before = st.discriminator.clone();
  train_step(st, batch.pyramid);
  EXPECT_TRUE(same_params(st.generator, ref.generator));
  EXPECT_FALSE(same_params(st.discriminator, d_before));
}

TEST(TrainStep, EachNetworkMovesOnlyByItsOwnLoss) {
  auto cfg = small_config();
  cfg.weights.lambda_r = 0.5;
  auto st = TrainState::initialize(cfg);
  const auto ds = make_toy_dataset(8, 16, 1);
  const auto batch = batch_for_step(ds, cfg, 0);
  // Warm up so k_t > 0 is possible and moments are non-trivial.
  train_step(st, batch_for_step(ds, cfg, 1).pyramid);
  st.k_t = 0.4;

  // Discriminator driven by L_D alone.
  auto d_only = deep_copy(st);
  {
    auto& D = d_only.discriminator;
    D.zero_grad();
    const auto& x = *batch.pyramid.source_hr;
    const Tensor gz = d_only.generator.forward(batch.pyramid, ParamMode::Frozen);
    backward(discriminator_loss(loss_gan(x, D.forward(x)), loss_gan(gz, D.forward(gz)), d_only.k_t));
    adam_step(D.params(), d_only.adam_d);
  }
  // Generator driven by L_G alone.
  auto g_only = deep_copy(st);
  {
    auto& G = g_only.generator;
    G.zero_grad();
    const auto& x = *batch.pyramid.source_hr;
    const Tensor gz = G.forward(batch.pyramid);
    const Tensor adv = loss_gan(gz, g_only.discriminator.forward(gz, ParamMode::Frozen));
    backward(generator_loss(adv, reconstruction_loss(x, gz), 0.5));
    adam_step(G.params(), g_only.adam_g);
  }

  train_step(st, batch.pyramid);
  EXPECT_TRUE(same_params(st.discriminator, d_only.discriminator));
  EXPECT_TRUE(same_params(st.generator, g_only.generator));
}

TEST(TrainStep, NonFiniteLossLeavesStateUntouched) {
  auto st = TrainState::initialize(small_config());
  auto ds = make_toy_dataset(8, 16, 1);
  auto batch = batch_for_step(ds, st.config, 0);
  batch.pyramid.source_hr->data()[0] = std::numeric_limits<float>::quiet_NaN();
  const auto before = st.generator.clone();
  EXPECT_THROW(train_step(st, batch.pyramid), NumericError);
  EXPECT_EQ(st.step, 0u);
  EXPECT_TRUE(same_params(st.generator, before));
}

TEST(TrainStep, KStaysInUnitInterval) {
  auto cfg = small_config();
  cfg.weights.lambda_k = 0.5;  // aggressive gain to exercise both clamps
  auto st = TrainState::initialize(cfg);
  const auto ds = make_toy_dataset(8, 16, 1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto r = train_step(st, batch_for_step(ds, cfg, s).pyramid);
    EXPECT_GE(r.k_t, 0.0);
    EXPECT_LE(r.k_t, 1.0);
    EXPECT_GE(st.k_t, 0.0);
    EXPECT_LE(st.k_t, 1.0);
  }
}

TEST(Batching, StepAddressingMatchesEpochOrder) {
  auto cfg = small_config();
  const auto ds = make_toy_dataset(10, 16, 1);  // 2 batches per epoch, 2 items dropped
  const auto e1 = batch_iter(ds, cfg.batch_size, cfg.seed, 1, cfg.lowest_res);
  const auto b = batch_for_step(ds, cfg, 3);
  const auto expect = e1.indices(1);
  EXPECT_TRUE(std::equal(b.indices.begin(), b.indices.end(), expect.begin(), expect.end()));
}

TEST(Train, RepeatRunsProduceIdenticalReports) {
  const auto ds = make_toy_dataset(8, 16, 1);
  std::vector<std::string> rows[2];
  for (int run = 0; run < 2; ++run) {
    test::TempDir dir("det");
    auto st = TrainState::initialize(small_config());
    train(st, ds, {dir.path(), dir.path() / "log.csv", false,
                   [&](const LossReport& r) { rows[run].push_back(r.csv_row()); }});
  }
  EXPECT_EQ(rows[0].size(), 6u);
  EXPECT_EQ(rows[0], rows[1]);
}

TEST(Train, LogRowsAndCheckpointSchedule) {
  test::TempDir dir("sched");
  auto cfg = small_config();
  cfg.total_steps = 10;
  cfg.checkpoint_every = 5;
  auto st = TrainState::initialize(cfg);
  train(st, make_toy_dataset(8, 16, 1), to(dir.path()));
  EXPECT_EQ(line_count(dir.path() / "log.csv"), 11u);
  std::vector<std::string> ckpts;
  for (const auto& e : std::filesystem::directory_iterator(dir.path()))
    if (e.path().extension() == ".rfnt") ckpts.push_back(e.path().filename().string());
  std::sort(ckpts.begin(), ckpts.end());
  EXPECT_EQ(ckpts, (std::vector<std::string>{"ckpt_000005.rfnt", "ckpt_000010.rfnt"}));
}

TEST(Train, RejectsMismatchedDataset) {
  test::TempDir dir("mismatch");
  auto st = TrainState::initialize(small_config());
  EXPECT_THROW(train(st, make_toy_dataset(8, 32, 1), to(dir.path())),
               ConfigError);
  EXPECT_THROW(train(st, make_toy_dataset(3, 16, 1), to(dir.path())),
               ConfigError);
}

TEST(Checkpoint, RoundtripGivesBitwiseIdenticalForward) {
  test::TempDir dir("ckpt");
  auto st = TrainState::initialize(small_config());
  const auto ds = make_toy_dataset(8, 16, 1);
  for (std::uint64_t s = 0; s < 3; ++s) train_step(st, batch_for_step(ds, st.config, s).pyramid);
  save_checkpoint(st, dir.path() / "a.rfnt");
  const auto back = load_checkpoint(dir.path() / "a.rfnt");
  EXPECT_EQ(back.step, st.step);
  EXPECT_EQ(back.k_t, st.k_t);
  EXPECT_EQ(back.config, st.config);
  EXPECT_EQ(back.adam_g.m, st.adam_g.m);
  EXPECT_EQ(back.adam_d.s, st.adam_d.s);
  const auto z = make_pyramid(ds.gather(std::vector<std::size_t>{0, 1, 2}), 8);
  EXPECT_TRUE(test::bitwise_equal(st.generator.forward(z).data(), back.generator.forward(z).data()));
  const auto x = ds.item(5);
  EXPECT_TRUE(test::bitwise_equal(st.discriminator.forward(x).data(),
                                  back.discriminator.forward(x).data()));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "a.rfnt.tmp"));
}

TEST(Checkpoint, TruncatedOrCorruptFilesFailCleanly) {
  test::TempDir dir("trunc");
  auto st = TrainState::initialize(small_config());
  save_checkpoint(st, dir.path() / "a.rfnt");
  const std::string full = slurp(dir.path() / "a.rfnt");
  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{10}, full.size() / 2,
                           full.size() - 1}) {
    std::ofstream(dir.path() / "t.rfnt", std::ios::binary).write(full.data(), keep);
    EXPECT_THROW(load_checkpoint(dir.path() / "t.rfnt"), CheckpointError) << keep;
  }
  std::string bad = full;
  bad[0] = 'X';
  std::ofstream(dir.path() / "m.rfnt", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(dir.path() / "m.rfnt"), CheckpointError);
  bad = full;
  bad[4] = 9;
  std::ofstream(dir.path() / "v.rfnt", std::ios::binary) << bad;
  EXPECT_THROW(load_checkpoint(dir.path() / "v.rfnt"), CheckpointError);
  std::ofstream(dir.path() / "x.rfnt", std::ios::binary) << full << "extra";
  EXPECT_THROW(load_checkpoint(dir.path() / "x.rfnt"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing.rfnt"), CheckpointError);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto ds = make_toy_dataset(10, 16, 1);
  auto cfg = small_config();
  cfg.total_steps = 7;
  cfg.checkpoint_every = 3;
  test::TempDir full_dir("full"), part_dir("part");
  auto full = TrainState::initialize(cfg);
  train(full, ds, to(full_dir.path()));

  auto resumed = load_checkpoint(full_dir.path() / "ckpt_000003.rfnt");
  // The copied log already holds rows past step 3; keep only the header and the first three.
  {
    std::ifstream in(full_dir.path() / "log.csv");
    std::ofstream out(part_dir.path() / "log.csv", std::ios::trunc);
    std::string line;
    for (int i = 0; i < 4 && std::getline(in, line); ++i) out << line << "\n";
  }
  train(resumed, ds, to(part_dir.path(), true));
  EXPECT_EQ(slurp(full_dir.path() / "ckpt_000007.rfnt"), slurp(part_dir.path() / "ckpt_000007.rfnt"));
  EXPECT_EQ(slurp(full_dir.path() / "log.csv"), slurp(part_dir.path() / "log.csv"));
}

TEST(TrainConfig, JsonRoundtripAndValidation) {
  auto cfg = small_config();
  cfg.injection_mask = {true};
  nlohmann::json j = cfg;
  EXPECT_EQ(j.get<TrainConfig>(), cfg);
  EXPECT_THROW((nlohmann::json{{"bogus", 1}}.get<TrainConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"lr", "fast"}}.get<TrainConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"variant", "D"}}.get<TrainConfig>()), ConfigError);
  auto bad = cfg;
  bad.total_steps = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.weights.lambda_r = 2.0;
  EXPECT_THROW(TrainState::initialize(bad), ConfigError);
}
