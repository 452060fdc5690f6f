#include "refinet/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace refinet {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'R', 'F', 'N', 'T'};

struct Entry {
  std::string name;
  Shape shape;
  std::span<const float> values;
};

class Writer {
 public:
  template <typename U>
  void pod(U v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(U));
  }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename U>
  U pod() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }
  std::string str(std::size_t n) { return std::string(take(n), n); }
  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_)
      throw CheckpointError(source_ + ": truncated checkpoint (needed " + std::to_string(n) +
                            " bytes at offset " + std::to_string(pos_) + ")");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

nlohmann::json adam_json(const AdamState& a) {
  return {{"step", a.step},
          {"lr", a.config.lr},
          {"beta1", a.config.beta1},
          {"beta2", a.config.beta2},
          {"epsilon", a.config.epsilon}};
}

void collect(std::vector<Entry>& out, const ModelGraph& g, const AdamState& adam,
             const std::string& opt_prefix) {
  for (std::size_t i = 0; i < g.params().size(); ++i)
    out.push_back({g.param_names()[i], g.params()[i].shape(), g.params()[i].data()});
  for (std::size_t i = 0; i < g.params().size(); ++i) {
    out.push_back({opt_prefix + ".m:" + g.param_names()[i], g.params()[i].shape(), adam.m[i]});
    out.push_back({opt_prefix + ".s:" + g.param_names()[i], g.params()[i].shape(), adam.s[i]});
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["train_config"] = state.config;
  meta["discriminator"] = state.discriminator.discriminator_config();
  meta["generator"] = state.generator.generator_config();
  meta["step"] = state.step;
  meta["k_t"] = state.k_t;
  meta["adam_d"] = adam_json(state.adam_d);
  meta["adam_g"] = adam_json(state.adam_g);
  // Batch order is a pure function of (seed, step); this is the whole RNG state.
  meta["rng"] = {{"seed", state.config.seed}, {"cursor", state.step}};
  const std::string blob = meta.dump();

  std::vector<Entry> entries;
  collect(entries, state.discriminator, state.adam_d, "adam_d");
  collect(entries, state.generator, state.adam_g, "adam_g");

  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.pod<std::uint64_t>(blob.size());
  w.raw(blob.data(), blob.size());
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    for (std::size_t d : {e.shape.n, e.shape.c, e.shape.h, e.shape.w})
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.pod<std::uint64_t>(offset);
    offset += e.values.size() * sizeof(float);
  }
  for (const auto& e : entries) w.raw(e.values.data(), e.values.size() * sizeof(float));

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + tmp.string());
    f.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());

  if (std::memcmp(r.take(4), kMagic, 4) != 0)
    throw CheckpointError(path.string() + ": not a refinet checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto blob_size = r.pod<std::uint64_t>();
  if (blob_size > r.remaining()) r.take(blob_size);  // reports truncation
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.str(blob_size));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": corrupt config blob: " + e.what());
  }

  TrainState state;
  try {
    state = TrainState::initialize(meta.at("train_config").get<TrainConfig>());
    if (meta.at("discriminator").get<DiscriminatorConfig>() != state.discriminator.discriminator_config() ||
        meta.at("generator").get<GeneratorConfig>() != state.generator.generator_config())
      throw CheckpointError(path.string() + ": model configs disagree with the training config");
    state.step = meta.at("step").get<std::uint64_t>();
    state.k_t = meta.at("k_t").get<double>();
    state.adam_d.step = meta.at("adam_d").at("step").get<std::uint64_t>();
    state.adam_g.step = meta.at("adam_g").at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": incomplete config blob: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": invalid stored config: " + e.what());
  }

  struct Slot {
    Shape shape;
    std::span<float> dst;
  };
  std::map<std::string, Slot> slots;
  auto expose = [&](ModelGraph& g, AdamState& adam, const std::string& prefix) {
    for (std::size_t i = 0; i < g.params().size(); ++i) {
      const auto& name = g.param_names()[i];
      const Shape shape = g.params()[i].shape();
      slots[name] = {shape, g.params()[i].data()};
      slots[prefix + ".m:" + name] = {shape, adam.m[i]};
      slots[prefix + ".s:" + name] = {shape, adam.s[i]};
    }
  };
  expose(state.discriminator, state.adam_d, "adam_d");
  expose(state.generator, state.adam_g, "adam_g");

  const auto count = r.pod<std::uint32_t>();
  if (count != slots.size())
    throw CheckpointError(path.string() + ": manifest lists " + std::to_string(count) +
                          " tensors, config implies " + std::to_string(slots.size()));
  struct Pending {
    Slot* slot;
    std::uint64_t offset;
  };
  std::vector<Pending> pending;
  std::uint64_t data_bytes = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.pod<std::uint32_t>());
    Shape shape;
    shape.n = r.pod<std::uint32_t>();
    shape.c = r.pod<std::uint32_t>();
    shape.h = r.pod<std::uint32_t>();
    shape.w = r.pod<std::uint32_t>();
    const auto offset = r.pod<std::uint64_t>();
    auto it = slots.find(name);
    if (it == slots.end())
      throw CheckpointError(path.string() + ": unexpected tensor '" + name + "'");
    if (it->second.shape != shape)
      throw CheckpointError(path.string() + ": tensor '" + name + "' has shape " + shape.str() +
                            ", model expects " + it->second.shape.str());
    pending.push_back({&it->second, offset});
    data_bytes += shape.size() * sizeof(float);
  }
  if (r.remaining() != data_bytes)
    throw CheckpointError(path.string() + ": data section holds " + std::to_string(r.remaining()) +
                          " bytes, manifest needs " + std::to_string(data_bytes) +
                          (r.remaining() < data_bytes ? " (truncated)" : ""));
  const char* base = r.take(data_bytes);
  for (const auto& p : pending) {
    const std::size_t n = p.slot->dst.size() * sizeof(float);
    if (p.offset > data_bytes || n > data_bytes - p.offset)
      throw CheckpointError(path.string() + ": tensor offset out of range");
    std::memcpy(p.slot->dst.data(), base + p.offset, n);
  }
  return state;
}

}  // namespace refinet
