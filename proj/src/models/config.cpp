#include "refinet/models/config.hpp"

#include "refinet/backend/errors.hpp"
#include "refinet/data/pyramid.hpp"

namespace refinet {

namespace {

std::size_t log2_exact(std::size_t v) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < v) ++k;
  return k;
}

}  // namespace

void DiscriminatorConfig::validate() const {
  if (!is_power_of_two(target_res) || target_res < 8)
    throw ConfigError("discriminator target_res must be a power of two >= 8, got " +
                      std::to_string(target_res));
  if (base_filters == 0) throw ConfigError("discriminator base_filters must be positive");
  if (embedding_dim == 0) throw ConfigError("discriminator embedding_dim must be positive");
  if (convs_per_block == 0) throw ConfigError("discriminator convs_per_block must be positive");
}

std::size_t DiscriminatorConfig::block_count() const { return log2_exact(target_res / 8) + 1; }

std::string to_string(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "A" || s == "a") return Variant::A;
  if (s == "B" || s == "b") return Variant::B;
  if (s == "C" || s == "c") return Variant::C;
  throw ConfigError("unknown generator variant '" + s + "' (expected A, B or C)");
}

std::vector<bool> default_injection_mask(Variant v, std::size_t levels) {
  std::vector<bool> mask(levels, false);
  for (std::size_t i = 0; i < levels; ++i) {
    switch (v) {
      case Variant::A: mask[i] = i == 0; break;
      case Variant::B: mask[i] = i % 2 == 0; break;
      case Variant::C: mask[i] = true; break;
    }
  }
  return mask;
}

std::size_t GeneratorConfig::level_count() const {
  return log2_exact(target_res) - log2_exact(lowest_res);
}

void GeneratorConfig::validate() const {
  if (!is_power_of_two(target_res) || !is_power_of_two(lowest_res))
    throw ConfigError("generator resolutions must be powers of two (lowest " +
                      std::to_string(lowest_res) + ", target " + std::to_string(target_res) + ")");
  if (lowest_res > target_res / 2)
    throw ConfigError("generator lowest_res " + std::to_string(lowest_res) +
                      " must be at most target_res / 2 = " + std::to_string(target_res / 2));
  if (base_filters == 0) throw ConfigError("generator base_filters must be positive");
  if (convs_per_block == 0) throw ConfigError("generator convs_per_block must be positive");
  if (!injection_mask.empty()) {
    if (injection_mask.size() != level_count())
      throw ConfigError("injection_mask needs " + std::to_string(level_count()) +
                        " entries (one per level below target), got " +
                        std::to_string(injection_mask.size()));
    if (!injection_mask.front())
      throw ConfigError("injection_mask must enable the lowest level: it is the generator input");
  }
}

std::vector<bool> GeneratorConfig::resolved_mask() const {
  return injection_mask.empty() ? default_injection_mask(variant, level_count()) : injection_mask;
}

std::size_t GeneratorConfig::injection_count() const {
  const auto mask = resolved_mask();
  std::size_t count = 0;
  for (std::size_t i = 1; i < mask.size(); ++i) count += mask[i] ? 1 : 0;
  return count;
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
  j = nlohmann::json{{"target_res", c.target_res},
                     {"base_filters", c.base_filters},
                     {"embedding_dim", c.embedding_dim},
                     {"convs_per_block", c.convs_per_block}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
  c = DiscriminatorConfig{};
  c.target_res = j.value("target_res", c.target_res);
  c.base_filters = j.value("base_filters", c.base_filters);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"variant", to_string(c.variant)},
                     {"target_res", c.target_res},
                     {"base_filters", c.base_filters},
                     {"lowest_res", c.lowest_res},
                     {"convs_per_block", c.convs_per_block},
                     {"injection_mask", c.injection_mask}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c = GeneratorConfig{};
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  c.target_res = j.value("target_res", c.target_res);
  c.base_filters = j.value("base_filters", c.base_filters);
  c.lowest_res = j.value("lowest_res", c.lowest_res);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
  c.injection_mask = j.value("injection_mask", std::vector<bool>{});
}

}  // namespace refinet
