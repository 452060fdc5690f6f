#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace refinet {

/// Autoencoder discriminator. Encoder blocks run from target_res down to 8x8.
struct DiscriminatorConfig {
  std::size_t target_res = 32;
  std::size_t base_filters = 16;
  std::size_t embedding_dim = 64;
  std::size_t convs_per_block = 2;

  void validate() const;
  /// log2(target_res / 8) + 1
  std::size_t block_count() const;
  /// Filter width of encoder block k (1-based): k * base_filters.
  std::size_t encoder_width(std::size_t block) const { return block * base_filters; }

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// Generator variants, from the most expressive (fewest injections) to the
/// most restrictive (an injection at every level).
enum class Variant { A, B, C };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct GeneratorConfig {
  Variant variant = Variant::B;
  std::size_t target_res = 32;
  std::size_t base_filters = 16;
  std::size_t lowest_res = 8;
  std::size_t convs_per_block = 2;
  /// One flag per level lowest_res, 2*lowest_res, ..., target_res/2. Empty
  /// means "derive from the variant".
  std::vector<bool> injection_mask;

  void validate() const;
  /// Number of levels strictly below target_res.
  std::size_t level_count() const;
  std::vector<bool> resolved_mask() const;
  /// Levels above the lowest whose mask bit is set.
  std::size_t injection_count() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// A: lowest only. B: lowest plus every second level. C: every level.
std::vector<bool> default_injection_mask(Variant v, std::size_t levels);

void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

}  // namespace refinet
