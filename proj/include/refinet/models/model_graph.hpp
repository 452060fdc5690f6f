#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "refinet/backend/tensor.hpp"
#include "refinet/data/pyramid.hpp"
#include "refinet/models/config.hpp"

namespace refinet {

enum class ModelKind { Discriminator, Generator };

enum class LayerKind {
  Conv3x3,
  Elu,
  Downsample,     // nearest neighbour, x2
  Upsample,       // nearest neighbour, x2
  Flatten,
  FullyConnected,
  Unflatten,      // back to (channels, resolution, resolution)
  Inject,         // concatenate the pyramid level at `resolution`
};

struct LayerDesc {
  LayerKind kind;
  std::string name;  // parameter prefix for Conv3x3 / FullyConnected
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t resolution = 0;  // spatial size the layer operates at
};

/// Forward with trainable parameters, or through detached views so no
/// gradient reaches them (the input path is still differentiated).
enum class ParamMode { Trainable, Frozen };

/// A built discriminator or generator: layer program plus named parameters.
/// Parameter names follow component.block.layer.{weight|bias}.
template <typename T>
class BasicModelGraph {
 public:
  using TensorT = BasicTensor<T>;
  using Config = std::variant<DiscriminatorConfig, GeneratorConfig>;

  BasicModelGraph() = default;

  ModelKind kind() const {
    return std::holds_alternative<DiscriminatorConfig>(config_) ? ModelKind::Discriminator
                                                                : ModelKind::Generator;
  }
  const Config& config() const { return config_; }
  const DiscriminatorConfig& discriminator_config() const;
  const GeneratorConfig& generator_config() const;

  const std::vector<LayerDesc>& layers() const { return layers_; }
  const std::vector<std::string>& param_names() const { return names_; }
  std::vector<TensorT>& params() { return params_; }
  const std::vector<TensorT>& params() const { return params_; }
  const TensorT& param(std::string_view name) const;
  TensorT& param(std::string_view name);
  std::size_t parameter_count() const;
  void zero_grad();

  /// Discriminator: (N, 3, R, R) -> (N, 3, R, R).
  TensorT forward(const TensorT& x, ParamMode mode = ParamMode::Trainable) const;
  /// Generator: pyramid -> (N, 3, target_res, target_res).
  TensorT forward(const BasicImagePyramid<T>& z, ParamMode mode = ParamMode::Trainable) const;

  /// Same graph with parameters converted to another precision.
  template <typename U>
  BasicModelGraph<U> cast() const;

  /// Deep copy of parameter values.
  BasicModelGraph clone() const;

  // Used by the builders.
  void add_layer(LayerDesc layer) { layers_.push_back(std::move(layer)); }
  void add_param(std::string name, TensorT tensor);
  void set_config(Config cfg) { config_ = std::move(cfg); }

 private:
  TensorT run(TensorT x, const BasicImagePyramid<T>* z, ParamMode mode) const;

  Config config_;
  std::vector<LayerDesc> layers_;
  std::vector<std::string> names_;
  std::vector<TensorT> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

template <typename T>
template <typename U>
BasicModelGraph<U> BasicModelGraph<T>::cast() const {
  BasicModelGraph<U> out;
  out.set_config(config_);
  for (const auto& layer : layers_) out.add_layer(layer);
  for (std::size_t i = 0; i < params_.size(); ++i)
    out.add_param(names_[i], refinet::cast<U>(params_[i], params_[i].requires_grad()));
  return out;
}

using ModelGraph = BasicModelGraph<float>;

/// Parameters are drawn uniformly in +-sqrt(1/fan_in) from a generator
/// seeded with `seed`; biases start at zero.
ModelGraph build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
ModelGraph build_generator(const GeneratorConfig& cfg, std::uint64_t seed);

}  // namespace refinet
