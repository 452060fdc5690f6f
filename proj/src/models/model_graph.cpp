#include "refinet/models/model_graph.hpp"

#include <cmath>
#include <random>

#include "refinet/backend/ops.hpp"

namespace refinet {

template <typename T>
const DiscriminatorConfig& BasicModelGraph<T>::discriminator_config() const {
  if (const auto* c = std::get_if<DiscriminatorConfig>(&config_)) return *c;
  throw ConfigError("model is a generator, not a discriminator");
}

template <typename T>
const GeneratorConfig& BasicModelGraph<T>::generator_config() const {
  if (const auto* c = std::get_if<GeneratorConfig>(&config_)) return *c;
  throw ConfigError("model is a discriminator, not a generator");
}

template <typename T>
const typename BasicModelGraph<T>::TensorT& BasicModelGraph<T>::param(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
typename BasicModelGraph<T>::TensorT& BasicModelGraph<T>::param(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
void BasicModelGraph<T>::add_param(std::string name, TensorT tensor) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  names_.push_back(std::move(name));
  params_.push_back(std::move(tensor));
}

template <typename T>
std::size_t BasicModelGraph<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

template <typename T>
void BasicModelGraph<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
BasicModelGraph<T> BasicModelGraph<T>::clone() const {
  BasicModelGraph out;
  out.config_ = config_;
  out.layers_ = layers_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto copy = params_[i].clone();
    copy.set_requires_grad(params_[i].requires_grad());
    out.add_param(names_[i], std::move(copy));
  }
  return out;
}

template <typename T>
typename BasicModelGraph<T>::TensorT BasicModelGraph<T>::forward(const TensorT& x,
                                                                 ParamMode mode) const {
  const auto& cfg = discriminator_config();
  const Shape& s = x.shape();
  if (s.c != 3 || s.h != cfg.target_res || s.w != cfg.target_res)
    throw ShapeError("discriminator expects (N, 3, " + std::to_string(cfg.target_res) + ", " +
                     std::to_string(cfg.target_res) + ") input, got " + s.str());
  return run(x, nullptr, mode);
}

template <typename T>
typename BasicModelGraph<T>::TensorT BasicModelGraph<T>::forward(const BasicImagePyramid<T>& z,
                                                                 ParamMode mode) const {
  const auto& cfg = generator_config();
  if (z.lowest_res != cfg.lowest_res || z.levels.empty())
    throw ShapeError("generator expects a pyramid starting at " + std::to_string(cfg.lowest_res) +
                     "x" + std::to_string(cfg.lowest_res));
  const Shape& s = z.levels.front().shape();
  if (s.c != 3 || s.h != cfg.lowest_res || s.w != cfg.lowest_res)
    throw ShapeError("generator lowest level must be (N, 3, " + std::to_string(cfg.lowest_res) +
                     ", " + std::to_string(cfg.lowest_res) + "), got " + s.str());
  for (const auto& layer : layers_) {
    if (layer.kind != LayerKind::Inject) continue;
    const TensorT* lvl = z.level(layer.resolution);
    if (lvl == nullptr)
      throw ShapeError("pyramid has no " + std::to_string(layer.resolution) + "x" +
                       std::to_string(layer.resolution) + " level for an enabled injection");
    if (lvl->shape() != Shape{s.n, 3, layer.resolution, layer.resolution})
      throw ShapeError("pyramid level " + std::to_string(layer.resolution) + " has shape " +
                       lvl->shape().str());
  }
  return run(z.levels.front(), &z, mode);
}

template <typename T>
typename BasicModelGraph<T>::TensorT BasicModelGraph<T>::run(TensorT x,
                                                             const BasicImagePyramid<T>* z,
                                                             ParamMode mode) const {
  auto get = [&](const std::string& name) {
    const TensorT& p = param(name);
    return mode == ParamMode::Frozen ? p.detach() : p;
  };
  const std::size_t batch = x.shape().n;
  for (const auto& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::Conv3x3:
        x = conv3x3(x, get(layer.name + ".weight"), get(layer.name + ".bias"));
        break;
      case LayerKind::Elu:
        x = elu(x);
        break;
      case LayerKind::Downsample:
        x = resize_nearest(x, 2, ResizeDirection::Down);
        break;
      case LayerKind::Upsample:
        x = resize_nearest(x, 2, ResizeDirection::Up);
        break;
      case LayerKind::Flatten:
        x = reshape(x, Shape{batch, x.shape().per_sample(), 1, 1});
        break;
      case LayerKind::FullyConnected:
        x = fully_connected(x, get(layer.name + ".weight"), get(layer.name + ".bias"));
        break;
      case LayerKind::Unflatten:
        x = reshape(x, Shape{batch, layer.out_channels, layer.resolution, layer.resolution});
        break;
      case LayerKind::Inject:
        x = concat_channels(x, *z->level(layer.resolution));
        break;
    }
  }
  return x;
}

template class BasicModelGraph<float>;
template class BasicModelGraph<double>;

namespace {

// Appends layers and freshly initialised parameters in program order.
class Builder {
 public:
  Builder(ModelGraph& graph, std::uint64_t seed) : graph_(graph), rng_(seed) {}

  void conv(const std::string& name, std::size_t in, std::size_t out, std::size_t res, bool act) {
    graph_.add_layer({LayerKind::Conv3x3, name, in, out, res});
    add_weights(name, Shape{out, in, 3, 3}, in * 9);
    if (act) graph_.add_layer({LayerKind::Elu, "", out, out, res});
  }

  void fc(const std::string& name, std::size_t in, std::size_t out) {
    graph_.add_layer({LayerKind::FullyConnected, name, in, out, 1});
    add_weights(name, Shape{out, in, 1, 1}, in);
  }

  void layer(LayerKind kind, std::size_t in, std::size_t out, std::size_t res) {
    graph_.add_layer({kind, "", in, out, res});
  }

 private:
  void add_weights(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::vector<float> w(shape.size());
    for (auto& v : w) {
      // 53 random bits -> [0, 1); independent of the standard library's distributions.
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      v = static_cast<float>((2.0 * u - 1.0) * bound);
    }
    graph_.add_param(name + ".weight", Tensor::from_data(shape, std::move(w), true));
    graph_.add_param(name + ".bias", Tensor::zeros(Shape{shape.n, 1, 1, 1}, true));
  }

  ModelGraph& graph_;
  std::mt19937_64 rng_;
};

std::string layer_name(const char* component, std::size_t block, std::size_t layer) {
  return std::string(component) + "." + std::to_string(block) + "." + std::to_string(layer);
}

}  // namespace

ModelGraph build_discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph g;
  g.set_config(cfg);
  Builder b(g, seed);
  const std::size_t n = cfg.base_filters;
  const std::size_t blocks = cfg.block_count();

  // Encoder: widths grow k * n per block, x2 downsample between blocks.
  std::size_t res = cfg.target_res;
  b.conv(layer_name("enc", 0, 0), 3, n, res, true);
  std::size_t ch = n;
  for (std::size_t k = 1; k <= blocks; ++k) {
    const std::size_t width = cfg.encoder_width(k);
    for (std::size_t j = 0; j < cfg.convs_per_block; ++j) {
      b.conv(layer_name("enc", k, j), ch, width, res, true);
      ch = width;
    }
    if (k < blocks) {
      b.layer(LayerKind::Downsample, ch, ch, res / 2);
      res /= 2;
    }
  }

  // Bottleneck: 8*8*(blocks*n) -> h -> 8*8*n.
  const std::size_t flat = ch * 8 * 8;
  b.layer(LayerKind::Flatten, flat, flat, 1);
  b.fc(layer_name("fc", 0, 0), flat, cfg.embedding_dim);
  b.fc(layer_name("fc", 0, 1), cfg.embedding_dim, 8 * 8 * n);
  b.layer(LayerKind::Unflatten, 8 * 8 * n, n, 8);

  // Decoder: constant n filters, x2 upsample between blocks.
  res = 8;
  for (std::size_t k = 1; k <= blocks; ++k) {
    for (std::size_t j = 0; j < cfg.convs_per_block; ++j) b.conv(layer_name("dec", k, j), n, n, res, true);
    if (k < blocks) {
      b.layer(LayerKind::Upsample, n, n, res * 2);
      res *= 2;
    }
  }
  b.conv(layer_name("dec", blocks + 1, 0), n, 3, res, false);
  return g;
}

ModelGraph build_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelGraph g;
  GeneratorConfig snapshot = cfg;
  snapshot.injection_mask = cfg.resolved_mask();
  g.set_config(snapshot);
  Builder b(g, seed);
  const std::size_t n = cfg.base_filters;
  const auto mask = snapshot.injection_mask;
  const std::size_t blocks = mask.size() + 1;  // every level up to and including target

  std::size_t res = cfg.lowest_res;
  b.conv(layer_name("gen", 0, 0), 3, n, res, true);
  for (std::size_t k = 1; k <= blocks; ++k) {
    const std::size_t level = k - 1;
    std::size_t ch = n;
    if (level > 0 && level < mask.size() && mask[level]) {
      b.layer(LayerKind::Inject, n, n + 3, res);
      ch = n + 3;
    }
    for (std::size_t j = 0; j < cfg.convs_per_block; ++j) {
      b.conv(layer_name("gen", k, j), ch, n, res, true);
      ch = n;
    }
    if (res < cfg.target_res) {
      b.layer(LayerKind::Upsample, n, n, res * 2);
      res *= 2;
    }
  }
  b.conv(layer_name("gen", blocks + 1, 0), n, 3, res, false);
  return g;
}

}  // namespace refinet
