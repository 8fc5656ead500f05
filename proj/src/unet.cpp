#include "ctssl/unet.hpp"

#include <cmath>
#include <random>

namespace ctssl {

void NetConfig::validate() const {
  require(depth >= 1, "net: depth must be >= 1");
  require(base_channels >= 1, "net: base_channels must be >= 1");
  require(kernel_size >= 1 && kernel_size % 2 == 1, "net: kernel_size must be odd");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, "net: leaky slope must be in [0, 1)");
}

NetConfig NetConfig::large_preset() {
  NetConfig cfg;
  cfg.depth = 4;
  cfg.base_channels = 64;
  return cfg;
}

std::vector<ConvLayout> conv_layout(const NetConfig& cfg) {
  cfg.validate();
  const int k = cfg.kernel_size;
  auto ch = [&](int level) { return cfg.base_channels << level; };
  std::vector<ConvLayout> layers;
  std::size_t offset = 0;
  auto add = [&](int in, int out, int kernel) {
    layers.push_back(ConvLayout{in, out, kernel, offset});
    offset += layers.back().count();
  };
  for (int l = 0; l < cfg.depth; ++l) {
    add(l == 0 ? 1 : ch(l - 1), ch(l), k);
    add(ch(l), ch(l), k);
  }
  add(ch(cfg.depth - 1), ch(cfg.depth), k);
  add(ch(cfg.depth), ch(cfg.depth), k);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    add(ch(l + 1) + (cfg.skip_connections ? ch(l) : 0), ch(l), k);
    add(ch(l), ch(l), k);
  }
  add(ch(0), 1, 1);
  return layers;
}

std::size_t param_count(const NetConfig& cfg) {
  const auto layers = conv_layout(cfg);
  return layers.back().offset + layers.back().count();
}

ParamVector init_params(const NetConfig& cfg, std::uint64_t seed) {
  ParamVector params(param_count(cfg), 0.0);
  std::mt19937_64 engine(seed);
  const double gain = 6.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope);
  for (const ConvLayout& layer : conv_layout(cfg)) {
    const double fan_in = static_cast<double>(layer.in) * layer.kernel * layer.kernel;
    const double bound = std::sqrt(gain / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < layer.weight_count(); ++i) params[layer.offset + i] = dist(engine);
  }
  return params;
}

namespace {

Var apply_conv(Graph& g, Var params, Var x, const ConvLayout& layer) {
  const Shape ws{layer.out, layer.in, layer.kernel * layer.kernel};
  Var w = ad::slice(g, params, layer.offset, ws);
  Var b = ad::slice(g, params, layer.offset + layer.weight_count(), Shape{layer.out, 1, 1});
  return ad::conv2d(g, x, w, b, layer.kernel);
}

}  // namespace

Var unet_forward(Graph& g, Var params, Var input, const NetConfig& cfg) {
  const auto layers = conv_layout(cfg);
  require(g.value(params).size() == param_count(cfg), "net_forward: parameter count mismatch");
  const Shape in = g.value(input).shape;
  require(in.c == 1 && in.h == in.w, "net_forward: input must be a single-channel square image");
  require(in.w % (1 << cfg.depth) == 0, "net_forward: input width must be divisible by 2^depth");

  std::size_t next = 0;
  auto block = [&](Var x) {
    x = ad::leaky_relu(g, apply_conv(g, params, x, layers[next++]), cfg.leaky_slope);
    return ad::leaky_relu(g, apply_conv(g, params, x, layers[next++]), cfg.leaky_slope);
  };

  std::vector<Var> skips;
  Var x = input;
  for (int l = 0; l < cfg.depth; ++l) {
    x = block(x);
    skips.push_back(x);
    x = ad::avg_pool2(g, x);
  }
  x = block(x);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    x = ad::upsample2(g, x);
    if (cfg.skip_connections) x = ad::concat(g, x, skips[static_cast<std::size_t>(l)]);
    x = block(x);
  }
  return apply_conv(g, params, x, layers[next++]);
}

ImageGrid net_forward(const ParamVector& params, const ImageGrid& image, const NetConfig& cfg) {
  Graph g;
  Tensor pt(Shape{static_cast<int>(params.size()), 1, 1});
  pt.data = params;
  Var p = g.constant(std::move(pt));
  Var out = unet_forward(g, p, g.constant(to_tensor(image.values())), cfg);
  return ImageGrid(to_grid(g.value(out)), image.pixel_size());
}

}  // namespace ctssl
