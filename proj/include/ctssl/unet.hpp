#pragma once

#include <cstdint>
#include <vector>

#include "ctssl/autodiff.hpp"
#include "ctssl/geometry.hpp"

namespace ctssl {

/// Flattened trainable weights of the network.
using ParamVector = std::vector<double>;

/// Image-to-image U-Net: `depth` levels of (conv, act, conv, act) followed by
/// 2x average pooling, a bottleneck block, and mirrored decoder levels with
/// nearest upsampling and optional skip concatenation. A final 1x1
/// convolution maps to one output channel. Level l has base_channels * 2^l
/// channels. No global residual connection.
struct NetConfig {
  int depth = 3;
  int base_channels = 16;
  int kernel_size = 3;
  bool skip_connections = true;
  double leaky_slope = 0.1;

  void validate() const;
  /// Full-scale preset (depth 4, 64 base channels).
  static NetConfig large_preset();

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// One convolution in the flat parameter layout: weights {out, in, k*k}
/// at `offset`, followed by `out` biases.
struct ConvLayout {
  int in = 0;
  int out = 0;
  int kernel = 0;
  std::size_t offset = 0;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in) * out * kernel * kernel;
  }
  std::size_t count() const { return weight_count() + static_cast<std::size_t>(out); }
};

/// Layers in parameter order: encoder levels, bottleneck, decoder levels
/// (deepest first), final 1x1 projection.
std::vector<ConvLayout> conv_layout(const NetConfig& cfg);

/// Number of trainable parameters. With c_l = base * 2^l, K = k^2 and
/// s = 1 if skips are enabled:
///   encoder l:   (c_{l-1} c_l + c_l^2) K + 2 c_l      (c_{-1} = 1)
///   bottleneck:  (c_{D-1} c_D + c_D^2) K + 2 c_D
///   decoder l:   ((c_{l+1} + s c_l) c_l + c_l^2) K + 2 c_l
///   output:      c_0 + 1
std::size_t param_count(const NetConfig& cfg);

/// Fan-in scaled uniform weights (bound sqrt(6 / ((1 + a^2) fan_in)) for
/// leaky slope a), zero biases.
ParamVector init_params(const NetConfig& cfg, std::uint64_t seed);

/// Builds the network on a graph. `input` has shape {1, w, w} with w
/// divisible by 2^depth.
Var unet_forward(Graph& g, Var params, Var input, const NetConfig& cfg);

/// Forward pass outside of training.
ImageGrid net_forward(const ParamVector& params, const ImageGrid& image,
                      const NetConfig& cfg);

}  // namespace ctssl
