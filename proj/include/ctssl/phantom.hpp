#pragma once

#include <cstdint>
#include <vector>

#include "ctssl/geometry.hpp"

namespace ctssl {

struct Ellipse {
  double intensity = 0.0;
  double semi_x = 0.0;  // semi-axes in units of the image half-width
  double semi_y = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double angle_deg = 0.0;
};

/// Sum of ellipse indicators, sampled with `supersample`^2 points per pixel.
/// Coordinates span [-1, 1] across the image, y pointing up.
ImageGrid render_ellipses(int width, const std::vector<Ellipse>& ellipses, int supersample = 3);

/// Modified (high-contrast) Shepp-Logan head phantom, values in [0, 1].
ImageGrid shepp_logan(int width);

/// Uniform disk of the given radius in pixels, centred, with anti-aliased edge.
ImageGrid disk_phantom(int width, double radius_pixels);

/// Random walnut-like phantom: a dense elliptical shell around a cavity that
/// holds a few random lobes. Values in [0, 1], contained in the inscribed
/// circle.
ImageGrid random_phantom(int width, std::uint64_t seed);

std::vector<ImageGrid> phantom_set(int count, int width, std::uint64_t seed);

}  // namespace ctssl
