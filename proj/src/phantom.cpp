#include "ctssl/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ctssl/noise.hpp"

namespace ctssl {

ImageGrid render_ellipses(int width, const std::vector<Ellipse>& ellipses, int supersample) {
  require(supersample >= 1, "render_ellipses: supersample must be >= 1");
  ImageGrid image(width);
  const double half = 0.5 * width;
  const double weight = 1.0 / (supersample * supersample);
  for (int r = 0; r < width; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int sy = 0; sy < supersample; ++sy) {
        for (int sx = 0; sx < supersample; ++sx) {
          const double px = (c + (sx + 0.5) / supersample - half) / half;
          const double py = (half - r - (sy + 0.5) / supersample) / half;
          for (const Ellipse& e : ellipses) {
            const double t = e.angle_deg * std::numbers::pi / 180.0;
            const double dx = px - e.center_x;
            const double dy = py - e.center_y;
            const double u = (dx * std::cos(t) + dy * std::sin(t)) / e.semi_x;
            const double v = (-dx * std::sin(t) + dy * std::cos(t)) / e.semi_y;
            if (u * u + v * v <= 1.0) acc += weight * e.intensity;
          }
        }
      }
      image(r, c) = acc;
    }
  }
  return image;
}

ImageGrid shepp_logan(int width) {
  const std::vector<Ellipse> table{
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},       {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},   {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},  {0.1, 0.023, 0.046, 0.06, -0.605, 0.0}};
  return render_ellipses(width, table);
}

ImageGrid disk_phantom(int width, double radius_pixels) {
  const double r = radius_pixels / (0.5 * width);
  return render_ellipses(width, {Ellipse{1.0, r, r, 0.0, 0.0, 0.0}}, 8);
}

ImageGrid random_phantom(int width, std::uint64_t seed) {
  auto engine = RngStream{seed, 0x9e3779b97f4a7c15ull, 0}.engine();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(engine); };

  std::vector<Ellipse> parts;
  const double sx = between(0.62, 0.8);
  const double sy = between(0.62, 0.8);
  const double tilt = between(-30.0, 30.0);
  const double shell = between(0.8, 1.0);
  const double thickness = between(0.08, 0.14);
  const double cavity = between(0.15, 0.3);
  parts.push_back({shell, sx, sy, 0.0, 0.0, tilt});
  parts.push_back({cavity - shell, sx - thickness, sy - thickness, 0.0, 0.0, tilt});

  const int lobes = 3 + static_cast<int>(u(engine) * 4.0);
  for (int i = 0; i < lobes; ++i) {
    const double ang = between(0.0, 2.0 * std::numbers::pi);
    const double rad = between(0.0, 0.35);
    parts.push_back({between(0.25, 0.6), between(0.08, 0.25), between(0.08, 0.25),
                     rad * std::cos(ang) * (sx - thickness), rad * std::sin(ang) * (sy - thickness),
                     between(0.0, 180.0)});
  }
  ImageGrid image = render_ellipses(width, parts);
  for (double& v : image.values().values()) v = std::clamp(v, 0.0, 1.0);
  return image;
}

std::vector<ImageGrid> phantom_set(int count, int width, std::uint64_t seed) {
  std::vector<ImageGrid> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(random_phantom(width, seed * 1000003ull + static_cast<std::uint64_t>(i)));
  }
  return out;
}

}  // namespace ctssl
