#include "ctssl/radon.hpp"

#include <cmath>

namespace ctssl {
namespace {

// Visits every (row, col, weight) triple contributing to the ray of view
// angle `theta` and detector offset `s`. Forward and adjoint share this
// traversal so they are an exact transpose pair.
template <typename Visit>
void trace_ray(int n, double pixel_size, double theta, double s, Visit&& visit) {
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double half = 0.5 * (n - 1);
  if (std::abs(c) >= std::abs(sn)) {
    // Step through rows: y fixed, x = (s - y sin) / cos.
    const double w = pixel_size / std::abs(c);
    for (int r = 0; r < n; ++r) {
      const double y = (half - r) * pixel_size;
      const double u = (s - y * sn) / (c * pixel_size) + half;
      if (u <= -1.0 || u >= n) continue;
      const double fl = std::floor(u);
      const int c0 = static_cast<int>(fl);
      const double f = u - fl;
      if (c0 >= 0) visit(r, c0, w * (1.0 - f));
      if (c0 + 1 < n) visit(r, c0 + 1, w * f);
    }
  } else {
    // Step through columns: x fixed, y = (s - x cos) / sin.
    const double w = pixel_size / std::abs(sn);
    for (int col = 0; col < n; ++col) {
      const double x = (col - half) * pixel_size;
      const double y = (s - x * c) / sn;
      const double v = half - y / pixel_size;
      if (v <= -1.0 || v >= n) continue;
      const double fl = std::floor(v);
      const int r0 = static_cast<int>(fl);
      const double f = v - fl;
      if (r0 >= 0) visit(r0, col, w * (1.0 - f));
      if (r0 + 1 < n) visit(r0 + 1, col, w * f);
    }
  }
}

double detector_offset(const ScanGeometry& g, int d) {
  return (d - 0.5 * (g.num_detectors - 1)) * g.detector_spacing;
}

}  // namespace

Sinogram radon_forward(const ImageGrid& image, const ScanGeometry& geom) {
  geom.validate();
  require(image.width() == geom.image_width,
          "radon_forward: image width does not match geometry");
  require(std::abs(image.pixel_size() - geom.pixel_size) < 1e-12,
          "radon_forward: pixel size does not match geometry");
  const int n = image.width();
  const auto angles = geom.angles();
  Sinogram sino(geom);
  const Grid& img = image.values();
  for (int a = 0; a < static_cast<int>(angles.size()); ++a) {
    for (int d = 0; d < geom.num_detectors; ++d) {
      double acc = 0.0;
      trace_ray(n, geom.pixel_size, angles[static_cast<std::size_t>(a)],
                detector_offset(geom, d),
                [&](int r, int c, double w) { acc += w * img(r, c); });
      sino(a, d) = acc;
    }
  }
  return sino;
}

ImageGrid radon_adjoint(const Sinogram& sino) {
  const ScanGeometry& geom = sino.geometry();
  geom.validate();
  require(sino.num_views() == geom.num_views() &&
              sino.num_detectors() == geom.num_detectors,
          "radon_adjoint: sinogram shape does not match geometry");
  const int n = geom.image_width;
  const auto angles = geom.angles();
  ImageGrid image(n, geom.pixel_size);
  Grid& img = image.values();
  for (int a = 0; a < static_cast<int>(angles.size()); ++a) {
    for (int d = 0; d < geom.num_detectors; ++d) {
      const double value = sino(a, d);
      if (value == 0.0) continue;
      trace_ray(n, geom.pixel_size, angles[static_cast<std::size_t>(a)],
                detector_offset(geom, d),
                [&](int r, int c, double w) { img(r, c) += w * value; });
    }
  }
  return image;
}

Grid reconstruction_mask(int width) {
  Grid mask(width, width);
  const double half = 0.5 * (width - 1);
  const double radius = 0.5 * width;
  for (int r = 0; r < width; ++r) {
    for (int c = 0; c < width; ++c) {
      const double dy = r - half;
      const double dx = c - half;
      mask(r, c) = dx * dx + dy * dy <= radius * radius ? 1.0 : 0.0;
    }
  }
  return mask;
}

}  // namespace ctssl
