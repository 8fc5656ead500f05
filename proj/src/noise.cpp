#include "ctssl/noise.hpp"

#include <cmath>

namespace ctssl {

int NoiseSpec::radius() const {
  return kernel_radius > 0 ? kernel_radius
                           : static_cast<int>(std::ceil(3.0 * sigma));
}

void NoiseSpec::validate() const {
  require(std::isfinite(delta) && delta >= 0.0, "noise: delta must be >= 0");
  require(std::isfinite(sigma) && sigma > 0.0, "noise: sigma must be > 0");
  require(kernel_radius >= 0, "noise: kernel radius must be >= 1 (or 0 for default)");
  require(radius() >= 1, "noise: kernel radius must be >= 1");
}

std::mt19937_64 RngStream::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample),
                    static_cast<std::uint32_t>(sample >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(iteration >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> gaussian_kernel_1d(double sigma, int radius) {
  require(sigma > 0.0 && std::isfinite(sigma), "gaussian_kernel: sigma must be > 0");
  require(radius >= 0, "gaussian_kernel: radius must be >= 0");
  std::vector<double> g(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    g[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : g) v /= sum;
  return g;
}

Grid gaussian_kernel(double sigma, int radius) {
  const auto g = gaussian_kernel_1d(sigma, radius);
  const int size = 2 * radius + 1;
  Grid k(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      k(i, j) = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
    }
  }
  return k;
}

Grid sample_correlated_noise(const NoiseSpec& spec, int rows, int cols,
                             const RngStream& stream) {
  spec.validate();
  Grid out(rows, cols);
  if (spec.delta == 0.0) return out;

  auto engine = stream.engine();
  std::normal_distribution<double> normal(0.0, spec.delta);
  Grid white(rows, cols);
  for (double& v : white.values()) v = normal(engine);

  // The Gaussian kernel is separable; convolve along detectors, then angles.
  const int r = spec.radius();
  const auto g = gaussian_kernel_1d(spec.sigma, r);
  Grid tmp(rows, cols);
  for (int a = 0; a < rows; ++a) {
    for (int d = 0; d < cols; ++d) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int src = d - k;
        if (src >= 0 && src < cols) acc += g[static_cast<std::size_t>(k + r)] * white(a, src);
      }
      tmp(a, d) = acc;
    }
  }
  for (int a = 0; a < rows; ++a) {
    for (int d = 0; d < cols; ++d) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int src = a - k;
        if (src >= 0 && src < rows) acc += g[static_cast<std::size_t>(k + r)] * tmp(src, d);
      }
      out(a, d) = acc;
    }
  }
  return out;
}

Sinogram sample_sinogram_noise(const NoiseSpec& spec, const ScanGeometry& geom,
                               const RngStream& stream) {
  Grid field = sample_correlated_noise(spec, geom.num_angles, geom.num_detectors, stream);
  if (geom.angle_subset.empty()) return Sinogram(geom, std::move(field));
  Sinogram out(geom);
  for (int i = 0; i < geom.num_views(); ++i) {
    const int row = geom.angle_subset[static_cast<std::size_t>(i)];
    for (int d = 0; d < geom.num_detectors; ++d) out(i, d) = field(row, d);
  }
  return out;
}

double filtered_noise_variance(const NoiseSpec& spec) {
  return filtered_noise_covariance(spec, 0, 0);
}

double filtered_noise_covariance(const NoiseSpec& spec, int da, int dd) {
  spec.validate();
  const int r = spec.radius();
  const Grid k = gaussian_kernel(spec.sigma, r);
  const int size = 2 * r + 1;
  double acc = 0.0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const int i2 = i + da;
      const int j2 = j + dd;
      if (i2 >= 0 && i2 < size && j2 >= 0 && j2 < size) acc += k(i, j) * k(i2, j2);
    }
  }
  return spec.delta * spec.delta * acc;
}

}  // namespace ctssl
