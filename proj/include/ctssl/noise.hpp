#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Parameters of the correlated sinogram noise: white Gaussian noise of
/// standard deviation `delta` convolved with a unit-sum Gaussian kernel of
/// bandwidth `sigma` (in sinogram samples), truncated at `kernel_radius`.
struct NoiseSpec {
  double delta = 0.0;
  double sigma = 2.0;
  int kernel_radius = 0;  // 0 selects ceil(3 * sigma)
  std::uint64_t seed = 0;

  int radius() const;
  void validate() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// Identifies one independent random sequence: (seed, sample, iteration).
///
/// Dataset noise for sample t uses iteration 0; the fresh draw at training
/// iteration i >= 1 uses iteration i.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
  std::uint64_t iteration = 0;

  /// Reserved iteration index for noise drawn at inference time.
  static constexpr std::uint64_t kInference = ~std::uint64_t{0};

  std::mt19937_64 engine() const;
};

/// (2r+1) x (2r+1) Gaussian kernel, normalized to unit sum.
Grid gaussian_kernel(double sigma, int radius);

/// Normalized 1D factor g with gaussian_kernel(i, j) = g[i] * g[j].
std::vector<double> gaussian_kernel_1d(double sigma, int radius);

/// White N(0, delta^2) noise of shape rows x cols from `stream`, convolved
/// with the Gaussian kernel (zero-padded boundary).
Grid sample_correlated_noise(const NoiseSpec& spec, int rows, int cols,
                             const RngStream& stream);

/// Noise for a sinogram of `geom`. The field is drawn on the full angle grid
/// and restricted to the active views, so sparse-view noise is exactly a row
/// selection of full-view noise from the same stream.
Sinogram sample_sinogram_noise(const NoiseSpec& spec, const ScanGeometry& geom,
                               const RngStream& stream);

/// Per-pixel variance of the filtered noise away from the border:
/// delta^2 * sum_k kernel(k)^2.
double filtered_noise_variance(const NoiseSpec& spec);

/// delta^2 * (kernel autocorrelation at lag (da, dd)); the covariance of two
/// interior noise pixels separated by (da, dd).
double filtered_noise_covariance(const NoiseSpec& spec, int da, int dd);

}  // namespace ctssl
