#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Dynamic range max - min of `clean` inside the reconstruction circle.
double clean_data_range(const ImageGrid& clean);

/// 10 log10(range^2 / MSE) over the inscribed circle. `data_range` defaults
/// to clean_data_range(clean).
double psnr(const ImageGrid& recon, const ImageGrid& clean,
            std::optional<double> data_range = std::nullopt);

struct SsimOptions {
  int window = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-window SSIM averaged over the inscribed circle. Local statistics
/// only use pixels inside the circle (window weights renormalized), so the
/// value ignores everything outside it.
double ssim(const ImageGrid& recon, const ImageGrid& clean,
            std::optional<double> data_range = std::nullopt,
            const SsimOptions& options = {});

/// Per-sample values with their mean and (population) standard deviation.
struct MetricReport {
  std::vector<double> psnr;
  std::vector<double> ssim;

  void add(double p, double s);
  double mean_psnr() const;
  double std_psnr() const;
  double mean_ssim() const;
  double std_ssim() const;
};

double mean(std::span<const double> v);
double stddev(std::span<const double> v);
double median(std::vector<double> v);

}  // namespace ctssl
