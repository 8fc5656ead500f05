#include "ctssl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ctssl/radon.hpp"

namespace ctssl {
namespace {

void check_pair(const ImageGrid& a, const ImageGrid& b) {
  require(a.width() == b.width(), "metrics: image shapes differ");
}

}  // namespace

double clean_data_range(const ImageGrid& clean) {
  const Grid mask = reconstruction_mask(clean.width());
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int r = 0; r < clean.width(); ++r) {
    for (int c = 0; c < clean.width(); ++c) {
      if (mask(r, c) == 0.0) continue;
      lo = std::min(lo, clean(r, c));
      hi = std::max(hi, clean(r, c));
    }
  }
  return hi - lo;
}

double psnr(const ImageGrid& recon, const ImageGrid& clean, std::optional<double> data_range) {
  check_pair(recon, clean);
  const double range = data_range.value_or(clean_data_range(clean));
  require(range > 0.0, "psnr: data range must be positive");
  const Grid mask = reconstruction_mask(clean.width());
  double se = 0.0;
  double count = 0.0;
  for (int r = 0; r < clean.width(); ++r) {
    for (int c = 0; c < clean.width(); ++c) {
      if (mask(r, c) == 0.0) continue;
      const double d = recon(r, c) - clean(r, c);
      se += d * d;
      count += 1.0;
    }
  }
  const double mse = se / count;
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(range * range / mse);
}

double ssim(const ImageGrid& recon, const ImageGrid& clean, std::optional<double> data_range,
            const SsimOptions& options) {
  check_pair(recon, clean);
  require(options.window >= 1 && options.window % 2 == 1, "ssim: window must be odd");
  const double range = data_range.value_or(clean_data_range(clean));
  require(range > 0.0, "ssim: data range must be positive");
  const double c1 = (options.k1 * range) * (options.k1 * range);
  const double c2 = (options.k2 * range) * (options.k2 * range);
  const int n = clean.width();
  const int half = options.window / 2;
  std::vector<double> g(static_cast<std::size_t>(options.window));
  for (int i = -half; i <= half; ++i) {
    g[static_cast<std::size_t>(i + half)] =
        std::exp(-(i * i) / (2.0 * options.window_sigma * options.window_sigma));
  }
  const Grid mask = reconstruction_mask(n);

  double total = 0.0;
  double count = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (mask(r, c) == 0.0) continue;
      double wsum = 0.0, mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dr = -half; dr <= half; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= n) continue;
        for (int dc = -half; dc <= half; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= n || mask(rr, cc) == 0.0) continue;
          const double w = g[static_cast<std::size_t>(dr + half)] * g[static_cast<std::size_t>(dc + half)];
          const double x = recon(rr, cc);
          const double y = clean(rr, cc);
          wsum += w;
          mx += w * x;
          my += w * y;
          sxx += w * x * x;
          syy += w * y * y;
          sxy += w * x * y;
        }
      }
      mx /= wsum;
      my /= wsum;
      const double vx = sxx / wsum - mx * mx;
      const double vy = syy / wsum - my * my;
      const double cov = sxy / wsum - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      count += 1.0;
    }
  }
  return total / count;
}

void MetricReport::add(double p, double s) {
  psnr.push_back(p);
  ssim.push_back(s);
}

double MetricReport::mean_psnr() const { return mean(psnr); }
double MetricReport::std_psnr() const { return stddev(psnr); }
double MetricReport::mean_ssim() const { return mean(ssim); }
double MetricReport::std_ssim() const { return stddev(ssim); }

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ctssl
