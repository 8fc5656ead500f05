#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ctssl/metrics.hpp"
#include "ctssl/phantom.hpp"

using namespace ctssl;

namespace {

bool in_circle(int r, int c, int n) {
  const double h = 0.5 * (n - 1), dr = r - h, dc = c - h;
  return dr * dr + dc * dc <= 0.25 * n * n;
}

ImageGrid random_image(int n, std::mt19937_64& rng) {
  ImageGrid img(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.values().values()) v = u(rng);
  return img;
}

double naive_psnr(const ImageGrid& x, const ImageGrid& y) {
  const int n = x.width();
  double lo = 1e300, hi = -1e300, se = 0.0;
  int count = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (in_circle(r, c, n)) {
        lo = std::min(lo, y(r, c));
        hi = std::max(hi, y(r, c));
        se += (x(r, c) - y(r, c)) * (x(r, c) - y(r, c));
        ++count;
      }
  return 10.0 * std::log10((hi - lo) * (hi - lo) / (se / count));
}

// Textbook SSIM of each in-circle pixel, computed from the list of in-circle
// neighbours with normalized Gaussian weights and centred second moments.
double naive_ssim(const ImageGrid& x, const ImageGrid& y, double range) {
  const int n = x.width();
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double total = 0.0;
  int count = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (!in_circle(r, c, n)) continue;
      std::vector<double> w, xs, ys;
      for (int rr = r - 5; rr <= r + 5; ++rr)
        for (int cc = c - 5; cc <= c + 5; ++cc) {
          if (rr < 0 || cc < 0 || rr >= n || cc >= n || !in_circle(rr, cc, n)) continue;
          w.push_back(std::exp(-((rr - r) * (rr - r) + (cc - c) * (cc - c)) / (2 * 1.5 * 1.5)));
          xs.push_back(x(rr, cc));
          ys.push_back(y(rr, cc));
        }
      double ws = 0.0;
      for (double v : w) ws += v;
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        mx += w[i] / ws * xs[i];
        my += w[i] / ws * ys[i];
      }
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        vx += w[i] / ws * (xs[i] - mx) * (xs[i] - mx);
        vy += w[i] / ws * (ys[i] - my) * (ys[i] - my);
        cxy += w[i] / ws * (xs[i] - mx) * (ys[i] - my);
      }
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("psnr: identical, constant offset, naive oracle") {
  std::mt19937_64 rng(1);
  const ImageGrid clean = random_image(32, rng);
  CHECK(psnr(clean, clean) == kPsnrIdentical);

  ImageGrid unit = clean;
  unit(16, 16) = 0.0;
  unit(15, 16) = 1.0;
  ImageGrid shifted = unit;
  for (double& v : shifted.values().values()) v += 0.1;
  CHECK(psnr(shifted, unit, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

  const ImageGrid recon = random_image(32, rng);
  CHECK(std::abs(psnr(recon, clean) - naive_psnr(recon, clean)) < 1e-10);
  CHECK_THROWS_AS(psnr(ImageGrid(16), clean), ContractError);
}

TEST_CASE("psnr: adding a constant changes the MSE by c^2") {
  std::mt19937_64 rng(2);
  const ImageGrid clean = random_image(24, rng);
  const double range = clean_data_range(clean);
  const double c = 0.05;
  ImageGrid recon = clean;
  for (double& v : recon.values().values()) v += c;
  const double mse = range * range / std::pow(10.0, psnr(recon, clean) / 10.0);
  CHECK(mse == doctest::Approx(c * c).epsilon(1e-10));
}

TEST_CASE("ssim: identity, anticorrelation, oracle, symmetry") {
  std::mt19937_64 rng(3);
  const ImageGrid clean = shepp_logan(32);
  CHECK(ssim(clean, clean) == 1.0);

  // Checkerboard: zero local mean under the Gaussian window.
  ImageGrid zero_mean(32);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) zero_mean(r, c) = ((r + c) % 2 == 0) ? 0.5 : -0.5;
  ImageGrid neg = zero_mean;
  for (double& v : neg.values().values()) v = -v;
  CHECK(ssim(neg, zero_mean) < 0.0);

  const ImageGrid a = random_image(16, rng), b = random_image(16, rng);
  const double range = clean_data_range(b);
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b, range)) < 1e-8);
  CHECK(std::abs(ssim(a, b, 1.0) - ssim(b, a, 1.0)) < 1e-12);
  CHECK(ssim(a, b) <= 1.0);
  CHECK_THROWS_AS(ssim(ImageGrid(8), b), ContractError);
}

TEST_CASE("metrics ignore values outside the reconstruction circle") {
  std::mt19937_64 rng(4);
  const ImageGrid clean = random_image(32, rng);
  const ImageGrid recon = random_image(32, rng);
  ImageGrid recon2 = recon, clean2 = clean;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      if (!in_circle(r, c, 32)) {
        recon2(r, c) = 100.0;
        clean2(r, c) = -50.0;
      }
  CHECK(psnr(recon2, clean2) == psnr(recon, clean));
  CHECK(ssim(recon2, clean2) == ssim(recon, clean));
}

TEST_CASE("MetricReport statistics") {
  MetricReport r;
  r.add(20.0, 0.5);
  r.add(22.0, 0.7);
  CHECK(r.mean_psnr() == 21.0);
  CHECK(r.std_psnr() == 1.0);
  CHECK(r.mean_ssim() == doctest::Approx(0.6));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
