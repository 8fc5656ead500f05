#include "ctssl/theory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "ctssl/radon.hpp"

namespace ctssl {
namespace {

// Solves (M^T M) F (U U^T) = M^T W T U^T for F. Returns whether a ridge term
// was needed.
bool solve_normal_equations(const Eigen::MatrixXd& m, const Eigen::MatrixXd& w,
                            const Eigen::MatrixXd& tu, const Eigen::MatrixXd& uu,
                            Eigen::MatrixXd& f) {
  Eigen::MatrixXd left = m.transpose() * m;
  Eigen::MatrixXd right = uu;
  bool regularized = false;
  auto well_posed = [](const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    const auto ev = eig.eigenvalues();
    return ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff());
  };
  if (!well_posed(left) || !well_posed(right)) {
    regularized = true;
    const double ridge = 1e-10;
    left += ridge * std::max(1.0, left.trace()) * Eigen::MatrixXd::Identity(left.rows(), left.cols());
    right += ridge * std::max(1.0, right.trace()) * Eigen::MatrixXd::Identity(right.rows(), right.cols());
  }
  const Eigen::MatrixXd rhs = m.transpose() * w * tu;
  const Eigen::MatrixXd tmp = left.ldlt().solve(rhs);
  // F right = tmp  <=>  right^T F^T = tmp^T, right symmetric.
  f = right.ldlt().solve(tmp.transpose()).transpose();
  return regularized;
}

}  // namespace

LinearTheoremReport check_theorem1_linear(int dim_n, int dim_m, int num_mc, std::uint64_t seed,
                                          const LinearTheoremOptions& options) {
  require(dim_n >= 1 && dim_n <= 16 && dim_m >= 1 && dim_m <= 16,
          "theorem check: dimensions must be in [1, 16]");
  require(num_mc >= 1, "theorem check: need at least one sample");
  require(options.noise_level >= 0.0, "theorem check: noise level must be >= 0");

  std::mt19937_64 engine(RngStream{seed, 0, 0}.engine());
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd a(dim_m, dim_n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(engine) / std::sqrt(dim_m);
  const Eigen::MatrixXd b = a.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd w =
      options.weighting ? *options.weighting : Eigen::MatrixXd::Identity(dim_m, dim_m);
  require(w.cols() == dim_m, "theorem check: weighting must have m columns");

  // Correlation factor: Gaussian smoothing along the data vector.
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(dim_m, dim_m);
  for (int i = 0; i < dim_m; ++i) {
    double sum = 0.0;
    for (int j = 0; j < dim_m; ++j) {
      corr(i, j) = std::exp(-(i - j) * (i - j) / (2.0 * options.noise_sigma * options.noise_sigma));
      sum += corr(i, j);
    }
    corr.row(i) /= sum;
  }
  corr *= options.noise_level;

  Eigen::MatrixXd uu = Eigen::MatrixXd::Zero(dim_n, dim_n);
  Eigen::MatrixXd tu_sup = Eigen::MatrixXd::Zero(dim_m, dim_n);
  Eigen::MatrixXd tu_sur = Eigen::MatrixXd::Zero(dim_m, dim_n);
  Eigen::VectorXd x(dim_n), e1(dim_m), e2(dim_m);
  for (int s = 0; s < num_mc; ++s) {
    for (int i = 0; i < dim_n; ++i) x(i) = normal(engine);
    for (int i = 0; i < dim_m; ++i) e1(i) = normal(engine);
    for (int i = 0; i < dim_m; ++i) e2(i) = normal(engine);
    const Eigen::VectorXd ax = a * x;
    const Eigen::VectorXd y = ax + corr * e1;
    const Eigen::VectorXd z = y + corr * e2;
    const Eigen::VectorXd u = b * z;
    const Eigen::VectorXd target = 2.0 * y - z;
    uu.noalias() += u * u.transpose();
    tu_sup.noalias() += ax * u.transpose();
    tu_sur.noalias() += target * u.transpose();
  }

  const Eigen::MatrixXd m = w * a;
  LinearTheoremReport report;
  report.regularized |= solve_normal_equations(m, w, tu_sup, uu, report.supervised_minimizer);
  report.regularized |= solve_normal_equations(m, w, tu_sur, uu, report.surrogate_minimizer);
  if (report.regularized) {
    std::cerr << "theorem check: normal equations rank-deficient, solved with a ridge term\n";
  }
  const Eigen::MatrixXd diff = report.supervised_minimizer - report.surrogate_minimizer;
  report.distance = diff.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(diff).singularValues()(0);
  return report;
}

ConditionalIdentityReport check_conditional_identity(const NoiseSpec& noise, int num_mc,
                                                     std::uint64_t seed,
                                                     const ConditionalIdentityOptions& options) {
  noise.validate();
  require(num_mc >= 2, "identity check: need at least two samples");
  require(options.num_bins >= 1, "identity check: need at least one bin");
  const ScanGeometry geom = ScanGeometry::parallel(options.image_width, options.num_angles);
  const int rows = geom.num_views();
  const int cols = geom.num_detectors;
  const int pixel_row = rows / 2;
  const int pixel_col = cols / 2;

  std::mt19937_64 engine(RngStream{seed, ~std::uint64_t{0}, 0}.engine());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> z_pixel(static_cast<std::size_t>(num_mc));
  std::vector<double> r_pixel(static_cast<std::size_t>(num_mc));
  double grand_sum = 0.0;
  double grand_sq = 0.0;
  ImageGrid x(options.image_width);
  for (int s = 0; s < num_mc; ++s) {
    for (double& v : x.values().values()) v = uniform(engine);
    const Grid ax = radon_forward(x, geom).values();
    const Grid xi = sample_correlated_noise(noise, rows, cols, RngStream{noise.seed ^ seed, static_cast<std::uint64_t>(s), 0});
    const Grid eta = sample_correlated_noise(noise, rows, cols, RngStream{noise.seed ^ seed, static_cast<std::uint64_t>(s), 1});
    const Grid y = ax + xi;
    const Grid z = y + eta;
    const Grid residual = ax - (2.0 * y - z);
    double m = 0.0;
    for (double v : residual.values()) m += v;
    m /= static_cast<double>(residual.size());
    grand_sum += m;
    grand_sq += m * m;
    z_pixel[static_cast<std::size_t>(s)] = z(pixel_row, pixel_col);
    r_pixel[static_cast<std::size_t>(s)] = residual(pixel_row, pixel_col);
  }

  ConditionalIdentityReport report;
  const double n = static_cast<double>(num_mc);
  const double grand_mean = grand_sum / n;
  const double grand_var = std::max(0.0, grand_sq / n - grand_mean * grand_mean);
  const double se = std::sqrt(grand_var / n);
  report.unconditional_zscore = se > 0.0 ? std::abs(grand_mean) / se : 0.0;

  const double pixel_std = std::sqrt(std::max(
      0.0, std::inner_product(r_pixel.begin(), r_pixel.end(), r_pixel.begin(), 0.0) / n -
               std::pow(std::accumulate(r_pixel.begin(), r_pixel.end(), 0.0) / n, 2)));
  if (pixel_std == 0.0) {
    report.bins_used = options.num_bins;
    return report;
  }

  std::vector<int> order(static_cast<std::size_t>(num_mc));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return z_pixel[static_cast<std::size_t>(i)] < z_pixel[static_cast<std::size_t>(j)];
  });
  for (int bin = 0; bin < options.num_bins; ++bin) {
    const std::size_t lo = static_cast<std::size_t>(num_mc) * static_cast<std::size_t>(bin) / static_cast<std::size_t>(options.num_bins);
    const std::size_t hi = static_cast<std::size_t>(num_mc) * static_cast<std::size_t>(bin + 1) / static_cast<std::size_t>(options.num_bins);
    if (hi <= lo) {
      ++report.bins_skipped;
      std::cerr << "identity check: bin " << bin << " is empty, skipped\n";
      continue;
    }
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += r_pixel[static_cast<std::size_t>(order[i])];
    const double bin_mean = acc / static_cast<double>(hi - lo);
    report.binned_residual = std::max(report.binned_residual, std::abs(bin_mean) / pixel_std);
    ++report.bins_used;
  }
  return report;
}

}  // namespace ctssl
