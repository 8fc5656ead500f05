#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "ctssl/noise.hpp"

namespace ctssl {

/// Linear model used to compare the supervised and self-supervised risk
/// minimizers over linear reconstruction maps f(u) = F u.
struct LinearTheoremOptions {
  /// Weighting operator (q x m); identity when empty.
  std::optional<Eigen::MatrixXd> weighting;
  /// Scale of the correlated noise; 0 gives noiseless data.
  double noise_level = 0.5;
  /// Bandwidth (in entries) of the Gaussian correlation along the data vector.
  double noise_sigma = 1.0;
};

struct LinearTheoremReport {
  Eigen::MatrixXd supervised_minimizer;  // argmin E||W A F B Z - W A X||^2
  Eigen::MatrixXd surrogate_minimizer;   // argmin E||W A F B Z - W (2Y - Z)||^2
  double distance = 0.0;                 // spectral norm of the difference
  bool regularized = false;              // normal equations needed a ridge term
};

/// Draws `num_mc` samples of X ~ N(0, I_n), Y = A X + Xi, Z = Y + N with Xi, N
/// i.i.d. correlated Gaussian, A (m x n) Gaussian and B = pinv(A), then
/// solves both empirical least-squares problems over F by normal equations.
LinearTheoremReport check_theorem1_linear(int dim_n, int dim_m, int num_mc, std::uint64_t seed,
                                          const LinearTheoremOptions& options = {});

struct ConditionalIdentityOptions {
  int image_width = 4;
  int num_angles = 4;
  int num_bins = 8;
};

struct ConditionalIdentityReport {
  /// |mean| / standard error of the grand mean of A X - (2Y - Z).
  double unconditional_zscore = 0.0;
  /// max over bins of |mean of A X - (2Y - Z)| at the conditioning pixel,
  /// divided by that pixel's standard deviation; bins are equal-count
  /// quantile bins of Z at the same pixel.
  double binned_residual = 0.0;
  int bins_used = 0;
  int bins_skipped = 0;
};

/// Monte-Carlo check of E[A X - (2Y - Z) | Z] = 0 on a small sinogram.
/// X has i.i.d. uniform [0, 1] pixels; Xi and N come from `noise`.
ConditionalIdentityReport check_conditional_identity(const NoiseSpec& noise, int num_mc,
                                                     std::uint64_t seed,
                                                     const ConditionalIdentityOptions& options = {});

}  // namespace ctssl
