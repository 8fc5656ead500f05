#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ctssl/unet.hpp"

namespace ctssl {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive-moment optimizer state.
struct OptimState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimState fresh(std::size_t n, double lr);
};

/// One bias-corrected Adam update. Throws NonFiniteError on a non-finite
/// gradient.
std::pair<OptimState, ParamVector> adam_step(OptimState state, ParamVector params,
                                             const ParamVector& grad);

}  // namespace ctssl
