#include "ctssl/adam.hpp"

#include <cmath>

namespace ctssl {

OptimState OptimState::fresh(std::size_t n, double lr) {
  OptimState s;
  s.first_moment.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.lr = lr;
  return s;
}

std::pair<OptimState, ParamVector> adam_step(OptimState state, ParamVector params,
                                             const ParamVector& grad) {
  require(params.size() == grad.size() && state.first_moment.size() == params.size() &&
              state.second_moment.size() == params.size(),
          "adam_step: size mismatch");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NonFiniteError("adam_step: non-finite gradient");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    params[i] -= state.lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
  }
  return {std::move(state), std::move(params)};
}

}  // namespace ctssl
