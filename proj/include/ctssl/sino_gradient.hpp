#pragma once

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Forward differences along the angle and detector axes. The last row of
/// d_angle and the last column of d_detector are zero (replicate boundary).
GradField grad_forward(const Sinogram& sino);

/// Exact transpose of grad_forward (negative divergence with the matching
/// boundary convention). The result carries `geom`.
Sinogram grad_adjoint(const GradField& field, const ScanGeometry& geom);

}  // namespace ctssl
