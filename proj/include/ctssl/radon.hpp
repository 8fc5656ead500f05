#pragma once

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Discrete parallel-beam Radon transform.
///
/// Joseph-style ray tracing: each ray is stepped along whichever image axis
/// it crosses most steeply, and the image is linearly interpolated between
/// the two nearest pixels of every crossed row (or column). Values beyond the
/// image border are zero.
Sinogram radon_forward(const ImageGrid& image, const ScanGeometry& geom);

/// Exact transpose of radon_forward for the same discretization.
ImageGrid radon_adjoint(const Sinogram& sino);

/// Pixels whose centre lies inside the circle inscribed in the image.
Grid reconstruction_mask(int width);

}  // namespace ctssl
