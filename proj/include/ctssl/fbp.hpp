#pragma once

#include <vector>

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Smallest power of two >= 2 * num_detectors; length of the zero-padded
/// projection used by the ramp filter.
int ramp_padded_length(int num_detectors);

/// Ram-Lak frequency response on the padded FFT grid (num_bins = padded/2+1).
///
/// Obtained as the DFT of the band-limited spatial ramp kernel
/// h[0] = 1/(4 tau^2), h[odd k] = -1/(pi k tau)^2, h[even k] = 0, scaled by the
/// detector spacing tau so that filtering approximates the continuous
/// convolution with |omega|.
std::vector<double> ramp_response(int num_detectors, double detector_spacing);

/// Per-view ramp filtering of a sinogram (no backprojection).
Sinogram ramp_filter(const Sinogram& sino);

/// Filtered backprojection: ramp filter, radon_adjoint, then the
/// pi / num_views normalization. Linear in the sinogram.
ImageGrid fbp(const Sinogram& sino);

}  // namespace ctssl
