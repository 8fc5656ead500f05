#pragma once

#include <filesystem>

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Reads an 8- or 16-bit grayscale PGM (P2/P5) or PNG as floats in [0, 1].
/// Colour PNGs are converted to luminance.
Grid read_image(const std::filesystem::path& path);

/// Single-channel portable float map ("Pf", little-endian, rows stored
/// bottom to top).
void write_pfm(const std::filesystem::path& path, const Grid& values);
Grid read_pfm(const std::filesystem::path& path);

/// 8-bit grayscale PNG, values mapped linearly from [lo, hi] and clipped.
void write_png(const std::filesystem::path& path, const Grid& values, double lo, double hi);

/// Bilinear resampling to size x size with pixel-centre alignment
/// (output pixel i samples input coordinate (i + 0.5) * in / out - 0.5).
/// Downscaling by an integer factor of 2 therefore averages 2x2 blocks.
Grid resize_bilinear(const Grid& image, int size);

}  // namespace ctssl
