#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctssl/methods.hpp"

namespace ctssl {

/// Decodes every PGM/PNG file in `dir` (sorted by filename), converts to
/// [0, 1] floats and resizes to image_size x image_size. Unreadable files are
/// skipped with a warning on stderr; an empty result is an error.
std::vector<ImageGrid> ingest_dataset(const std::filesystem::path& dir, int image_size);

struct DatasetSplit {
  std::vector<ImageGrid> train;
  std::vector<ImageGrid> val;
  std::vector<ImageGrid> test;
};

/// Ordered split: the first round(f0 * N) images train, the next
/// round(f1 * N) validate, the rest test.
DatasetSplit split_dataset(std::vector<ImageGrid> images, const std::array<double, 3>& fractions);

/// y_t = radon_forward(x_t) + xi_t, xi_t from stream (seed, first_id + t, 0).
/// Sample ids are first_id, first_id + 1, ...
std::vector<TrainingSample> synthesize(const std::vector<ImageGrid>& images, const ScanGeometry& geom,
                                       const NoiseSpec& noise, std::uint64_t seed,
                                       std::uint64_t first_id = 0);

}  // namespace ctssl
