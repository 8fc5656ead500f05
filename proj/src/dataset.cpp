#include "ctssl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ctssl/image_io.hpp"
#include "ctssl/radon.hpp"

namespace ctssl {

std::vector<ImageGrid> ingest_dataset(const std::filesystem::path& dir, int image_size) {
  require(image_size >= 2, "ingest: image size must be >= 2");
  if (!std::filesystem::is_directory(dir)) {
    throw ContractError("ingest: not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  std::vector<ImageGrid> out;
  for (const auto& file : files) {
    try {
      out.emplace_back(resize_bilinear(read_image(file), image_size));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << '\n';
    }
  }
  if (out.empty()) throw ContractError("ingest: no readable images in " + dir.string());
  return out;
}

DatasetSplit split_dataset(std::vector<ImageGrid> images, const std::array<double, 3>& fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    require(f >= 0.0, "split: fractions must be non-negative");
    sum += f;
  }
  require(std::abs(sum - 1.0) < 1e-9, "split: fractions must sum to 1");
  const auto n = static_cast<double>(images.size());
  const auto n_train = static_cast<std::size_t>(std::lround(fractions[0] * n));
  const auto n_val = std::min(images.size() - n_train, static_cast<std::size_t>(std::lround(fractions[1] * n)));
  DatasetSplit split;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
    dst.push_back(std::move(images[i]));
  }
  return split;
}

std::vector<TrainingSample> synthesize(const std::vector<ImageGrid>& images, const ScanGeometry& geom,
                                       const NoiseSpec& noise, std::uint64_t seed,
                                       std::uint64_t first_id) {
  geom.validate();
  noise.validate();
  std::vector<TrainingSample> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::uint64_t id = first_id + i;
    Sinogram y = radon_forward(images[i], geom);
    y.values() += sample_sinogram_noise(noise, geom, RngStream{seed, id, 0}).values();
    out.push_back(TrainingSample{Measurement{id, std::move(y)}, images[i]});
  }
  return out;
}

}  // namespace ctssl
