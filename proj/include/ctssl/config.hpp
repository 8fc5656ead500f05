#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ctssl/methods.hpp"
#include "ctssl/trainer.hpp"

namespace ctssl {

/// Noise level of one data split. The random streams are keyed by the
/// experiment seed, so only the distribution is configured here.
struct SplitNoise {
  double delta = 0.0;
  double sigma = 2.0;
  int kernel_radius = 0;

  friend bool operator==(const SplitNoise&, const SplitNoise&) = default;
};

/// One experiment. See README.md for the JSON schema.
struct ExperimentConfig {
  std::string run_id = "run";
  /// Image directory; empty selects the built-in phantom generator.
  std::string dataset_path;
  int phantom_count = 24;
  std::array<double, 3> split{0.7, 0.15, 0.15};

  int image_size = 64;
  /// Size of the full angle grid over [0, pi).
  int num_angles = 128;
  /// Active views, evenly spaced on the full grid; 0 keeps all of them.
  int views = 0;
  int num_detectors = 0;  // 0 selects the default for image_size

  SplitNoise noise_train{5.0, 2.0, 0};
  SplitNoise noise_val{5.0, 2.0, 0};
  SplitNoise noise_test{5.0, 2.0, 0};

  MethodSpec method;
  NetConfig net;

  int epochs = 300;
  double lr = 5e-5;
  int batch_size = 4;
  int checkpoint_every = 50;

  std::uint64_t seed = 0;
  Stopping stopping = Stopping::LastEpoch;
  std::string output_dir = "runs/run";
  /// Worker cap; 0 uses N2I_THREADS or the hardware concurrency.
  int threads = 0;
  /// Write reconstruction PFM/PNG dumps for the test samples.
  bool dump_images = true;

  /// Checks every invariant; throws ContractError with the offending field.
  void validate() const;

  int active_views() const { return views == 0 ? num_angles : views; }
  ScanGeometry geometry() const;
  NoiseSpec noise_spec(const SplitNoise& split_noise) const;
  /// Operators, network and the training noise model.
  ReconProblem problem() const;
  TrainConfig train_config() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

std::string config_to_json(const ExperimentConfig& cfg);
/// Parses a JSON document. Keys missing from the document keep their
/// defaults; unknown keys are errors.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

/// Command-line overrides shared by all subcommands.
struct ConfigOverrides {
  std::optional<double> sigma;
  std::optional<double> delta;
  std::optional<int> angles;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> stopping;
  std::optional<std::string> out;
};

/// --sigma/--delta apply to all three splits; --angles sets the active
/// view count. An --epochs value that the checkpoint cadence does not divide
/// shrinks the cadence to their gcd.
void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o);

}  // namespace ctssl
