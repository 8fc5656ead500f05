#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ctssl/adam.hpp"
#include "ctssl/methods.hpp"

namespace ctssl {

struct TrainConfig {
  int epochs = 300;
  double lr = 5e-5;
  int batch_size = 4;
  std::uint64_t seed = 0;
  /// Snapshot cadence in epochs; must divide `epochs`.
  int checkpoint_every = 50;
  /// Workers for per-sample loss/gradient terms within a batch.
  int threads = 1;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  /// Mean per-sample training loss over the epoch.
  double loss = 0.0;
  double seconds = 0.0;
  std::optional<double> val_psnr;
};

struct Snapshot {
  int epoch = 0;
  ParamVector params;
};

struct TrainState {
  ParamVector params;
  OptimState optim;
  int epoch = 0;
  std::vector<Snapshot> checkpoint_log;
  std::vector<EpochLog> loss_curve;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called after each epoch; may return a validation PSNR for the log.
using EpochCallback = std::function<std::optional<double>(int epoch, const ParamVector& params)>;

/// Self-supervised training loop.
///
/// One epoch is a pass over all samples in a seeded random order, in batches
/// of `batch_size`. NN2I/NN2N draw a fresh eta per sample and iteration from
/// stream (noise.seed, sample_id, iteration), iterations counted from 1.
/// Batch losses are summed; per-sample gradients are accumulated in sample
/// order. The loop only sees measurements.
TrainState train(std::span<const Measurement> samples, const MethodSpec& method,
                 const ReconProblem& problem, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

enum class Stopping { LastEpoch, PsnrOracle };

std::string to_string(Stopping s);
Stopping parse_stopping(std::string_view s);

struct Selection {
  ParamVector params;
  int epoch = 0;
  /// Mean validation PSNR of the chosen snapshot (oracle mode only).
  std::optional<double> val_psnr;
};

/// Mean PSNR of `method`'s inference over samples with clean images.
double mean_validation_psnr(const ParamVector& params, const MethodSpec& method,
                            std::span<const TrainingSample> val, const ReconProblem& problem);

/// LastEpoch returns the final parameters; PsnrOracle returns the logged
/// snapshot with the highest mean validation PSNR (earliest on ties).
Selection select_checkpoint(const TrainState& state, Stopping mode,
                            std::span<const TrainingSample> val, const MethodSpec& method,
                            const ReconProblem& problem);

}  // namespace ctssl
