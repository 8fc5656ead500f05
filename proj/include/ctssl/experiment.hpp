#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctssl/config.hpp"
#include "ctssl/metrics.hpp"

namespace ctssl {

/// Error raised by run_experiment, tagged with the failing stage
/// ("config", "data", "train", "evaluate", "output").
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PreparedData {
  ScanGeometry geom;
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> val;
  std::vector<TrainingSample> test;
};

/// Loads (or generates) the images, splits them and synthesizes the noisy
/// sinograms. Sample ids run over train, then val, then test.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Test metrics of one (stopping mode, inference variant) pair.
struct Evaluation {
  Stopping stopping = Stopping::LastEpoch;
  std::string inference;  // "y" or "z"
  int epoch = 0;
  std::optional<double> val_psnr;
  std::vector<std::uint64_t> sample_ids;
  MetricReport report;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<EpochLog> loss_curve;
  std::vector<int> checkpoint_epochs;
  std::vector<Evaluation> evaluations;
  double seconds_data = 0.0;
  double seconds_train = 0.0;
  double seconds_eval = 0.0;
  double seconds_total = 0.0;

  const Evaluation& find(Stopping stopping, const std::string& inference) const;
};

/// One line of metrics.csv.
struct MetricRow {
  std::string run_id;
  std::string method;
  std::string stopping;
  std::string inference;
  std::uint64_t sample_id = 0;
  double psnr = 0.0;
  double ssim = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

std::vector<MetricRow> metric_rows(const RunRecord& record);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

/// Inference variants evaluated for a method: {"y", "z"}, or {"y"} for N2I.
std::vector<std::string> inference_variants(const MethodSpec& method);

/// Full pipeline: data, training, checkpoint selection for both stopping
/// modes, evaluation of every inference variant. Writes into cfg.output_dir:
///
///   config.json, loss_curve.csv, metrics.csv, run_record.json,
///   checkpoints/epoch_NNNN.ckpt, recon/<stopping>_<inference>/NNNN.{pfm,png}
///
/// On failure run_record.json records the failing stage and a StageError is
/// thrown.
RunRecord run_experiment(const ExperimentConfig& cfg);

/// Recomputes every metric of a finished run from its config.json and saved
/// checkpoints alone.
std::vector<MetricRow> evaluate_run(const std::filesystem::path& run_dir);

struct SweepRow {
  double sigma = 0.0;
  std::string stopping;
  std::string inference;
  int epoch = 0;
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
  double mean_ssim = 0.0;
  double std_ssim = 0.0;
};

/// Re-synthesizes the test split with each sigma (delta and streams kept)
/// and evaluates the checkpoints selected by the run. Noise added for [z]
/// inference follows the training noise model.
std::vector<SweepRow> robustness_sweep(const std::filesystem::path& run_dir,
                                       std::span<const double> sigmas);
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

struct Comparison {
  std::vector<MetricRow> rows;
  std::vector<RunRecord> runs;  // one per trained family
};

/// Trains each method family once on identical data (subdirectories of
/// base.output_dir named after the family) and collects the rows of the
/// requested variants. Writes metrics.csv, summary.csv and table.csv into
/// base.output_dir.
Comparison compare_methods(const ExperimentConfig& base, std::span<const MethodSpec> methods);

/// Median test PSNR of one variant under one stopping mode.
double median_psnr(std::span<const MetricRow> rows, const std::string& method,
                   const std::string& inference, const std::string& stopping);

}  // namespace ctssl
