#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctssl/autodiff.hpp"
#include "ctssl/geometry.hpp"
#include "ctssl/noise.hpp"
#include "ctssl/unet.hpp"

namespace ctssl {

enum class Method { NN2I, NN2N, N2I };
enum class Weighting { Identity, Gradient };
enum class InferenceInput { Y, Z };

/// Training method plus inference variant.
///
/// Labels: NN2I[y], NN2I[z], NN2Is[y], NN2Is[z] (gradient weighting),
/// NN2N[y], NN2N[z], N2I.
struct MethodSpec {
  Method method = Method::NN2I;
  Weighting weighting = Weighting::Identity;
  InferenceInput inference_input = InferenceInput::Y;
  int n2i_splits = 4;
  /// Use 2 (f - Id)(B z) for NN2N[z] instead of 2 f(B z) - B z.
  bool literal_nn2n_extrapolation = false;

  void validate() const;
  /// Training family: NN2I, NN2Is, NN2N or N2I.
  std::string family() const;
  std::string label() const;
  /// "y", "z"; N2I reports "y" (it reconstructs from the measured data).
  std::string inference_tag() const;
  /// Same method with another inference input.
  MethodSpec with_inference(InferenceInput input) const;

  static MethodSpec parse(std::string_view label);
  /// The seven variants compared in the method study.
  static std::vector<MethodSpec> all_variants();

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// Everything the operators and losses need: acquisition, network, noise.
struct ReconProblem {
  ScanGeometry geom;
  NetConfig net;
  NoiseSpec noise;
};

/// The only data the training path sees: an id and the noisy sinogram.
struct Measurement {
  std::uint64_t sample_id = 0;
  Sinogram y;
};

/// A synthesized sample. The clean image is kept for evaluation only and is
/// never passed to a loss.
struct TrainingSample {
  Measurement data;
  std::optional<ImageGrid> x_clean;
};

std::vector<Measurement> measurements_of(std::span<const TrainingSample> samples);

/// radon_forward / radon_adjoint as a differentiable linear map on
/// {1, w, w} -> {1, views, detectors} tensors.
LinearMap radon_map(const ScanGeometry& geom);
/// grad_forward / grad_adjoint as {1, views, det} -> {2, views, det}
/// (channel 0 = angle differences, channel 1 = detector differences).
LinearMap sino_gradient_map(const ScanGeometry& geom);

using LossClosure = std::function<Var(Graph&, Var params)>;

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Evaluates a scalar closure and its gradient with respect to `params` by
/// reverse-mode differentiation.
LossGrad loss_grad(const ParamVector& params, const LossClosure& closure);

Tensor params_tensor(const ParamVector& params);

/// Fresh noise eta for sample `sample_id` at training iteration `iteration`.
Sinogram draw_eta(const ReconProblem& problem, std::uint64_t sample_id, std::uint64_t iteration);

/// || W A f(B(y + eta)) - W(2y - (y + eta)) ||^2 for one sample.
Var nn2i_sample_loss(Graph& g, Var params, const ReconProblem& problem, const Sinogram& y,
                     const Sinogram& eta, Weighting weighting);
/// || A f(B(y + eta)) - y ||^2 for one sample.
Var nn2n_sample_loss(Graph& g, Var params, const ReconProblem& problem, const Sinogram& y,
                     const Sinogram& eta);
/// || f(input) - target ||^2 in the reconstruction domain.
Var n2i_sample_loss(Graph& g, Var params, const NetConfig& net, const ImageGrid& input,
                    const ImageGrid& target);

/// Batch-summed losses with eta drawn from stream (noise.seed, sample_id,
/// iteration).
double nn2i_loss(const ParamVector& params, std::span<const Measurement> batch,
                 const ReconProblem& problem, Weighting weighting, std::uint64_t iteration);
double nn2n_loss(const ParamVector& params, std::span<const Measurement> batch,
                 const ReconProblem& problem, std::uint64_t iteration);

/// Interleaved partition of view rows into K subsets: subset j holds rows
/// j, j + K, j + 2K, ...
std::vector<std::vector<int>> n2i_split_rows(int num_views, int splits);

/// FBP of each of the K view subsets of `y`.
std::vector<ImageGrid> n2i_split_fbps(const Sinogram& y, int splits);

/// X:1 training pair for held-out subset `draw`: input is the mean of the
/// other K-1 subset FBPs, target is the held-out subset FBP.
std::pair<ImageGrid, ImageGrid> n2i_train_pair(const Measurement& sample, int splits, int draw);
std::pair<ImageGrid, ImageGrid> n2i_pair_from_fbps(std::span<const ImageGrid> split_fbps, int draw);

/// Reconstruction under the inference rule of `method`. `stream` supplies
/// the noise of [z] variants.
ImageGrid infer(const ParamVector& params, const MethodSpec& method, const Sinogram& y,
                const ReconProblem& problem, const RngStream& stream);

/// Same rule with the network replaced by an arbitrary image map.
ImageGrid infer_with(const std::function<ImageGrid(const ImageGrid&)>& network,
                     const MethodSpec& method, const Sinogram& y, const ReconProblem& problem,
                     const RngStream& stream);

/// Stream used for inference-time noise of sample `sample_id`.
RngStream inference_stream(const ReconProblem& problem, std::uint64_t sample_id);

}  // namespace ctssl
