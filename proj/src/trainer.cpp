#include "ctssl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "ctssl/metrics.hpp"
#include "ctssl/parallel.hpp"

namespace ctssl {

void TrainConfig::validate() const {
  require(epochs >= 0, "train: epochs must be >= 0");
  require(lr > 0.0, "train: learning rate must be positive");
  require(batch_size >= 1, "train: batch size must be >= 1");
  require(checkpoint_every >= 1, "train: checkpoint cadence must be >= 1");
  require(epochs % checkpoint_every == 0, "train: checkpoint cadence must divide epochs");
}

std::string to_string(Stopping s) {
  return s == Stopping::LastEpoch ? "last_epoch" : "psnr_oracle";
}

Stopping parse_stopping(std::string_view s) {
  if (s == "last_epoch") return Stopping::LastEpoch;
  if (s == "psnr_oracle") return Stopping::PsnrOracle;
  throw ContractError("unknown stopping mode '" + std::string(s) + "'");
}

TrainState train(std::span<const Measurement> samples, const MethodSpec& method,
                 const ReconProblem& problem, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  method.validate();
  config.validate();
  problem.net.validate();
  require(!samples.empty(), "train: no training samples");

  TrainState state;
  state.params = init_params(problem.net, config.seed);
  state.optim = OptimState::fresh(state.params.size(), config.lr);
  if (config.epochs == 0) {
    state.checkpoint_log.push_back(Snapshot{0, state.params});
    return state;
  }

  // Split reconstructions are fixed per sample for N2I.
  std::vector<std::vector<ImageGrid>> split_fbps;
  if (method.method == Method::N2I) {
    for (const auto& s : samples) split_fbps.push_back(n2i_split_fbps(s.y, method.n2i_splits));
  }

  const int n = static_cast<int>(samples.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::uint64_t iteration = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_engine(
        RngStream{config.seed, ~std::uint64_t{0}, static_cast<std::uint64_t>(epoch)}.engine());
    std::shuffle(order.begin(), order.end(), shuffle_engine);

    double epoch_loss = 0.0;
    for (int begin = 0; begin < n; begin += config.batch_size) {
      ++iteration;
      const int count = std::min(config.batch_size, n - begin);
      std::vector<LossGrad> terms(static_cast<std::size_t>(count));
      parallel_for(count, config.threads, [&](int b) {
        const int idx = order[static_cast<std::size_t>(begin + b)];
        const Measurement& m = samples[static_cast<std::size_t>(idx)];
        LossClosure closure;
        if (method.method == Method::N2I) {
          auto engine = RngStream{config.seed, m.sample_id, iteration}.engine();
          std::uniform_int_distribution<int> pick(0, method.n2i_splits - 1);
          auto pair = n2i_pair_from_fbps(split_fbps[static_cast<std::size_t>(idx)], pick(engine));
          closure = [&, pair = std::move(pair)](Graph& g, Var p) {
            return n2i_sample_loss(g, p, problem.net, pair.first, pair.second);
          };
        } else {
          Sinogram eta = draw_eta(problem, m.sample_id, iteration);
          closure = [&, eta = std::move(eta)](Graph& g, Var p) {
            return method.method == Method::NN2I
                       ? nn2i_sample_loss(g, p, problem, m.y, eta, method.weighting)
                       : nn2n_sample_loss(g, p, problem, m.y, eta);
          };
        }
        terms[static_cast<std::size_t>(b)] = loss_grad(state.params, closure);
      });

      double batch_loss = 0.0;
      ParamVector grad(state.params.size(), 0.0);
      for (const LossGrad& t : terms) {
        batch_loss += t.loss;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += t.grad[i];
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", iteration " + std::to_string(iteration));
      }
      try {
        std::tie(state.optim, state.params) =
            adam_step(std::move(state.optim), std::move(state.params), grad);
      } catch (const NonFiniteError& e) {
        throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss;
    }

    state.epoch = epoch;
    if (epoch % config.checkpoint_every == 0) {
      state.checkpoint_log.push_back(Snapshot{epoch, state.params});
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss = epoch_loss / n;
    if (on_epoch) log.val_psnr = on_epoch(epoch, state.params);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.loss_curve.push_back(log);
  }
  return state;
}

double mean_validation_psnr(const ParamVector& params, const MethodSpec& method,
                            std::span<const TrainingSample> val, const ReconProblem& problem) {
  require(!val.empty(), "validation: no samples");
  double acc = 0.0;
  for (const auto& s : val) {
    require(s.x_clean.has_value(), "validation: oracle stopping needs clean images");
    const ImageGrid recon =
        infer(params, method, s.data.y, problem, inference_stream(problem, s.data.sample_id));
    acc += psnr(recon, *s.x_clean);
  }
  return acc / static_cast<double>(val.size());
}

Selection select_checkpoint(const TrainState& state, Stopping mode,
                            std::span<const TrainingSample> val, const MethodSpec& method,
                            const ReconProblem& problem) {
  if (mode == Stopping::LastEpoch) return Selection{state.params, state.epoch, std::nullopt};

  require(!val.empty(), "select_checkpoint: oracle mode needs validation samples");
  for (const auto& s : val) {
    require(s.x_clean.has_value(), "select_checkpoint: oracle mode needs clean images");
  }
  require(!state.checkpoint_log.empty(), "select_checkpoint: no checkpoints logged");
  std::optional<Selection> best;
  for (const Snapshot& snap : state.checkpoint_log) {
    const double score = mean_validation_psnr(snap.params, method, val, problem);
    if (!best || score > *best->val_psnr) best = Selection{snap.params, snap.epoch, score};
  }
  return *best;
}

}  // namespace ctssl
