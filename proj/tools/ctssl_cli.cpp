#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#include "ctssl/checkpoint.hpp"
#include "ctssl/experiment.hpp"
#include "ctssl/image_io.hpp"
#include "ctssl/parallel.hpp"
#include "ctssl/theory.hpp"

namespace fs = std::filesystem;
using namespace ctssl;

namespace {

struct CommonArgs {
  std::string config;
  ConfigOverrides overrides;
  int threads = 0;
};

void add_common(CLI::App* app, CommonArgs& a) {
  app->add_option("--config", a.config, "Experiment config (JSON)");
  app->add_option("--sigma", a.overrides.sigma, "Noise correlation width for all splits");
  app->add_option("--delta", a.overrides.delta, "Noise level for all splits");
  app->add_option("--angles", a.overrides.angles, "Number of active projection angles");
  app->add_option("--epochs", a.overrides.epochs, "Training epochs");
  app->add_option("--seed", a.overrides.seed, "Experiment seed");
  app->add_option("--method", a.overrides.method, "Method label, e.g. NN2I[y]");
  app->add_option("--stopping", a.overrides.stopping, "last_epoch or psnr_oracle");
  app->add_option("--out", a.overrides.out, "Output directory");
  app->add_option("--threads", a.threads, "Worker cap (overrides N2I_THREADS)");
}

ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a.config);
  apply_overrides(cfg, a.overrides);
  if (a.threads > 0) cfg.threads = a.threads;
  cfg.validate();
  return cfg;
}

void print_evaluations(const RunRecord& rec) {
  for (const auto& ev : rec.evaluations) {
    std::cout << "  " << to_string(ev.stopping) << " [" << ev.inference << "] epoch " << ev.epoch
              << ": PSNR " << ev.report.mean_psnr() << " +- " << ev.report.std_psnr() << ", SSIM "
              << ev.report.mean_ssim() << " +- " << ev.report.std_ssim() << '\n';
  }
}

void write_split(const fs::path& dir, const std::string& name,
                 const std::vector<TrainingSample>& samples, std::ostream& manifest) {
  fs::create_directories(dir / name);
  for (const auto& s : samples) {
    const std::string id = std::to_string(s.data.sample_id);
    const fs::path sino = dir / name / ("sino_" + id + ".pfm");
    const fs::path clean = dir / name / ("clean_" + id + ".pfm");
    write_pfm(sino, s.data.y.values());
    write_pfm(clean, s.x_clean->values());
    manifest << name << ',' << id << ',' << fs::relative(sino, dir).string() << ','
             << fs::relative(clean, dir).string() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised CT reconstruction toolkit"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, infer_args, eval_args, compare_args, sweep_args, theory_args;

  auto* synth = app.add_subcommand("synthesize", "Write the noisy dataset of a config as PFM files");
  add_common(synth, synth_args);

  auto* train_cmd = app.add_subcommand("train", "Train, select checkpoints and evaluate one method");
  add_common(train_cmd, train_args);

  auto* infer_cmd = app.add_subcommand("infer", "Reconstruct a sinogram with a trained checkpoint");
  add_common(infer_cmd, infer_args);
  std::string ckpt, input, output;
  std::uint64_t sample_id = 0;
  infer_cmd->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--input", input, "Sinogram PFM (views x detectors)")->required();
  infer_cmd->add_option("--output", output, "Output PFM path (a PNG is written next to it)")->required();
  infer_cmd->add_option("--sample-id", sample_id, "Noise stream id for [z] inference");

  auto* eval_cmd = app.add_subcommand("evaluate", "Recompute the metrics of a finished run");
  add_common(eval_cmd, eval_args);
  std::string eval_run;
  eval_cmd->add_option("--run", eval_run, "Run directory")->required();

  auto* compare_cmd = app.add_subcommand("compare", "Train and compare several methods on shared data");
  add_common(compare_cmd, compare_args);
  std::vector<std::string> method_labels;
  compare_cmd->add_option("--methods", method_labels, "Method labels (default: all seven variants)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a trained run under other noise widths");
  add_common(sweep_cmd, sweep_args);
  std::string sweep_run;
  std::vector<double> sigmas{1, 2, 3, 4, 5, 6};
  sweep_cmd->add_option("--run", sweep_run, "Run directory")->required();
  sweep_cmd->add_option("--sigmas", sigmas, "Noise widths to evaluate");

  auto* theory_cmd = app.add_subcommand("theory-check", "Monte-Carlo checks of the training target");
  add_common(theory_cmd, theory_args);
  int mc = 100000;
  theory_cmd->add_option("--mc", mc, "Monte-Carlo sample count");

  CLI11_PARSE(app, argc, argv);
  retain_heap_memory();

  try {
    if (*synth) {
      const ExperimentConfig cfg = resolve(synth_args);
      const PreparedData data = prepare_data(cfg);
      const fs::path out = cfg.output_dir;
      fs::create_directories(out);
      save_config(out / "config.json", cfg);
      std::ofstream manifest(out / "manifest.csv");
      manifest << "split,sample_id,sinogram,clean\n";
      write_split(out, "train", data.train, manifest);
      write_split(out, "val", data.val, manifest);
      write_split(out, "test", data.test, manifest);
      std::cout << "wrote " << data.train.size() + data.val.size() + data.test.size()
                << " samples to " << out << '\n';
    } else if (*train_cmd) {
      const ExperimentConfig cfg = resolve(train_args);
      const RunRecord rec = run_experiment(cfg);
      std::cout << cfg.method.family() << ": " << rec.config.epochs << " epochs in "
                << rec.seconds_train << " s\n";
      print_evaluations(rec);
      std::cout << "outputs in " << cfg.output_dir << '\n';
    } else if (*infer_cmd) {
      const ExperimentConfig cfg = resolve(infer_args);
      const Checkpoint ck = load_checkpoint(ckpt);
      const ReconProblem p = cfg.problem();
      if (!header_matches(ck.net, p.net)) throw ContractError("checkpoint does not match the config's network");
      const Sinogram y(p.geom, read_pfm(input));
      const ImageGrid recon = infer(ck.params, cfg.method, y, p, inference_stream(p, sample_id));
      write_pfm(output, recon.values());
      write_png(fs::path(output).replace_extension(".png"), recon.values(), 0.0, 1.0);
      std::cout << "wrote " << output << '\n';
    } else if (*eval_cmd) {
      const fs::path run = eval_run;
      const auto rows = evaluate_run(run);
      const fs::path out = eval_args.overrides.out ? fs::path(*eval_args.overrides.out) : run;
      fs::create_directories(out);
      write_metrics_csv(out / "metrics_replay.csv", rows);
      if (fs::exists(run / "metrics.csv")) {
        const bool same = read_metrics_csv(run / "metrics.csv") == rows;
        std::cout << (same ? "metrics reproduced exactly\n" : "metrics differ from metrics.csv\n");
        if (!same) return 2;
      }
    } else if (*compare_cmd) {
      const ExperimentConfig cfg = resolve(compare_args);
      std::vector<MethodSpec> methods;
      if (method_labels.empty()) {
        methods = MethodSpec::all_variants();
      } else {
        for (const auto& l : method_labels) methods.push_back(MethodSpec::parse(l));
      }
      for (auto& m : methods) m.n2i_splits = cfg.method.n2i_splits;
      const Comparison cmp = compare_methods(cfg, methods);
      for (const MethodSpec& m : methods) {
        std::cout << m.label() << ": median PSNR last_epoch "
                  << median_psnr(cmp.rows, m.family(), m.inference_tag(), "last_epoch");
        if (std::any_of(cmp.rows.begin(), cmp.rows.end(), [](const MetricRow& r) { return r.stopping == "psnr_oracle"; })) {
          std::cout << ", psnr_oracle "
                    << median_psnr(cmp.rows, m.family(), m.inference_tag(), "psnr_oracle");
        }
        std::cout << '\n';
      }
      std::cout << "outputs in " << cfg.output_dir << '\n';
    } else if (*sweep_cmd) {
      const fs::path run = sweep_run;
      const auto rows = robustness_sweep(run, sigmas);
      const fs::path out = sweep_args.overrides.out ? fs::path(*sweep_args.overrides.out) : run;
      fs::create_directories(out);
      write_sweep_csv(out / "sweep.csv", rows);
      for (const auto& r : rows) {
        std::cout << "sigma " << r.sigma << ' ' << r.stopping << " [" << r.inference
                  << "]: PSNR " << r.mean_psnr << ", SSIM " << r.mean_ssim << '\n';
      }
    } else if (*theory_cmd) {
      const ExperimentConfig cfg = resolve(theory_args);
      const auto lin = check_theorem1_linear(4, 4, mc, cfg.seed);
      std::cout << "linear model, n = m = 4, " << mc
                << " samples: minimizer distance " << lin.distance << '\n';
      const auto id = check_conditional_identity(cfg.noise_spec(cfg.noise_train), mc, cfg.seed);
      std::cout << "target identity: z-score of the mean residual " << id.unconditional_zscore
                << ", max binned residual " << id.binned_residual << " over " << id.bins_used
                << " bins\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
