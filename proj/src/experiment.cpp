#include "ctssl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctssl/checkpoint.hpp"
#include "ctssl/dataset.hpp"
#include "ctssl/fbp.hpp"
#include "ctssl/image_io.hpp"
#include "ctssl/parallel.hpp"
#include "ctssl/phantom.hpp"

namespace ctssl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string padded(std::uint64_t v, int width = 4) {
  std::string s = std::to_string(v);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

// Checkpoints are stored in single precision; rounding the in-memory copies
// the same way makes metrics computed now and after reloading identical.
void round_to_single(ParamVector& p) {
  for (double& v : p) v = static_cast<double>(static_cast<float>(v));
}

fs::path checkpoint_path(const fs::path& dir, int epoch) {
  return dir / "checkpoints" / ("epoch_" + padded(static_cast<std::uint64_t>(epoch)) + ".ckpt");
}

InferenceInput input_of(const std::string& tag) {
  return tag == "z" ? InferenceInput::Z : InferenceInput::Y;
}

Evaluation evaluate_params(const ParamVector& params, const MethodSpec& variant,
                           const std::vector<TrainingSample>& test, const ReconProblem& problem,
                           int threads, const std::optional<fs::path>& dump_dir) {
  const int n = static_cast<int>(test.size());
  std::vector<ImageGrid> recons(test.size());
  std::vector<double> p(test.size()), s(test.size());
  parallel_for(n, threads, [&](int i) {
    const auto& sample = test[static_cast<std::size_t>(i)];
    recons[static_cast<std::size_t>(i)] =
        infer(params, variant, sample.data.y, problem, inference_stream(problem, sample.data.sample_id));
    p[static_cast<std::size_t>(i)] = psnr(recons[static_cast<std::size_t>(i)], *sample.x_clean);
    s[static_cast<std::size_t>(i)] = ssim(recons[static_cast<std::size_t>(i)], *sample.x_clean);
  });
  Evaluation ev;
  for (std::size_t i = 0; i < test.size(); ++i) {
    ev.sample_ids.push_back(test[i].data.sample_id);
    ev.report.add(p[i], s[i]);
    if (dump_dir) {
      fs::create_directories(*dump_dir);
      const std::string stem = padded(test[i].data.sample_id);
      write_pfm(*dump_dir / (stem + ".pfm"), recons[i].values());
      write_png(*dump_dir / (stem + ".png"), recons[i].values(), 0.0, 1.0);
    }
  }
  return ev;
}

void dump_references(const fs::path& dir, const std::vector<TrainingSample>& test) {
  fs::create_directories(dir / "clean");
  fs::create_directories(dir / "fbp");
  for (const auto& s : test) {
    const std::string stem = padded(s.data.sample_id);
    write_pfm(dir / "clean" / (stem + ".pfm"), s.x_clean->values());
    write_png(dir / "clean" / (stem + ".png"), s.x_clean->values(), 0.0, 1.0);
    const ImageGrid f = fbp(s.data.y);
    write_pfm(dir / "fbp" / (stem + ".pfm"), f.values());
    write_png(dir / "fbp" / (stem + ".png"), f.values(), 0.0, 1.0);
  }
}

// Selects checkpoints for both stopping modes and evaluates every inference
// variant on the test split.
std::vector<Evaluation> evaluate_state(const TrainState& state, const ExperimentConfig& cfg,
                                       const PreparedData& data, const ReconProblem& problem,
                                       const std::optional<fs::path>& dump_root) {
  const int threads = cfg.train_config().threads;
  std::vector<Evaluation> out;
  for (const std::string& inf : inference_variants(cfg.method)) {
    const MethodSpec variant = cfg.method.with_inference(input_of(inf));
    for (Stopping mode : {Stopping::LastEpoch, Stopping::PsnrOracle}) {
      if (mode == Stopping::PsnrOracle && data.val.empty()) {
        std::cerr << "warning: no validation split, oracle stopping skipped\n";
        continue;
      }
      const Selection sel = select_checkpoint(state, mode, data.val, variant, problem);
      std::optional<fs::path> dump;
      if (dump_root) dump = *dump_root / (to_string(mode) + "_" + inf);
      Evaluation ev = evaluate_params(sel.params, variant, data.test, problem, threads, dump);
      ev.stopping = mode;
      ev.inference = inf;
      ev.epoch = sel.epoch;
      ev.val_psnr = sel.val_psnr;
      out.push_back(std::move(ev));
    }
  }
  return out;
}

ReconProblem problem_for(const ExperimentConfig& cfg, const PreparedData& data) {
  ReconProblem problem = cfg.problem();
  problem.geom = data.geom;
  return problem;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json record_json(const RunRecord& rec, const std::string& status, const std::string& error) {
  json j;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["config"] = json::parse(config_to_json(rec.config));
  json curve = json::array();
  for (const auto& e : rec.loss_curve) {
    curve.push_back({{"epoch", e.epoch},
                     {"loss", number_or_null(e.loss)},
                     {"seconds", e.seconds},
                     {"val_psnr", e.val_psnr ? number_or_null(*e.val_psnr) : json(nullptr)}});
  }
  j["loss_curve"] = curve;
  json ckpts = json::array();
  for (int epoch : rec.checkpoint_epochs) {
    ckpts.push_back({{"epoch", epoch}, {"file", checkpoint_path("", epoch).string()}});
  }
  j["checkpoints"] = ckpts;
  json evals = json::array();
  for (const auto& ev : rec.evaluations) {
    json samples = json::array();
    for (std::size_t i = 0; i < ev.sample_ids.size(); ++i) {
      samples.push_back({{"sample_id", ev.sample_ids[i]},
                         {"psnr", number_or_null(ev.report.psnr[i])},
                         {"ssim", ev.report.ssim[i]}});
    }
    evals.push_back({{"stopping", to_string(ev.stopping)},
                     {"inference", ev.inference},
                     {"epoch", ev.epoch},
                     {"checkpoint", checkpoint_path("", ev.epoch).string()},
                     {"val_psnr", ev.val_psnr ? number_or_null(*ev.val_psnr) : json(nullptr)},
                     {"mean_psnr", number_or_null(ev.report.mean_psnr())},
                     {"std_psnr", number_or_null(ev.report.std_psnr())},
                     {"mean_ssim", ev.report.mean_ssim()},
                     {"std_ssim", ev.report.std_ssim()},
                     {"samples", samples}});
  }
  j["evaluations"] = evals;
  j["seconds"] = {{"data", rec.seconds_data},
                  {"train", rec.seconds_train},
                  {"evaluate", rec.seconds_eval},
                  {"total", rec.seconds_total}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_loss_curve(const fs::path& path, const std::vector<EpochLog>& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss,seconds,val_psnr\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.seconds) << ','
        << (e.val_psnr ? fmt(*e.val_psnr) : "") << '\n';
  }
}

// Loads every checkpoint of a run directory into a TrainState (epoch order).
TrainState load_state(const fs::path& dir, const NetConfig& net) {
  std::map<int, fs::path> files;
  const fs::path ckdir = dir / "checkpoints";
  if (fs::is_directory(ckdir)) {
    for (const auto& entry : fs::directory_iterator(ckdir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("epoch_", 0) == 0 && entry.path().extension() == ".ckpt") {
        files[std::stoi(name.substr(6))] = entry.path();
      }
    }
  }
  if (files.empty()) throw ContractError("no checkpoints found in " + ckdir.string());
  TrainState state;
  for (const auto& [epoch, path] : files) {
    Checkpoint ck = load_checkpoint(path);
    require(header_matches(ck.net, net), "checkpoint " + path.string() + " does not match the run's network");
    state.checkpoint_log.push_back(Snapshot{epoch, std::move(ck.params)});
  }
  state.params = state.checkpoint_log.back().params;
  state.epoch = state.checkpoint_log.back().epoch;
  return state;
}

}  // namespace

const Evaluation& RunRecord::find(Stopping stopping, const std::string& inference) const {
  for (const auto& ev : evaluations) {
    if (ev.stopping == stopping && ev.inference == inference) return ev;
  }
  throw ContractError("run record has no evaluation for " + to_string(stopping) + "/" + inference);
}

std::vector<std::string> inference_variants(const MethodSpec& method) {
  if (method.method == Method::N2I) return {"y"};
  return {"y", "z"};
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  std::vector<ImageGrid> images = cfg.dataset_path.empty()
                                      ? phantom_set(cfg.phantom_count, cfg.image_size, cfg.seed)
                                      : ingest_dataset(cfg.dataset_path, cfg.image_size);
  DatasetSplit split = split_dataset(std::move(images), cfg.split);
  PreparedData data;
  data.geom = cfg.geometry();
  std::uint64_t next = 0;
  data.train = synthesize(split.train, data.geom, cfg.noise_spec(cfg.noise_train), cfg.seed, next);
  next += split.train.size();
  data.val = synthesize(split.val, data.geom, cfg.noise_spec(cfg.noise_val), cfg.seed, next);
  next += split.val.size();
  data.test = synthesize(split.test, data.geom, cfg.noise_spec(cfg.noise_test), cfg.seed, next);
  return data;
}

std::vector<MetricRow> metric_rows(const RunRecord& record) {
  std::vector<MetricRow> rows;
  for (const auto& ev : record.evaluations) {
    for (std::size_t i = 0; i < ev.sample_ids.size(); ++i) {
      rows.push_back(MetricRow{record.config.run_id, record.config.method.family(),
                               to_string(ev.stopping), ev.inference, ev.sample_ids[i],
                               ev.report.psnr[i], ev.report.ssim[i]});
    }
  }
  return rows;
}

void write_metrics_csv(const fs::path& path, std::span<const MetricRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "run_id,method,stopping,inference,sample_id,psnr,ssim\n";
  for (const auto& r : rows) {
    out << r.run_id << ',' << r.method << ',' << r.stopping << ',' << r.inference << ','
        << r.sample_id << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << '\n';
  }
}

std::vector<MetricRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  require(line == "run_id,method,stopping,inference,sample_id,psnr,ssim",
          "unexpected metrics.csv header in " + path.string());
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    require(f.size() == 7, "malformed metrics.csv line: " + line);
    rows.push_back(MetricRow{f[0], f[1], f[2], f[3], std::stoull(f[4]), std::strtod(f[5].c_str(), nullptr),
                             std::strtod(f[6].c_str(), nullptr)});
  }
  return rows;
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  const fs::path out = cfg.output_dir;
  std::string stage = "config";
  bool can_write = false;
  try {
    cfg.validate();
    fs::create_directories(out / "checkpoints");
    can_write = true;
    save_config(out / "config.json", cfg);

    stage = "data";
    auto t = std::chrono::steady_clock::now();
    const PreparedData data = prepare_data(cfg);
    require(!data.train.empty(), "no training samples after the split");
    require(!data.test.empty(), "no test samples after the split");
    const ReconProblem problem = problem_for(cfg, data);
    rec.seconds_data = seconds_since(t);

    stage = "train";
    t = std::chrono::steady_clock::now();
    const TrainConfig tc = cfg.train_config();
    const auto measurements = measurements_of(data.train);
    EpochCallback on_epoch = [&](int epoch, const ParamVector& p) -> std::optional<double> {
      if (data.val.empty() || epoch % tc.checkpoint_every != 0) return std::nullopt;
      ParamVector q = p;
      round_to_single(q);
      return mean_validation_psnr(q, cfg.method, data.val, problem);
    };
    TrainState state = train(measurements, cfg.method, problem, tc, on_epoch);
    round_to_single(state.params);
    for (Snapshot& snap : state.checkpoint_log) {
      round_to_single(snap.params);
      save_checkpoint(checkpoint_path(out, snap.epoch), cfg.net, snap.params);
      rec.checkpoint_epochs.push_back(snap.epoch);
    }
    rec.loss_curve = state.loss_curve;
    write_loss_curve(out / "loss_curve.csv", rec.loss_curve);
    rec.seconds_train = seconds_since(t);

    stage = "evaluate";
    t = std::chrono::steady_clock::now();
    std::optional<fs::path> dump_root;
    if (cfg.dump_images) {
      dump_root = out / "recon";
      dump_references(*dump_root, data.test);
    }
    rec.evaluations = evaluate_state(state, cfg, data, problem, dump_root);
    rec.seconds_eval = seconds_since(t);

    stage = "output";
    const auto rows = metric_rows(rec);
    write_metrics_csv(out / "metrics.csv", rows);
    rec.seconds_total = seconds_since(start);
    write_text(out / "run_record.json", record_json(rec, "complete", "").dump(2) + "\n");
  } catch (const std::exception& e) {
    rec.seconds_total = seconds_since(start);
    if (can_write) {
      try {
        if (!rec.loss_curve.empty()) write_loss_curve(out / "loss_curve.csv", rec.loss_curve);
        write_text(out / "run_record.json",
                   record_json(rec, "failed at " + stage, e.what()).dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
    throw StageError(stage, e.what());
  }
  return rec;
}

std::vector<MetricRow> evaluate_run(const fs::path& run_dir) {
  const ExperimentConfig cfg = load_config(run_dir / "config.json");
  cfg.validate();
  const PreparedData data = prepare_data(cfg);
  const ReconProblem problem = problem_for(cfg, data);
  RunRecord rec;
  rec.config = cfg;
  rec.evaluations = evaluate_state(load_state(run_dir, cfg.net), cfg, data, problem, std::nullopt);
  return metric_rows(rec);
}

std::vector<SweepRow> robustness_sweep(const fs::path& run_dir, std::span<const double> sigmas) {
  const ExperimentConfig cfg = load_config(run_dir / "config.json");
  cfg.validate();
  std::ifstream in(run_dir / "run_record.json");
  if (!in) throw ContractError("sweep: missing run_record.json in " + run_dir.string());
  const json record = json::parse(in);
  require(record.value("status", "") == "complete", "sweep: run did not complete");

  const ReconProblem problem = cfg.problem();
  const int threads = cfg.train_config().threads;
  std::vector<SweepRow> rows;
  for (double sigma : sigmas) {
    ExperimentConfig swept = cfg;
    swept.noise_test.sigma = sigma;
    const PreparedData data = prepare_data(swept);
    for (const auto& ev : record.at("evaluations")) {
      const int epoch = ev.at("epoch").get<int>();
      const fs::path ck = checkpoint_path(run_dir, epoch);
      if (!fs::exists(ck)) throw ContractError("sweep: missing checkpoint " + ck.string());
      const Checkpoint loaded = load_checkpoint(ck);
      const std::string inf = ev.at("inference").get<std::string>();
      const MethodSpec variant = cfg.method.with_inference(input_of(inf));
      const Evaluation e =
          evaluate_params(loaded.params, variant, data.test, problem, threads, std::nullopt);
      rows.push_back(SweepRow{sigma, ev.at("stopping").get<std::string>(), inf, epoch,
                              e.report.mean_psnr(), e.report.std_psnr(), e.report.mean_ssim(),
                              e.report.std_ssim()});
    }
  }
  return rows;
}

void write_sweep_csv(const fs::path& path, std::span<const SweepRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sigma,stopping,inference,epoch,mean_psnr,std_psnr,mean_ssim,std_ssim\n";
  for (const auto& r : rows) {
    out << fmt(r.sigma) << ',' << r.stopping << ',' << r.inference << ',' << r.epoch << ','
        << fmt(r.mean_psnr) << ',' << fmt(r.std_psnr) << ',' << fmt(r.mean_ssim) << ','
        << fmt(r.std_ssim) << '\n';
  }
}

double median_psnr(std::span<const MetricRow> rows, const std::string& method,
                   const std::string& inference, const std::string& stopping) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.method == method && r.inference == inference && r.stopping == stopping) v.push_back(r.psnr);
  }
  require(!v.empty(), "no rows for " + method + "/" + inference + "/" + stopping);
  return median(std::move(v));
}

Comparison compare_methods(const ExperimentConfig& base, std::span<const MethodSpec> methods) {
  require(!methods.empty(), "compare: no methods given");
  // Train each family once; [y] and [z] share the trained network.
  std::vector<MethodSpec> families;
  std::set<std::pair<std::string, std::string>> wanted;
  for (const MethodSpec& m : methods) {
    wanted.insert({m.family(), m.inference_tag()});
    const bool seen = std::any_of(families.begin(), families.end(),
                                  [&](const MethodSpec& f) { return f.family() == m.family(); });
    if (!seen) families.push_back(m.with_inference(InferenceInput::Y));
  }

  Comparison cmp;
  const fs::path out = base.output_dir;
  for (const MethodSpec& family : families) {
    ExperimentConfig cfg = base;
    cfg.method = family;
    cfg.method.n2i_splits = base.method.n2i_splits;
    cfg.method.literal_nn2n_extrapolation =
        base.method.literal_nn2n_extrapolation && family.method == Method::NN2N;
    cfg.output_dir = (out / family.family()).string();
    cfg.run_id = base.run_id + "/" + family.family();
    RunRecord rec = run_experiment(cfg);
    for (const MetricRow& r : metric_rows(rec)) {
      if (wanted.contains({r.method, r.inference})) cmp.rows.push_back(r);
    }
    cmp.runs.push_back(std::move(rec));
  }

  fs::create_directories(out);
  write_metrics_csv(out / "metrics.csv", cmp.rows);

  std::ofstream summary(out / "summary.csv");
  summary << "method,stopping,n,mean_psnr,median_psnr,std_psnr,mean_ssim,median_ssim,std_ssim\n";
  std::vector<std::string> labels;
  for (const MethodSpec& m : methods) labels.push_back(m.label());
  for (const MethodSpec& m : methods) {
    for (Stopping mode : {Stopping::LastEpoch, Stopping::PsnrOracle}) {
      std::vector<double> p, s;
      for (const auto& r : cmp.rows) {
        if (r.method == m.family() && r.inference == m.inference_tag() && r.stopping == to_string(mode)) {
          p.push_back(r.psnr);
          s.push_back(r.ssim);
        }
      }
      if (p.empty()) continue;
      summary << m.label() << ',' << to_string(mode) << ',' << p.size() << ',' << fmt(mean(p)) << ','
              << fmt(median(p)) << ',' << fmt(stddev(p)) << ',' << fmt(mean(s)) << ','
              << fmt(median(s)) << ',' << fmt(stddev(s)) << '\n';
    }
  }

  std::ofstream table(out / "table.csv");
  table << "stopping,statistic";
  for (const auto& l : labels) table << ',' << l;
  table << '\n';
  for (Stopping mode : {Stopping::LastEpoch, Stopping::PsnrOracle}) {
    for (const char* stat : {"median_psnr", "median_ssim"}) {
      table << to_string(mode) << ',' << stat;
      for (const MethodSpec& m : methods) {
        std::vector<double> v;
        for (const auto& r : cmp.rows) {
          if (r.method == m.family() && r.inference == m.inference_tag() && r.stopping == to_string(mode)) {
            v.push_back(std::string(stat) == "median_psnr" ? r.psnr : r.ssim);
          }
        }
        table << ',' << (v.empty() ? std::string() : fmt(median(v)));
      }
      table << '\n';
    }
  }
  return cmp;
}

}  // namespace ctssl
