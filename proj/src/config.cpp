#include "ctssl/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ctssl/parallel.hpp"

namespace ctssl {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  require(obj.is_object(), "config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) {
      throw ContractError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

json noise_json(const SplitNoise& n) {
  return json{{"delta", n.delta}, {"sigma", n.sigma}, {"kernel_radius", n.kernel_radius}};
}

void read_noise(const json& obj, const std::string& where, SplitNoise& n) {
  check_keys(obj, where, {"delta", "sigma", "kernel_radius"});
  read(obj, "delta", n.delta);
  read(obj, "sigma", n.sigma);
  read(obj, "kernel_radius", n.kernel_radius);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!run_id.empty(), "config: run_id must not be empty");
  require(phantom_count >= 3 || !dataset_path.empty(), "config: dataset.phantoms must be >= 3");
  double sum = 0.0;
  for (double f : split) {
    require(f >= 0.0, "config: split fractions must be non-negative");
    sum += f;
  }
  require(std::abs(sum - 1.0) < 1e-9, "config: split fractions must sum to 1");
  if (!dataset_path.empty()) {
    require(std::filesystem::is_directory(dataset_path),
            "config: dataset.path does not exist: " + dataset_path);
  }
  require(image_size >= 8, "config: image_size must be >= 8");
  require(num_angles >= 1, "config: num_angles must be positive");
  require(views >= 0 && views <= num_angles, "config: views must be in [0, num_angles]");
  require(views == 0 || num_angles % views == 0, "config: views must divide num_angles");
  require(num_detectors >= 0, "config: num_detectors must be >= 0");
  for (const SplitNoise* n : {&noise_train, &noise_val, &noise_test}) noise_spec(*n).validate();
  method.validate();
  net.validate();
  require(image_size % (1 << net.depth) == 0,
          "config: image_size must be divisible by 2^net.depth");
  if (method.method == Method::N2I) {
    require(active_views() % method.n2i_splits == 0,
            "config: number of views (" + std::to_string(active_views()) +
                ") is not divisible by n2i_splits (" + std::to_string(method.n2i_splits) + ")");
  }
  train_config().validate();
  require(threads >= 0, "config: threads must be >= 0");
}

ScanGeometry ExperimentConfig::geometry() const {
  ScanGeometry g = ScanGeometry::parallel(image_size, num_angles);
  if (num_detectors > 0) g.num_detectors = num_detectors;
  if (views > 0 && views < num_angles) g = g.sparse(num_angles / views);
  return g;
}

NoiseSpec ExperimentConfig::noise_spec(const SplitNoise& n) const {
  return NoiseSpec{n.delta, n.sigma, n.kernel_radius, seed};
}

ReconProblem ExperimentConfig::problem() const {
  return ReconProblem{geometry(), net, noise_spec(noise_train)};
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.lr = lr;
  t.batch_size = batch_size;
  t.seed = seed;
  t.checkpoint_every = checkpoint_every;
  t.threads = threads > 0 ? threads : default_thread_count();
  return t;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["run_id"] = c.run_id;
  j["dataset"] = {{"path", c.dataset_path}, {"phantoms", c.phantom_count}, {"split", c.split}};
  j["image_size"] = c.image_size;
  j["num_angles"] = c.num_angles;
  j["views"] = c.views;
  j["num_detectors"] = c.num_detectors;
  j["noise"] = {{"train", noise_json(c.noise_train)},
                {"val", noise_json(c.noise_val)},
                {"test", noise_json(c.noise_test)}};
  j["method"] = {{"name", c.method.label()},
                 {"n2i_splits", c.method.n2i_splits},
                 {"literal_nn2n_extrapolation", c.method.literal_nn2n_extrapolation}};
  j["net"] = {{"depth", c.net.depth},
              {"base_channels", c.net.base_channels},
              {"kernel_size", c.net.kernel_size},
              {"skip_connections", c.net.skip_connections},
              {"leaky_slope", c.net.leaky_slope}};
  j["training"] = {{"epochs", c.epochs},
                   {"lr", c.lr},
                   {"batch_size", c.batch_size},
                   {"checkpoint_every", c.checkpoint_every}};
  j["seed"] = c.seed;
  j["stopping"] = to_string(c.stopping);
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["dump_images"] = c.dump_images;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j, "", {"run_id", "dataset", "image_size", "num_angles", "views", "num_detectors",
                     "noise", "method", "net", "training", "seed", "stopping", "output_dir",
                     "threads", "dump_images"});
  ExperimentConfig c;
  read(j, "run_id", c.run_id);
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, "dataset", {"path", "phantoms", "split"});
    read(d, "path", c.dataset_path);
    read(d, "phantoms", c.phantom_count);
    read(d, "split", c.split);
  }
  read(j, "image_size", c.image_size);
  read(j, "num_angles", c.num_angles);
  read(j, "views", c.views);
  read(j, "num_detectors", c.num_detectors);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    check_keys(n, "noise", {"train", "val", "test", "delta", "sigma", "kernel_radius"});
    // Top-level noise fields set all splits; per-split objects refine them.
    SplitNoise shared = c.noise_train;
    read(n, "delta", shared.delta);
    read(n, "sigma", shared.sigma);
    read(n, "kernel_radius", shared.kernel_radius);
    c.noise_train = c.noise_val = c.noise_test = shared;
    if (n.contains("train")) read_noise(n["train"], "noise.train", c.noise_train);
    if (n.contains("val")) read_noise(n["val"], "noise.val", c.noise_val);
    if (n.contains("test")) read_noise(n["test"], "noise.test", c.noise_test);
  }
  if (j.contains("method")) {
    const json& m = j["method"];
    if (m.is_string()) {
      c.method = MethodSpec::parse(m.get<std::string>());
    } else {
      check_keys(m, "method", {"name", "n2i_splits", "literal_nn2n_extrapolation"});
      std::string name = c.method.label();
      read(m, "name", name);
      c.method = MethodSpec::parse(name);
      read(m, "n2i_splits", c.method.n2i_splits);
      read(m, "literal_nn2n_extrapolation", c.method.literal_nn2n_extrapolation);
    }
  }
  if (j.contains("net")) {
    const json& n = j["net"];
    check_keys(n, "net", {"depth", "base_channels", "kernel_size", "skip_connections", "leaky_slope"});
    read(n, "depth", c.net.depth);
    read(n, "base_channels", c.net.base_channels);
    read(n, "kernel_size", c.net.kernel_size);
    read(n, "skip_connections", c.net.skip_connections);
    read(n, "leaky_slope", c.net.leaky_slope);
  }
  if (j.contains("training")) {
    const json& t = j["training"];
    check_keys(t, "training", {"epochs", "lr", "batch_size", "checkpoint_every"});
    read(t, "epochs", c.epochs);
    read(t, "lr", c.lr);
    read(t, "batch_size", c.batch_size);
    read(t, "checkpoint_every", c.checkpoint_every);
  }
  read(j, "seed", c.seed);
  if (j.contains("stopping")) c.stopping = parse_stopping(j["stopping"].get<std::string>());
  read(j, "output_dir", c.output_dir);
  read(j, "threads", c.threads);
  read(j, "dump_images", c.dump_images);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(cfg);
}

void apply_overrides(ExperimentConfig& cfg, const ConfigOverrides& o) {
  for (SplitNoise* n : {&cfg.noise_train, &cfg.noise_val, &cfg.noise_test}) {
    if (o.sigma) n->sigma = *o.sigma;
    if (o.delta) n->delta = *o.delta;
  }
  if (o.angles) cfg.views = *o.angles == cfg.num_angles ? 0 : *o.angles;
  if (o.epochs) {
    cfg.epochs = *o.epochs;
    if (cfg.epochs > 0 && cfg.epochs % cfg.checkpoint_every != 0) {
      cfg.checkpoint_every = std::gcd(cfg.epochs, cfg.checkpoint_every);
    }
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.method) {
    const int splits = cfg.method.n2i_splits;
    const bool literal = cfg.method.literal_nn2n_extrapolation;
    cfg.method = MethodSpec::parse(*o.method);
    cfg.method.n2i_splits = splits;
    cfg.method.literal_nn2n_extrapolation = literal && cfg.method.method == Method::NN2N;
  }
  if (o.stopping) cfg.stopping = parse_stopping(*o.stopping);
  if (o.out) cfg.output_dir = *o.out;
}

}  // namespace ctssl
