#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ctssl/dataset.hpp"
#include "ctssl/fbp.hpp"
#include "ctssl/metrics.hpp"
#include "ctssl/phantom.hpp"
#include "ctssl/radon.hpp"
#include "ctssl/sino_gradient.hpp"
#include "ctssl/theory.hpp"
#include "ctssl/trainer.hpp"

using namespace ctssl;

namespace {

ReconProblem small_problem(double delta, int width = 32, int angles = 16) {
  return ReconProblem{ScanGeometry::parallel(width, angles), NetConfig{2, 2, 3, true, 0.1},
                      NoiseSpec{delta, 1.5, 0, 3}};
}

std::vector<TrainingSample> small_dataset(const ReconProblem& p, int count, std::uint64_t seed) {
  return synthesize(phantom_set(count, p.geom.image_width, seed), p.geom, p.noise, seed);
}

ParamVector zero_output_params(const NetConfig& net, std::uint64_t seed) {
  ParamVector params = init_params(net, seed);
  const auto last = conv_layout(net).back();
  std::fill(params.begin() + static_cast<std::ptrdiff_t>(last.offset),
            params.begin() + static_cast<std::ptrdiff_t>(last.offset + last.count()), 0.0);
  return params;
}

double sq(const Grid& g) {
  double s = 0.0;
  for (double v : g.values()) s += v * v;
  return s;
}

double sq(const GradField& f) { return sq(f.d_angle) + sq(f.d_detector); }

}  // namespace

TEST_CASE("MethodSpec labels and validation") {
  std::vector<std::string> labels;
  for (const auto& m : MethodSpec::all_variants()) labels.push_back(m.label());
  CHECK(labels == std::vector<std::string>{"NN2Is[y]", "NN2Is[z]", "NN2I[y]", "NN2I[z]", "NN2N[y]", "NN2N[z]", "N2I"});
  for (const auto& m : MethodSpec::all_variants()) CHECK(MethodSpec::parse(m.label()) == m);
  CHECK_THROWS_AS(MethodSpec::parse("N2N"), ContractError);
  CHECK_THROWS_AS(MethodSpec::parse("NN2I[x]"), ContractError);
  CHECK_THROWS_AS(MethodSpec::parse("N2I[z]"), ContractError);
  MethodSpec bad = MethodSpec::parse("NN2N[y]");
  bad.weighting = Weighting::Gradient;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("losses with a zero network") {
  const ReconProblem p = small_problem(2.0);
  const auto data = small_dataset(p, 2, 1);
  const auto batch = measurements_of(data);
  const ParamVector params = zero_output_params(p.net, 4);
  const std::uint64_t it = 7;

  double want_id = 0.0, want_grad = 0.0, want_nn2n = 0.0;
  for (const auto& m : batch) {
    const Sinogram eta = draw_eta(p, m.sample_id, it);
    const Grid target = 2.0 * m.y.values() - (m.y.values() + eta.values());
    want_id += sq(target);
    want_grad += sq(grad_forward(Sinogram(p.geom, target)));
    want_nn2n += sq(m.y.values());
  }
  CHECK(nn2i_loss(params, batch, p, Weighting::Identity, it) == doctest::Approx(want_id).epsilon(1e-12));
  CHECK(nn2i_loss(params, batch, p, Weighting::Gradient, it) == doctest::Approx(want_grad).epsilon(1e-12));
  CHECK(nn2n_loss(params, batch, p, it) == doctest::Approx(want_nn2n).epsilon(1e-12));
}

TEST_CASE("losses match a straight-line recomputation") {
  const ReconProblem p = small_problem(3.0);
  const auto data = small_dataset(p, 1, 2);
  const auto batch = measurements_of(data);
  const ParamVector params = init_params(p.net, 5);
  const std::uint64_t it = 3;
  const Sinogram& y = batch[0].y;
  const Sinogram eta = sample_sinogram_noise(p.noise, p.geom, RngStream{p.noise.seed, batch[0].sample_id, it});
  const Sinogram z(p.geom, y.values() + eta.values());
  const ImageGrid fz = net_forward(params, fbp(z), p.net);
  const Grid afz = radon_forward(fz, p.geom).values();
  const Grid target = 2.0 * y.values() - z.values();

  const double l_id = sq(afz - target);
  const GradField ga = grad_forward(Sinogram(p.geom, afz));
  const GradField gt = grad_forward(Sinogram(p.geom, target));
  const double l_grad = sq(ga.d_angle - gt.d_angle) + sq(ga.d_detector - gt.d_detector);
  const double l_nn2n = sq(afz - y.values());

  CHECK(nn2i_loss(params, batch, p, Weighting::Identity, it) == doctest::Approx(l_id).epsilon(1e-10));
  CHECK(nn2i_loss(params, batch, p, Weighting::Gradient, it) == doctest::Approx(l_grad).epsilon(1e-10));
  CHECK(nn2n_loss(params, batch, p, it) == doctest::Approx(l_nn2n).epsilon(1e-10));

  // The training gradient path evaluates the same loss value.
  const LossGrad lg = loss_grad(params, [&](Graph& g, Var v) {
    return nn2i_sample_loss(g, v, p, y, eta, Weighting::Identity);
  });
  CHECK(lg.loss == doctest::Approx(l_id).epsilon(1e-12));
}

TEST_CASE("zero noise: NN2I and NN2N losses coincide") {
  const ReconProblem p = small_problem(0.0);
  const auto batch = measurements_of(small_dataset(p, 2, 3));
  const ParamVector params = init_params(p.net, 6);
  CHECK(nn2i_loss(params, batch, p, Weighting::Identity, 1) == nn2n_loss(params, batch, p, 1));
}

TEST_CASE("noise-target identity 2y - z = Ax + xi - eta") {
  const ReconProblem p = small_problem(4.0);
  const auto images = phantom_set(3, 32, 9);
  const auto data = synthesize(images, p.geom, p.noise, p.noise.seed);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Grid ax = radon_forward(images[t], p.geom).values();
    const Grid xi = sample_sinogram_noise(p.noise, p.geom, {p.noise.seed, t, 0}).values();
    const Grid eta = draw_eta(p, t, 5).values();
    const Grid& y = data[t].data.y.values();
    const Grid lhs = 2.0 * y - (y + eta);
    const Grid rhs = ax + xi - eta;
    CHECK(std::sqrt(sq(lhs - rhs) / sq(rhs)) < 1e-14);
  }
}

TEST_CASE("N2I splits: partition, interleaving, divisibility") {
  const auto rows = n2i_split_rows(32, 4);
  std::set<int> all;
  std::size_t total = 0;
  for (const auto& r : rows) {
    total += r.size();
    all.insert(r.begin(), r.end());
  }
  CHECK(total == 32);
  CHECK(all.size() == 32);
  CHECK(rows[0] == std::vector<int>{0, 4, 8, 12, 16, 20, 24, 28});
  CHECK_THROWS_AS(n2i_split_rows(30, 4), ContractError);

  const ImageGrid phantom = shepp_logan(64);
  const ScanGeometry g = ScanGeometry::parallel(64, 128);
  const Measurement m{0, radon_forward(phantom, g)};
  const auto [input, target] = n2i_train_pair(m, 2, 0);
  CHECK(std::sqrt(sq(input.values() - target.values()) / sq(phantom.values())) < 0.2);
  const auto [in4, tgt4] = n2i_train_pair(m, 4, 0);
  const Sinogram held_out = m.y.select_views(n2i_split_rows(128, 4)[0]);
  CHECK(tgt4 == fbp(held_out));
  const auto views = held_out.geometry().view_indices();
  for (std::size_t i = 0; i < views.size(); ++i) CHECK(views[i] == static_cast<int>(4 * i));
  CHECK_THROWS_AS(n2i_train_pair(Measurement{0, radon_forward(phantom, ScanGeometry::parallel(64, 30))}, 4, 0),
                  ContractError);
}

TEST_CASE("inference rules with explicit image maps") {
  const ReconProblem p = small_problem(2.0);
  const auto data = small_dataset(p, 1, 4);
  const Sinogram& y = data[0].data.y;
  const RngStream stream{11, 0, RngStream::kInference};
  const Sinogram eta = sample_sinogram_noise(p.noise, p.geom, stream);
  const ImageGrid bz = fbp(Sinogram(p.geom, y.values() + eta.values()));
  const auto identity = [](const ImageGrid& x) { return x; };
  const auto square = [](const ImageGrid& x) {
    ImageGrid out = x;
    for (double& v : out.values().values()) v = v * v;
    return out;
  };

  CHECK(infer_with(identity, MethodSpec::parse("NN2N[z]"), y, p, stream) == bz);
  CHECK(infer_with(identity, MethodSpec::parse("NN2I[y]"), y, p, stream) == fbp(y));
  CHECK(infer_with(identity, MethodSpec::parse("NN2I[z]"), y, p, stream) == bz);
  CHECK(infer_with(identity, MethodSpec::parse("NN2N[y]"), y, p, stream) == fbp(y));

  const ImageGrid out = infer_with(square, MethodSpec::parse("NN2N[z]"), y, p, stream);
  const Grid lhs = out.values() + bz.values();
  const Grid rhs = 2.0 * square(bz).values();
  CHECK(std::sqrt(sq(lhs - rhs) / sq(rhs)) < 1e-15);

  MethodSpec literal = MethodSpec::parse("NN2N[z]");
  literal.literal_nn2n_extrapolation = true;
  const ImageGrid lit = infer_with(identity, literal, y, p, stream);
  for (double v : lit.values().values()) CHECK(v == 0.0);

  // N2I with the identity map averages the K complement means, which is the
  // mean of the split reconstructions.
  const auto fbps = n2i_split_fbps(y, 4);
  Grid mean(32, 32);
  for (const auto& f : fbps) mean += f.values();
  mean *= 0.25;
  const ImageGrid n2i = infer_with(identity, MethodSpec::parse("N2I"), y, p, stream);
  CHECK(std::sqrt(sq(n2i.values() - mean) / sq(mean)) < 1e-12);
}

TEST_CASE("train: zero epochs, determinism, thread independence, firewall") {
  const ReconProblem p = small_problem(2.0);
  const auto data = small_dataset(p, 4, 5);
  const auto ms = measurements_of(data);
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 2;
  tc.lr = 1e-3;
  tc.batch_size = 2;
  const TrainState none = train(ms, MethodSpec::parse("NN2I[y]"), p, tc);
  CHECK(none.params == init_params(p.net, 2));
  REQUIRE(none.checkpoint_log.size() == 1);

  tc.epochs = 4;
  tc.checkpoint_every = 2;
  for (const char* label : {"NN2I[y]", "NN2Is[y]", "NN2N[y]", "N2I"}) {
    const MethodSpec m = MethodSpec::parse(label);
    const TrainState a = train(ms, m, p, tc);
    const TrainState b = train(ms, m, p, tc);
    TrainConfig threaded = tc;
    threaded.threads = 2;
    const TrainState c = train(ms, m, p, threaded);
    INFO(label);
    CHECK(a.params == b.params);
    CHECK(a.params == c.params);
    REQUIRE(a.loss_curve.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.loss_curve[i].loss == b.loss_curve[i].loss);
    CHECK(a.checkpoint_log.size() == 2);
  }

  // Poisoned clean images cannot influence training.
  auto poisoned = data;
  for (auto& s : poisoned) s.x_clean = ImageGrid(Grid(32, 32, std::nan("")));
  const MethodSpec m = MethodSpec::parse("NN2I[y]");
  CHECK(train(measurements_of(poisoned), m, p, tc).params == train(ms, m, p, tc).params);

  tc.checkpoint_every = 3;
  CHECK_THROWS_AS(train(ms, m, p, tc), ContractError);
}

TEST_CASE("select_checkpoint") {
  const ReconProblem p = small_problem(2.0);
  const auto data = small_dataset(p, 6, 6);
  const std::vector<TrainingSample> train_set(data.begin(), data.begin() + 3);
  const std::vector<TrainingSample> val(data.begin() + 3, data.end());
  const MethodSpec m = MethodSpec::parse("NN2I[y]");
  TrainConfig tc;
  tc.epochs = 1;
  tc.checkpoint_every = 1;
  tc.lr = 1e-3;
  const auto ms = measurements_of(train_set);
  const TrainState one = train(ms, m, p, tc);
  const Selection last = select_checkpoint(one, Stopping::LastEpoch, val, m, p);
  const Selection oracle = select_checkpoint(one, Stopping::PsnrOracle, val, m, p);
  CHECK(last.params == oracle.params);

  // Over-training a tiny set: the oracle is never worse on validation.
  tc.epochs = 60;
  tc.checkpoint_every = 10;
  tc.lr = 5e-3;
  const TrainState many = train(ms, m, p, tc);
  const Selection l2 = select_checkpoint(many, Stopping::LastEpoch, val, m, p);
  const Selection o2 = select_checkpoint(many, Stopping::PsnrOracle, val, m, p);
  CHECK(*o2.val_psnr >= mean_validation_psnr(l2.params, m, val, p));
  for (const auto& snap : many.checkpoint_log) CHECK(*o2.val_psnr >= mean_validation_psnr(snap.params, m, val, p));

  auto no_clean = val;
  for (auto& s : no_clean) s.x_clean.reset();
  CHECK_THROWS_AS(select_checkpoint(many, Stopping::PsnrOracle, no_clean, m, p), ContractError);
  CHECK(parse_stopping("psnr_oracle") == Stopping::PsnrOracle);
  CHECK_THROWS_AS(parse_stopping("best"), ContractError);
}

TEST_CASE("descent smoke run and inference variants on a toy model") {
  // 8 samples at 64x64 for 300 epochs; the loss has to go down and [y]
  // inference must not lose to [z] inference by more than 0.5 dB.
  const ReconProblem p{ScanGeometry::parallel(64, 32), NetConfig{3, 4, 3, true, 0.1}, NoiseSpec{8.0, 2.0, 0, 1}};
  const auto images = phantom_set(10, 64, 21);
  const auto data = synthesize(images, p.geom, p.noise, 1);
  const std::vector<TrainingSample> train_set(data.begin(), data.begin() + 8);
  const std::vector<TrainingSample> test(data.begin() + 8, data.end());
  TrainConfig tc;
  tc.epochs = 300;
  tc.checkpoint_every = 300;
  tc.lr = 2e-3;
  tc.batch_size = 4;
  tc.seed = 1;
  const MethodSpec m = MethodSpec::parse("NN2I[y]");
  const TrainState st = train(measurements_of(train_set), m, p, tc);
  MESSAGE("loss epoch 1 " << st.loss_curve.front().loss << ", epoch 300 " << st.loss_curve.back().loss);
  CHECK(st.loss_curve.back().loss < st.loss_curve.front().loss);
  const double py = mean_validation_psnr(st.params, m, test, p);
  const double pz = mean_validation_psnr(st.params, m.with_inference(InferenceInput::Z), test, p);
  MESSAGE("toy NN2I PSNR [y] " << py << ", [z] " << pz);
  CHECK(py >= pz - 0.5);
}

TEST_CASE("linear theorem check") {
  const auto zero = check_theorem1_linear(4, 4, 200, 1, LinearTheoremOptions{std::nullopt, 0.0, 1.0});
  CHECK(zero.distance < 1e-8);

  const auto big = check_theorem1_linear(4, 4, 100000, 1);
  MESSAGE("distance at 1e5 samples: " << big.distance);
  CHECK(big.distance < 0.1);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd w(8, 4);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  for (const auto& opts : {LinearTheoremOptions{}, LinearTheoremOptions{w, 0.5, 1.0}}) {
    std::vector<double> medians;
    for (int mc : {1000, 10000, 100000}) {
      std::vector<double> d;
      for (std::uint64_t seed = 0; seed < 5; ++seed) d.push_back(check_theorem1_linear(4, 4, mc, seed, opts).distance);
      medians.push_back(median(d));
    }
    MESSAGE("median distances " << medians[0] << " " << medians[1] << " " << medians[2]);
    CHECK(medians[1] < medians[0]);
    CHECK(medians[2] < medians[1]);
    CHECK(medians[2] < 0.1);
  }
}

TEST_CASE("conditional identity check") {
  const auto zero = check_conditional_identity(NoiseSpec{0.0, 2.0, 0, 1}, 1000, 1);
  CHECK(zero.binned_residual == 0.0);
  CHECK(zero.unconditional_zscore == 0.0);

  const auto un = check_conditional_identity(NoiseSpec{1.0, 2.0, 0, 1}, 100000, 2);
  CHECK(un.unconditional_zscore < 4.0);

  const auto binned = check_conditional_identity(NoiseSpec{1.0, 2.0, 0, 1}, 1000000, 3);
  MESSAGE("binned residual " << binned.binned_residual << " over " << binned.bins_used << " bins");
  CHECK(binned.binned_residual < 0.1);
  CHECK(binned.bins_used == 8);
}
