#include "ctssl/methods.hpp"

#include "ctssl/fbp.hpp"
#include "ctssl/radon.hpp"
#include "ctssl/sino_gradient.hpp"

namespace ctssl {

void MethodSpec::validate() const {
  require(weighting == Weighting::Identity || method == Method::NN2I,
          "method: gradient weighting is only defined for NN2I");
  require(method != Method::N2I || n2i_splits >= 2, "method: N2I needs at least 2 splits");
  require(!literal_nn2n_extrapolation || method == Method::NN2N,
          "method: literal extrapolation only applies to NN2N");
}

std::string MethodSpec::family() const {
  switch (method) {
    case Method::NN2I:
      return weighting == Weighting::Gradient ? "NN2Is" : "NN2I";
    case Method::NN2N:
      return "NN2N";
    case Method::N2I:
      return "N2I";
  }
  return "?";
}

std::string MethodSpec::inference_tag() const {
  if (method == Method::N2I) return "y";
  return inference_input == InferenceInput::Y ? "y" : "z";
}

std::string MethodSpec::label() const {
  if (method == Method::N2I) return "N2I";
  return family() + "[" + inference_tag() + "]";
}

MethodSpec MethodSpec::with_inference(InferenceInput input) const {
  MethodSpec m = *this;
  m.inference_input = input;
  return m;
}

MethodSpec MethodSpec::parse(std::string_view label) {
  MethodSpec m;
  std::string_view family = label;
  std::string_view tag = "y";
  if (const auto open = label.find('['); open != std::string_view::npos) {
    require(label.size() == open + 3 && label.back() == ']', "method: malformed label");
    family = label.substr(0, open);
    tag = label.substr(open + 1, 1);
  }
  require(tag == "y" || tag == "z", "method: inference must be [y] or [z]");
  m.inference_input = tag == "y" ? InferenceInput::Y : InferenceInput::Z;
  if (family == "NN2I") {
    m.method = Method::NN2I;
  } else if (family == "NN2Is") {
    m.method = Method::NN2I;
    m.weighting = Weighting::Gradient;
  } else if (family == "NN2N") {
    m.method = Method::NN2N;
  } else if (family == "N2I") {
    require(label.find('[') == std::string_view::npos, "method: N2I takes no inference tag");
    m.method = Method::N2I;
  } else {
    throw ContractError("method: unknown method '" + std::string(label) + "'");
  }
  return m;
}

std::vector<MethodSpec> MethodSpec::all_variants() {
  std::vector<MethodSpec> out;
  for (const char* label :
       {"NN2Is[y]", "NN2Is[z]", "NN2I[y]", "NN2I[z]", "NN2N[y]", "NN2N[z]", "N2I"}) {
    out.push_back(parse(label));
  }
  return out;
}

std::vector<Measurement> measurements_of(std::span<const TrainingSample> samples) {
  std::vector<Measurement> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.data);
  return out;
}

LinearMap radon_map(const ScanGeometry& geom) {
  const int n = geom.image_width;
  const double ps = geom.pixel_size;
  LinearMap map;
  map.name = "radon_forward";
  map.in = Shape{1, n, n};
  map.out = Shape{1, geom.num_views(), geom.num_detectors};
  map.apply = [geom, ps](const Tensor& x) {
    return to_tensor(radon_forward(ImageGrid(to_grid(x), ps), geom).values());
  };
  map.adjoint = [geom](const Tensor& u) {
    return to_tensor(radon_adjoint(Sinogram(geom, to_grid(u))).values());
  };
  return map;
}

LinearMap sino_gradient_map(const ScanGeometry& geom) {
  const int na = geom.num_views();
  const int nd = geom.num_detectors;
  LinearMap map;
  map.name = "grad_forward";
  map.in = Shape{1, na, nd};
  map.out = Shape{2, na, nd};
  map.apply = [geom, na, nd](const Tensor& u) {
    const GradField f = grad_forward(Sinogram(geom, to_grid(u)));
    Tensor out(Shape{2, na, nd});
    const std::size_t plane = f.d_angle.size();
    std::copy(f.d_angle.values().begin(), f.d_angle.values().end(), out.data.begin());
    std::copy(f.d_detector.values().begin(), f.d_detector.values().end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(plane));
    return out;
  };
  map.adjoint = [geom](const Tensor& g) {
    const GradField f{to_grid(g, 0), to_grid(g, 1)};
    return to_tensor(grad_adjoint(f, geom).values());
  };
  return map;
}

Tensor params_tensor(const ParamVector& params) {
  Tensor t(Shape{static_cast<int>(params.size()), 1, 1});
  t.data = params;
  return t;
}

LossGrad loss_grad(const ParamVector& params, const LossClosure& closure) {
  Graph g;
  Var p = g.parameter(params_tensor(params));
  Var loss = closure(g, p);
  require(g.value(loss).size() == 1, "loss_grad: closure must return a scalar");
  g.backward(loss);
  return LossGrad{g.scalar(loss), g.grad(p).data};
}

Sinogram draw_eta(const ReconProblem& problem, std::uint64_t sample_id, std::uint64_t iteration) {
  return sample_sinogram_noise(problem.noise, problem.geom,
                               RngStream{problem.noise.seed, sample_id, iteration});
}

Var nn2i_sample_loss(Graph& g, Var params, const ReconProblem& problem, const Sinogram& y,
                     const Sinogram& eta, Weighting weighting) {
  const Sinogram z(problem.geom, y.values() + eta.values());
  // 2y - z
  const Grid target = 2.0 * y.values() - z.values();
  Var input = g.constant(to_tensor(fbp(z).values()));
  Var out = unet_forward(g, params, input, problem.net);
  Var projected = ad::linear(g, out, radon_map(problem.geom));
  Var target_var = g.constant(to_tensor(target));
  if (weighting == Weighting::Gradient) {
    const LinearMap grad = sino_gradient_map(problem.geom);
    projected = ad::linear(g, projected, grad);
    target_var = g.constant(grad.apply(g.value(target_var)));
  }
  return ad::squared_norm(g, ad::axpby(g, 1.0, projected, -1.0, target_var));
}

Var nn2n_sample_loss(Graph& g, Var params, const ReconProblem& problem, const Sinogram& y,
                     const Sinogram& eta) {
  const Sinogram z(problem.geom, y.values() + eta.values());
  Var input = g.constant(to_tensor(fbp(z).values()));
  Var out = unet_forward(g, params, input, problem.net);
  Var projected = ad::linear(g, out, radon_map(problem.geom));
  Var target = g.constant(to_tensor(y.values()));
  return ad::squared_norm(g, ad::axpby(g, 1.0, projected, -1.0, target));
}

Var n2i_sample_loss(Graph& g, Var params, const NetConfig& net, const ImageGrid& input,
                    const ImageGrid& target) {
  Var out = unet_forward(g, params, g.constant(to_tensor(input.values())), net);
  Var t = g.constant(to_tensor(target.values()));
  return ad::squared_norm(g, ad::axpby(g, 1.0, out, -1.0, t));
}

double nn2i_loss(const ParamVector& params, std::span<const Measurement> batch,
                 const ReconProblem& problem, Weighting weighting, std::uint64_t iteration) {
  double total = 0.0;
  for (const auto& m : batch) {
    Graph g;
    Var p = g.constant(params_tensor(params));
    const Sinogram eta = draw_eta(problem, m.sample_id, iteration);
    total += g.scalar(nn2i_sample_loss(g, p, problem, m.y, eta, weighting));
  }
  return total;
}

double nn2n_loss(const ParamVector& params, std::span<const Measurement> batch,
                 const ReconProblem& problem, std::uint64_t iteration) {
  double total = 0.0;
  for (const auto& m : batch) {
    Graph g;
    Var p = g.constant(params_tensor(params));
    const Sinogram eta = draw_eta(problem, m.sample_id, iteration);
    total += g.scalar(nn2n_sample_loss(g, p, problem, m.y, eta));
  }
  return total;
}

std::vector<std::vector<int>> n2i_split_rows(int num_views, int splits) {
  require(splits >= 1, "n2i: split count must be positive");
  require(num_views % splits == 0, "n2i: number of views (" + std::to_string(num_views) +
                                       ") is not divisible by the split count (" +
                                       std::to_string(splits) + ")");
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(splits));
  for (int r = 0; r < num_views; ++r) rows[static_cast<std::size_t>(r % splits)].push_back(r);
  return rows;
}

std::vector<ImageGrid> n2i_split_fbps(const Sinogram& y, int splits) {
  std::vector<ImageGrid> out;
  for (const auto& rows : n2i_split_rows(y.num_views(), splits)) {
    out.push_back(fbp(y.select_views(rows)));
  }
  return out;
}

std::pair<ImageGrid, ImageGrid> n2i_pair_from_fbps(std::span<const ImageGrid> split_fbps,
                                                   int draw) {
  const int k = static_cast<int>(split_fbps.size());
  require(k >= 2, "n2i: need at least two splits");
  require(draw >= 0 && draw < k, "n2i: held-out split index out of range");
  ImageGrid input(split_fbps.front().width(), split_fbps.front().pixel_size());
  for (int j = 0; j < k; ++j) {
    if (j != draw) input.values() += split_fbps[static_cast<std::size_t>(j)].values();
  }
  input.values() *= 1.0 / (k - 1);
  return {std::move(input), split_fbps[static_cast<std::size_t>(draw)]};
}

std::pair<ImageGrid, ImageGrid> n2i_train_pair(const Measurement& sample, int splits, int draw) {
  const auto fbps = n2i_split_fbps(sample.y, splits);
  return n2i_pair_from_fbps(fbps, draw);
}

RngStream inference_stream(const ReconProblem& problem, std::uint64_t sample_id) {
  return RngStream{problem.noise.seed, sample_id, RngStream::kInference};
}

ImageGrid infer_with(const std::function<ImageGrid(const ImageGrid&)>& network,
                     const MethodSpec& method, const Sinogram& y, const ReconProblem& problem,
                     const RngStream& stream) {
  method.validate();
  if (method.method == Method::N2I) {
    const auto fbps = n2i_split_fbps(y, method.n2i_splits);
    ImageGrid acc(y.geometry().image_width, y.geometry().pixel_size);
    for (int j = 0; j < method.n2i_splits; ++j) {
      acc.values() += network(n2i_pair_from_fbps(fbps, j).first).values();
    }
    acc.values() *= 1.0 / method.n2i_splits;
    return acc;
  }
  if (method.inference_input == InferenceInput::Y) return network(fbp(y));

  const Sinogram eta = sample_sinogram_noise(problem.noise, y.geometry(), stream);
  const ImageGrid initial = fbp(Sinogram(y.geometry(), y.values() + eta.values()));
  ImageGrid out = network(initial);
  if (method.method == Method::NN2N) {
    out.values() *= 2.0;
    const double coeff = method.literal_nn2n_extrapolation ? 2.0 : 1.0;
    out.values() -= coeff * initial.values();
  }
  return out;
}

ImageGrid infer(const ParamVector& params, const MethodSpec& method, const Sinogram& y,
                const ReconProblem& problem, const RngStream& stream) {
  return infer_with(
      [&](const ImageGrid& image) { return net_forward(params, image, problem.net); }, method, y,
      problem, stream);
}

}  // namespace ctssl
