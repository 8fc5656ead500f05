#include "ctssl/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <memory>

namespace ctssl {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

const Graph::Node& Graph::node(Var v) const {
  require(v.id >= 0 && v.id < static_cast<int>(nodes_.size()), "graph: invalid variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Graph::Node& Graph::node(Var v) {
  require(v.id >= 0 && v.id < static_cast<int>(nodes_.size()), "graph: invalid variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), std::nullopt, nullptr, false, true});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(Tensor value) {
  nodes_.push_back(Node{"parameter", std::move(value), std::nullopt, nullptr, true, true});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(std::string name, Tensor value, std::initializer_list<Var> parents,
                  Backward backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || node(p).requires_grad;
  Node n;
  n.name = std::move(name);
  n.value = std::move(value);
  n.requires_grad = needs;
  n.differentiable = static_cast<bool>(backward);
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Graph::scalar(Var v) const {
  const Tensor& t = node(v).value;
  require(t.size() == 1, "graph: value is not a scalar");
  return t.data[0];
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad) return *n.grad;
  return Tensor(n.value.shape);
}

Tensor& Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.grad) n.grad.emplace(n.value.shape);
  return *n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  if (!node(v).requires_grad) return;
  grad_buffer(v) += g;
}

void Graph::backward(Var root) {
  require(node(root).value.size() == 1, "backward: root must be a scalar");
  for (Node& n : nodes_) n.grad.reset();
  if (!node(root).requires_grad) return;
  grad_buffer(root).data[0] = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad || !n.requires_grad) continue;
    if (!n.differentiable) {
      throw NonDifferentiableError("backward: operation '" + n.name +
                                   "' has no vector-Jacobian product");
    }
    if (!n.backward) continue;  // leaf parameter
    // Callbacks only write into parents (lower ids), so this stays valid.
    n.backward(*this, *n.grad);
  }
}

namespace ad {

Var slice(Graph& g, Var flat, std::size_t offset, Shape shape) {
  const Tensor& src = g.value(flat);
  require(offset + shape.size() <= src.size(), "slice: out of range");
  Tensor out(shape);
  std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(offset), shape.size(),
              out.data.begin());
  return g.record("slice", std::move(out), {flat}, [flat, offset](Graph& gr, const Tensor& go) {
    Tensor& buf = gr.grad_buffer(flat);
    for (std::size_t i = 0; i < go.size(); ++i) buf.data[offset + i] += go.data[i];
  });
}

namespace {

// Patch matrix (in*k*k, h*w) with replicate padding.
RowMatrix im2col(const Tensor& x, int k) {
  const int c = x.shape.c, h = x.shape.h, w = x.shape.w;
  const int pad = k / 2;
  RowMatrix cols(static_cast<Eigen::Index>(c) * k * k, static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row((ci * k + ky) * k + kx).data();
        const int shift = kx - pad;
        const int lo = std::max(0, -shift), hi = std::min(w, w - shift);
        for (int y = 0; y < h; ++y) {
          const int sy = std::clamp(y + ky - pad, 0, h - 1);
          const double* src = x.data.data() + x.offset(ci, sy, 0);
          double* dst = row + static_cast<std::ptrdiff_t>(y) * w;
          for (int xx = 0; xx < lo; ++xx) dst[xx] = src[0];
          for (int xx = lo; xx < hi; ++xx) dst[xx] = src[xx + shift];
          for (int xx = std::max(hi, lo); xx < w; ++xx) dst[xx] = src[w - 1];
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, int k, Tensor& dx) {
  const int c = dx.shape.c, h = dx.shape.h, w = dx.shape.w;
  const int pad = k / 2;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row((ci * k + ky) * k + kx).data();
        const int shift = kx - pad;
        const int lo = std::max(0, -shift), hi = std::min(w, w - shift);
        for (int y = 0; y < h; ++y) {
          const int sy = std::clamp(y + ky - pad, 0, h - 1);
          double* dst = dx.data.data() + dx.offset(ci, sy, 0);
          const double* src = row + static_cast<std::ptrdiff_t>(y) * w;
          for (int xx = 0; xx < lo; ++xx) dst[0] += src[xx];
          for (int xx = lo; xx < hi; ++xx) dst[xx + shift] += src[xx];
          for (int xx = std::max(hi, lo); xx < w; ++xx) dst[w - 1] += src[xx];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Graph& g, Var x, Var weight, Var bias, int kernel) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(weight);
  const Tensor& bv = g.value(bias);
  const int cout = wv.shape.c;
  const int cin = xv.shape.c;
  require(kernel >= 1 && kernel % 2 == 1, "conv2d: kernel size must be odd");
  require(wv.shape == (Shape{cout, cin, kernel * kernel}), "conv2d: weight shape mismatch");
  require(bv.shape == (Shape{cout, 1, 1}), "conv2d: bias shape mismatch");

  auto cols = std::make_shared<RowMatrix>(im2col(xv, kernel));
  const Eigen::Index hw = static_cast<Eigen::Index>(xv.shape.h) * xv.shape.w;
  Tensor out(Shape{cout, xv.shape.h, xv.shape.w});
  // Products run on Eigen-owned aligned storage; vectorized kernels on
  // malloc-aligned maps round differently from run to run.
  ConstMatrixMap wm(wv.data.data(), cout, cols->rows());
  MatrixMap om(out.data.data(), cout, hw);
  om.noalias() = wm * (*cols);
  for (int o = 0; o < cout; ++o) om.row(o).array() += bv.data[static_cast<std::size_t>(o)];

  return g.record("conv2d", std::move(out), {x, weight, bias},
                  [x, weight, bias, kernel, cols, cout, hw](Graph& gr, const Tensor& go) {
                    ConstMatrixMap gm(go.data.data(), cout, hw);
                    if (gr.requires_grad(weight)) {
                      Tensor& dw = gr.grad_buffer(weight);
                      MatrixMap dwm(dw.data.data(), cout, cols->rows());
                      dwm.noalias() += gm * cols->transpose();
                    }
                    if (gr.requires_grad(bias)) {
                      Tensor& db = gr.grad_buffer(bias);
                      // Sequential sum: Eigen's vectorized redux order depends on alignment.
                      for (int o = 0; o < cout; ++o) {
                        double s = 0.0;
                        for (Eigen::Index i = 0; i < hw; ++i) s += gm(o, i);
                        db.data[static_cast<std::size_t>(o)] += s;
                      }
                    }
                    if (gr.requires_grad(x)) {
                      const Tensor& wv2 = gr.value(weight);
                      ConstMatrixMap wm2(wv2.data.data(), cout, cols->rows());
                      RowMatrix dcols = wm2.transpose() * gm;
                      col2im_add(dcols, kernel, gr.grad_buffer(x));
                    }
                  });
}

Var leaky_relu(Graph& g, Var x, double slope) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv.data[i];
    out.data[i] = v > 0.0 ? v : slope * v;
  }
  return g.record("leaky_relu", std::move(out), {x}, [x, slope](Graph& gr, const Tensor& go) {
    const Tensor& xv2 = gr.value(x);
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < go.size(); ++i) {
      dx.data[i] += xv2.data[i] > 0.0 ? go.data[i] : slope * go.data[i];
    }
  });
}

Var avg_pool2(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  require(xv.shape.h % 2 == 0 && xv.shape.w % 2 == 0, "avg_pool2: spatial size must be even");
  Tensor out(Shape{xv.shape.c, xv.shape.h / 2, xv.shape.w / 2});
  for (int c = 0; c < out.shape.c; ++c) {
    for (int y = 0; y < out.shape.h; ++y) {
      for (int xx = 0; xx < out.shape.w; ++xx) {
        out.at(c, y, xx) = 0.25 * (xv.at(c, 2 * y, 2 * xx) + xv.at(c, 2 * y, 2 * xx + 1) +
                                   xv.at(c, 2 * y + 1, 2 * xx) + xv.at(c, 2 * y + 1, 2 * xx + 1));
      }
    }
  }
  return g.record("avg_pool2", std::move(out), {x}, [x](Graph& gr, const Tensor& go) {
    Tensor& dx = gr.grad_buffer(x);
    for (int c = 0; c < go.shape.c; ++c) {
      for (int y = 0; y < go.shape.h; ++y) {
        for (int xx = 0; xx < go.shape.w; ++xx) {
          const double v = 0.25 * go.at(c, y, xx);
          dx.at(c, 2 * y, 2 * xx) += v;
          dx.at(c, 2 * y, 2 * xx + 1) += v;
          dx.at(c, 2 * y + 1, 2 * xx) += v;
          dx.at(c, 2 * y + 1, 2 * xx + 1) += v;
        }
      }
    }
  });
}

Var upsample2(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(Shape{xv.shape.c, xv.shape.h * 2, xv.shape.w * 2});
  for (int c = 0; c < out.shape.c; ++c) {
    for (int y = 0; y < out.shape.h; ++y) {
      for (int xx = 0; xx < out.shape.w; ++xx) out.at(c, y, xx) = xv.at(c, y / 2, xx / 2);
    }
  }
  return g.record("upsample2", std::move(out), {x}, [x](Graph& gr, const Tensor& go) {
    Tensor& dx = gr.grad_buffer(x);
    for (int c = 0; c < go.shape.c; ++c) {
      for (int y = 0; y < go.shape.h; ++y) {
        for (int xx = 0; xx < go.shape.w; ++xx) dx.at(c, y / 2, xx / 2) += go.at(c, y, xx);
      }
    }
  });
}

Var concat(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require(av.shape.h == bv.shape.h && av.shape.w == bv.shape.w, "concat: spatial shape mismatch");
  Tensor out(Shape{av.shape.c + bv.shape.c, av.shape.h, av.shape.w});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(av.size()));
  const std::size_t split = av.size();
  return g.record("concat", std::move(out), {a, b}, [a, b, split](Graph& gr, const Tensor& go) {
    if (gr.requires_grad(a)) {
      Tensor& da = gr.grad_buffer(a);
      for (std::size_t i = 0; i < split; ++i) da.data[i] += go.data[i];
    }
    if (gr.requires_grad(b)) {
      Tensor& db = gr.grad_buffer(b);
      for (std::size_t i = 0; i < db.size(); ++i) db.data[i] += go.data[split + i];
    }
  });
}

Var linear(Graph& g, Var x, const LinearMap& map) {
  const Tensor& xv = g.value(x);
  require(xv.shape == map.in, "linear: input shape does not match " + map.name);
  Tensor out = map.apply(xv);
  require(out.shape == map.out, "linear: output shape does not match " + map.name);
  auto adjoint = map.adjoint;
  return g.record(map.name, std::move(out), {x},
                  adjoint ? Graph::Backward([x, adjoint](Graph& gr, const Tensor& go) {
                    gr.accumulate(x, adjoint(go));
                  })
                          : Graph::Backward{});
}

Var axpby(Graph& g, double alpha, Var x, double beta, Var y) {
  const Tensor& xv = g.value(x);
  const Tensor& yv = g.value(y);
  require(xv.shape == yv.shape, "axpby: shape mismatch");
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = alpha * xv.data[i] + beta * yv.data[i];
  return g.record("axpby", std::move(out), {x, y}, [x, y, alpha, beta](Graph& gr, const Tensor& go) {
    if (gr.requires_grad(x)) {
      Tensor& dx = gr.grad_buffer(x);
      for (std::size_t i = 0; i < go.size(); ++i) dx.data[i] += alpha * go.data[i];
    }
    if (gr.requires_grad(y)) {
      Tensor& dy = gr.grad_buffer(y);
      for (std::size_t i = 0; i < go.size(); ++i) dy.data[i] += beta * go.data[i];
    }
  });
}

Var scale(Graph& g, double alpha, Var x) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = alpha * xv.data[i];
  return g.record("scale", std::move(out), {x}, [x, alpha](Graph& gr, const Tensor& go) {
    Tensor& dx = gr.grad_buffer(x);
    for (std::size_t i = 0; i < go.size(); ++i) dx.data[i] += alpha * go.data[i];
  });
}

Var squared_norm(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  double acc = 0.0;
  for (double v : xv.data) acc += v * v;
  return g.record("squared_norm", Tensor(Shape{}, acc), {x}, [x](Graph& gr, const Tensor& go) {
    const Tensor& xv2 = gr.value(x);
    Tensor& dx = gr.grad_buffer(x);
    const double s = 2.0 * go.data[0];
    for (std::size_t i = 0; i < xv2.size(); ++i) dx.data[i] += s * xv2.data[i];
  });
}

}  // namespace ad
}  // namespace ctssl
