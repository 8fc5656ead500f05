#pragma once

#include <functional>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctssl/tensor.hpp"

namespace ctssl {

/// Raised when backpropagation reaches an operation that has no
/// vector-Jacobian product.
class NonDifferentiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  int id = -1;
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse and calls each node's vector-Jacobian product.
class Graph {
 public:
  /// Receives the gradient of the node's output and accumulates into its
  /// parents via Graph::accumulate.
  using Backward = std::function<void(Graph&, const Tensor& grad_out)>;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Append an operation node. A null `backward` marks the operation as
  /// non-differentiable; this only fails if a gradient reaches it.
  Var record(std::string name, Tensor value, std::initializer_list<Var> parents,
             Backward backward);

  const Tensor& value(Var v) const { return node(v).value; }
  double scalar(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient of the last backward() root with respect to `v` (zeros if the
  /// root does not depend on `v`).
  Tensor grad(Var v) const;

  /// Add `g` into the gradient buffer of `v` (no-op for constants).
  void accumulate(Var v, const Tensor& g);
  /// Mutable gradient buffer of `v`, zero-initialized on first use. Callers
  /// must check requires_grad(v) first.
  Tensor& grad_buffer(Var v);

  /// Backpropagate from a scalar root.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string name;
    Tensor value;
    std::optional<Tensor> grad;
    Backward backward;
    bool requires_grad = false;
    bool differentiable = true;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

/// A linear operator with its adjoint, usable as a differentiable primitive.
/// The vector-Jacobian product of `apply` is `adjoint`.
struct LinearMap {
  std::string name;
  Shape in;
  Shape out;
  std::function<Tensor(const Tensor&)> apply;
  std::function<Tensor(const Tensor&)> adjoint;
};

namespace ad {

/// Contiguous block of a flat parameter vector, reshaped.
Var slice(Graph& g, Var flat, std::size_t offset, Shape shape);

/// Stride-1 2D convolution with replicate padding, output shape = input
/// shape with `weight.c` output channels. weight: {out, in, k*k}, bias:
/// {out, 1, 1}.
Var conv2d(Graph& g, Var x, Var weight, Var bias, int kernel);

Var leaky_relu(Graph& g, Var x, double slope);

/// 2x2 average pooling (spatial size must be even).
Var avg_pool2(Graph& g, Var x);

/// 2x nearest-neighbour upsampling.
Var upsample2(Graph& g, Var x);

/// Channel concatenation.
Var concat(Graph& g, Var a, Var b);

Var linear(Graph& g, Var x, const LinearMap& map);

/// alpha * x + beta * y.
Var axpby(Graph& g, double alpha, Var x, double beta, Var y);

Var scale(Graph& g, double alpha, Var x);

/// Sum of squares, as a {1,1,1} scalar.
Var squared_norm(Graph& g, Var x);

}  // namespace ad
}  // namespace ctssl
