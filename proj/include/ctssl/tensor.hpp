#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ctssl/geometry.hpp"

namespace ctssl {

/// Channel-major (C, H, W) shape of a single-sample activation.
struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}

  std::size_t size() const { return data.size(); }
  double& at(int c, int y, int x) { return data[offset(c, y, x)]; }
  double at(int c, int y, int x) const { return data[offset(c, y, x)]; }

  std::size_t offset(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * static_cast<std::size_t>(shape.h) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape.w) +
           static_cast<std::size_t>(x);
  }

  Tensor& operator+=(const Tensor& other);
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Single-channel tensor view of a matrix and back.
Tensor to_tensor(const Grid& g);
Grid to_grid(const Tensor& t, int channel = 0);

}  // namespace ctssl
