#include "ctssl/tensor.hpp"

namespace ctssl {

Tensor& Tensor::operator+=(const Tensor& other) {
  require(shape == other.shape, "tensor shape mismatch in +=");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
  return *this;
}

Tensor to_tensor(const Grid& g) {
  Tensor t(Shape{1, g.rows(), g.cols()});
  const auto v = g.values();
  std::copy(v.begin(), v.end(), t.data.begin());
  return t;
}

Grid to_grid(const Tensor& t, int channel) {
  require(channel >= 0 && channel < t.shape.c, "to_grid: channel out of range");
  Grid g(t.shape.h, t.shape.w);
  const std::size_t plane = static_cast<std::size_t>(t.shape.h) * t.shape.w;
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(plane * channel),
            t.data.begin() + static_cast<std::ptrdiff_t>(plane * (channel + 1)),
            g.values().begin());
  return g;
}

}  // namespace ctssl
