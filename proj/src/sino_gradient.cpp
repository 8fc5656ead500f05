#include "ctssl/sino_gradient.hpp"

namespace ctssl {

GradField grad_forward(const Sinogram& sino) {
  const Grid& v = sino.values();
  const int na = v.rows();
  const int nd = v.cols();
  GradField g{Grid(na, nd), Grid(na, nd)};
  for (int a = 0; a < na; ++a) {
    for (int d = 0; d < nd; ++d) {
      if (a + 1 < na) g.d_angle(a, d) = v(a + 1, d) - v(a, d);
      if (d + 1 < nd) g.d_detector(a, d) = v(a, d + 1) - v(a, d);
    }
  }
  return g;
}

Sinogram grad_adjoint(const GradField& field, const ScanGeometry& geom) {
  require(field.d_angle.same_shape(field.d_detector),
          "grad_adjoint: field components differ in shape");
  const int na = field.d_angle.rows();
  const int nd = field.d_angle.cols();
  require(na == geom.num_views() && nd == geom.num_detectors,
          "grad_adjoint: field shape does not match geometry");
  Sinogram out(geom);
  for (int a = 0; a < na; ++a) {
    for (int d = 0; d < nd; ++d) {
      double acc = 0.0;
      if (a + 1 < na) acc -= field.d_angle(a, d);
      if (a > 0) acc += field.d_angle(a - 1, d);
      if (d + 1 < nd) acc -= field.d_detector(a, d);
      if (d > 0) acc += field.d_detector(a, d - 1);
      out(a, d) = acc;
    }
  }
  return out;
}

}  // namespace ctssl
