#include "ctssl/fbp.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "ctssl/radon.hpp"

namespace ctssl {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwFree>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

RealBuffer alloc_real(int n) { return RealBuffer(fftw_alloc_real(static_cast<std::size_t>(n))); }
ComplexBuffer alloc_complex(int n) {
  return ComplexBuffer(fftw_alloc_complex(static_cast<std::size_t>(n)));
}

// FFTW planning is not thread-safe; executing an existing plan on fresh
// (fftw_malloc-aligned) arrays is.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

PlanPair plans_for(int length) {
  static std::mutex mutex;
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(length);
  if (it != cache.end()) return it->second;
  auto in = alloc_real(length);
  auto out = alloc_complex(length / 2 + 1);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(length, in.get(), out.get(), FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(length, out.get(), in.get(), FFTW_ESTIMATE);
  cache.emplace(length, p);
  return p;
}

}  // namespace

int ramp_padded_length(int num_detectors) {
  int p = 1;
  while (p < 2 * num_detectors) p *= 2;
  return p;
}

std::vector<double> ramp_response(int num_detectors, double detector_spacing) {
  const int length = ramp_padded_length(num_detectors);
  auto kernel = alloc_real(length);
  const double tau = detector_spacing;
  for (int i = 0; i < length; ++i) {
    // Circular index in [-length/2, length/2).
    const int k = i < length / 2 ? i : i - length;
    double h = 0.0;
    if (k == 0) {
      h = 1.0 / (4.0 * tau * tau);
    } else if (k % 2 != 0) {
      const double denom = std::numbers::pi * k * tau;
      h = -1.0 / (denom * denom);
    }
    kernel[static_cast<std::size_t>(i)] = h * tau;
  }
  auto spectrum = alloc_complex(length / 2 + 1);
  fftw_execute_dft_r2c(plans_for(length).forward, kernel.get(), spectrum.get());
  // The kernel is real and even, so its spectrum is real.
  std::vector<double> response(static_cast<std::size_t>(length / 2 + 1));
  for (std::size_t i = 0; i < response.size(); ++i) response[i] = spectrum[i][0];
  return response;
}

Sinogram ramp_filter(const Sinogram& sino) {
  const ScanGeometry& geom = sino.geometry();
  const int nd = geom.num_detectors;
  require(sino.num_views() == geom.num_views() && sino.num_detectors() == nd,
          "ramp_filter: sinogram shape does not match geometry");
  const int length = ramp_padded_length(nd);
  const auto response = ramp_response(nd, geom.detector_spacing);
  const PlanPair plans = plans_for(length);
  auto buffer = alloc_real(length);
  auto spectrum = alloc_complex(length / 2 + 1);
  Sinogram out(geom);
  for (int a = 0; a < sino.num_views(); ++a) {
    for (int i = 0; i < length; ++i) buffer[static_cast<std::size_t>(i)] = i < nd ? sino(a, i) : 0.0;
    fftw_execute_dft_r2c(plans.forward, buffer.get(), spectrum.get());
    for (std::size_t k = 0; k < response.size(); ++k) {
      spectrum[k][0] *= response[k];
      spectrum[k][1] *= response[k];
    }
    fftw_execute_dft_c2r(plans.inverse, spectrum.get(), buffer.get());
    // FFTW's inverse is unnormalized.
    for (int i = 0; i < nd; ++i) out(a, i) = buffer[static_cast<std::size_t>(i)] / length;
  }
  return out;
}

ImageGrid fbp(const Sinogram& sino) {
  const ScanGeometry& geom = sino.geometry();
  ImageGrid image = radon_adjoint(ramp_filter(sino));
  // radon_adjoint spreads each detector sample with total weight
  // pixel_size^2 / detector_spacing; undo that so the result is in image units.
  const double area = geom.pixel_size * geom.pixel_size;
  image.values() *= std::numbers::pi / sino.num_views() *
                    (geom.detector_spacing / area);
  return image;
}

}  // namespace ctssl
