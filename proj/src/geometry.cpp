#include "ctssl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctssl {

void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

Grid::Grid(int rows, int cols, double fill) : rows_(rows), cols_(cols) {
  require(rows >= 0 && cols >= 0, "grid dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
               fill);
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Grid& Grid::operator+=(const Grid& other) {
  require(same_shape(other), "grid shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Grid& Grid::operator-=(const Grid& other) {
  require(same_shape(other), "grid shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Grid& Grid::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Grid operator+(Grid a, const Grid& b) { return a += b; }
Grid operator-(Grid a, const Grid& b) { return a -= b; }
Grid operator*(double s, Grid a) { return a *= s; }

double dot(const Grid& a, const Grid& b) {
  require(a.same_shape(b), "grid shape mismatch in dot");
  double acc = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return acc;
}

double squared_norm(const Grid& a) { return dot(a, a); }

double dot(const GradField& a, const GradField& b) {
  return dot(a.d_angle, b.d_angle) + dot(a.d_detector, b.d_detector);
}

ImageGrid::ImageGrid(int width, double pixel_size)
    : values_(width, width), pixel_size_(pixel_size) {
  require(width >= 2, "image width must be at least 2");
  require(pixel_size > 0.0, "pixel size must be positive");
}

ImageGrid::ImageGrid(Grid values, double pixel_size)
    : values_(std::move(values)), pixel_size_(pixel_size) {
  require(values_.rows() == values_.cols(), "image must be square");
  require(values_.rows() >= 2, "image width must be at least 2");
  require(pixel_size > 0.0, "pixel size must be positive");
}

int ScanGeometry::default_detector_count(int image_width) {
  const int n = static_cast<int>(std::ceil(std::sqrt(2.0) * image_width));
  return n % 2 == 0 ? n : n + 1;
}

ScanGeometry ScanGeometry::parallel(int image_width, int num_angles,
                                    double pixel_size) {
  ScanGeometry g;
  g.image_width = image_width;
  g.pixel_size = pixel_size;
  g.num_angles = num_angles;
  g.num_detectors = default_detector_count(image_width);
  g.detector_spacing = pixel_size;
  g.validate();
  return g;
}

double ScanGeometry::full_angle(int k) const {
  return static_cast<double>(k) * std::numbers::pi /
         static_cast<double>(num_angles);
}

std::vector<int> ScanGeometry::view_indices() const {
  if (!angle_subset.empty()) return angle_subset;
  std::vector<int> all(static_cast<std::size_t>(num_angles));
  for (int k = 0; k < num_angles; ++k) all[static_cast<std::size_t>(k)] = k;
  return all;
}

std::vector<double> ScanGeometry::angles() const {
  std::vector<double> out;
  for (int k : view_indices()) out.push_back(full_angle(k));
  return out;
}

int ScanGeometry::num_views() const {
  return angle_subset.empty() ? num_angles
                              : static_cast<int>(angle_subset.size());
}

ScanGeometry ScanGeometry::select_views(std::span<const int> rows) const {
  const auto active = view_indices();
  ScanGeometry g = *this;
  g.angle_subset.clear();
  for (int r : rows) {
    require(r >= 0 && r < static_cast<int>(active.size()),
            "view index out of range");
    g.angle_subset.push_back(active[static_cast<std::size_t>(r)]);
  }
  g.validate();
  return g;
}

ScanGeometry ScanGeometry::sparse(int stride, int offset) const {
  require(stride >= 1, "sparse stride must be positive");
  require(offset >= 0 && offset < stride, "sparse offset out of range");
  ScanGeometry g = full();
  for (int k = offset; k < num_angles; k += stride) g.angle_subset.push_back(k);
  g.validate();
  return g;
}

ScanGeometry ScanGeometry::full() const {
  ScanGeometry g = *this;
  g.angle_subset.clear();
  return g;
}

void ScanGeometry::validate() const {
  require(image_width >= 2, "geometry: image width must be at least 2");
  require(pixel_size > 0.0, "geometry: pixel size must be positive");
  require(num_angles >= 1, "geometry: need at least one angle");
  require(detector_spacing > 0.0, "geometry: detector spacing must be positive");
  const double diagonal = std::sqrt(2.0) * image_width * pixel_size;
  require(num_detectors * detector_spacing >= diagonal - 1e-9,
          "geometry: detector row does not cover the image diagonal");
  for (std::size_t i = 0; i < angle_subset.size(); ++i) {
    require(angle_subset[i] >= 0 && angle_subset[i] < num_angles,
            "geometry: angle subset index out of range");
    require(i == 0 || angle_subset[i] > angle_subset[i - 1],
            "geometry: angle subset must be strictly increasing");
  }
}

Sinogram::Sinogram(ScanGeometry geometry)
    : geometry_(std::move(geometry)),
      values_(geometry_.num_views(), geometry_.num_detectors) {}

Sinogram::Sinogram(ScanGeometry geometry, Grid values)
    : geometry_(std::move(geometry)), values_(std::move(values)) {
  require(values_.rows() == geometry_.num_views() &&
              values_.cols() == geometry_.num_detectors,
          "sinogram shape does not match geometry");
}

Sinogram Sinogram::select_views(std::span<const int> rows) const {
  Sinogram out(geometry_.select_views(rows));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int d = 0; d < num_detectors(); ++d) {
      out(static_cast<int>(i), d) = (*this)(rows[i], d);
    }
  }
  return out;
}

}  // namespace ctssl
