#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctssl {

/// Raised when an operation is called with inconsistent shapes or invalid
/// arguments.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major real matrix.
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, double fill = 0.0);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[index(r, c)]; }
  double operator()(int r, int c) const { return data_[index(r, c)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  Grid& operator+=(const Grid& other);
  Grid& operator-=(const Grid& other);
  Grid& operator*=(double s);

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Grid operator+(Grid a, const Grid& b);
Grid operator-(Grid a, const Grid& b);
Grid operator*(double s, Grid a);

double dot(const Grid& a, const Grid& b);
double squared_norm(const Grid& a);

/// Square image in the reconstruction domain.
class ImageGrid {
 public:
  ImageGrid() = default;
  explicit ImageGrid(int width, double pixel_size = 1.0);
  ImageGrid(Grid values, double pixel_size = 1.0);

  int width() const { return values_.rows(); }
  double pixel_size() const { return pixel_size_; }

  Grid& values() { return values_; }
  const Grid& values() const { return values_; }

  double& operator()(int r, int c) { return values_(r, c); }
  double operator()(int r, int c) const { return values_(r, c); }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  Grid values_;
  double pixel_size_ = 1.0;
};

/// Parallel-beam acquisition over [0, pi) with equidistant angles.
///
/// The full angle grid is `angle(k) = k * pi / num_angles`. An optional
/// `angle_subset` selects rows of the full sinogram (sparse-view mode); all
/// operators then act on the selected views only.
struct ScanGeometry {
  int image_width = 0;
  double pixel_size = 1.0;
  int num_angles = 0;
  int num_detectors = 0;
  double detector_spacing = 1.0;
  std::vector<int> angle_subset;

  /// Geometry with the default detector row: ceil(sqrt(2) * width) rounded
  /// up to even, spacing equal to the pixel size.
  static ScanGeometry parallel(int image_width, int num_angles,
                               double pixel_size = 1.0);
  static int default_detector_count(int image_width);

  double full_angle(int k) const;
  /// Angles of the active views, in row order.
  std::vector<double> angles() const;
  /// Indices (into the full angle grid) of the active views.
  std::vector<int> view_indices() const;
  int num_views() const;

  /// Restrict to a subset of the currently active views. `rows` indexes
  /// active views, not the full grid.
  ScanGeometry select_views(std::span<const int> rows) const;
  /// Keep every `stride`-th view of the full grid starting at `offset`.
  ScanGeometry sparse(int stride, int offset = 0) const;
  /// Same geometry with all views of the full grid active.
  ScanGeometry full() const;

  void validate() const;

  friend bool operator==(const ScanGeometry&, const ScanGeometry&) = default;
};

class Sinogram {
 public:
  Sinogram() = default;
  explicit Sinogram(ScanGeometry geometry);
  Sinogram(ScanGeometry geometry, Grid values);

  const ScanGeometry& geometry() const { return geometry_; }
  int num_views() const { return values_.rows(); }
  int num_detectors() const { return values_.cols(); }

  Grid& values() { return values_; }
  const Grid& values() const { return values_; }

  double& operator()(int a, int d) { return values_(a, d); }
  double operator()(int a, int d) const { return values_(a, d); }

  /// Rows of this sinogram for the given active-view indices.
  Sinogram select_views(std::span<const int> rows) const;

  friend bool operator==(const Sinogram&, const Sinogram&) = default;

 private:
  ScanGeometry geometry_;
  Grid values_;
};

/// Forward differences of a sinogram along both axes.
struct GradField {
  Grid d_angle;
  Grid d_detector;

  friend bool operator==(const GradField&, const GradField&) = default;
};

double dot(const GradField& a, const GradField& b);

void require(bool condition, const std::string& message);

}  // namespace ctssl
