#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace dra {

/// Uniform tensor grid in 1 or 2 dimensions. Node layout is row-major with
/// axis 0 outermost: index = i0 * num[1] + i1.
struct Grid {
  int dim = 1;
  std::array<double, 2> lo{{0.0, 0.0}};
  std::array<double, 2> hi{{0.0, 0.0}};
  std::array<int, 2> num{{0, 1}};

  static Grid make1d(double lo, double hi, int n);
  static Grid make2d(double lo0, double hi0, int n0, double lo1, double hi1,
                     int n1);

  int nodes() const { return num[0] * num[1]; }
  double spacing(int axis) const {
    return (hi[axis] - lo[axis]) / static_cast<double>(num[axis] - 1);
  }
  double max_spacing() const;

  int index(int i0, int i1 = 0) const { return i0 * num[1] + i1; }
  std::array<int, 2> coords(int idx) const {
    return {idx / num[1], idx % num[1]};
  }
  Eigen::VectorXd point(int idx) const;
  bool on_boundary(int idx) const;
  /// True when the node is at least `margin` nodes away from every face.
  bool in_interior(int idx, int margin = 1) const;
  /// Node closest to the origin (the normalization anchor x0 = 0).
  int anchor_index() const;
  bool contains(const Eigen::VectorXd& x) const;

  void validate() const;
};

/// Grid-sampled scalar function with central-difference gradients.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(Grid grid, Eigen::VectorXd values);
  explicit ScalarField(Grid grid);  // zero-initialized

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](int idx) const { return values_[idx]; }

  /// Gradient at a node: central differences in the interior, one-sided on
  /// the faces. `one_sided` (optional) reports whether a face stencil was
  /// used on any axis.
  Eigen::VectorXd gradient(int idx, bool* one_sided = nullptr) const;
  /// All nodal gradients, nodes x dim.
  Eigen::MatrixXd gradients() const;

  /// Multilinear interpolation; x outside the box is clamped to the faces.
  /// Returns true when x was inside (no clamping).
  bool interpolate(const Eigen::VectorXd& x, double* value) const;

  /// Pins values so that values[anchor] == anchor_value.
  void normalize(int anchor, double anchor_value = 0.0);

  std::string to_json() const;
  std::string to_csv() const;

 private:
  Grid grid_;
  Eigen::VectorXd values_;
};

/// Time-indexed stack of grid functions, t in {0, dt, ..., T}.
class ValueSurface {
 public:
  ValueSurface() = default;
  ValueSurface(Grid grid, std::vector<double> times);

  const Grid& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  int time_steps() const { return static_cast<int>(times_.size()); }

  /// Row view of the values at time index k.
  Eigen::VectorXd slice(int k) const { return values_.row(k); }
  void set_slice(int k, const Eigen::VectorXd& v) { values_.row(k) = v; }
  double at(int k, int idx) const { return values_(k, idx); }
  ScalarField slice_field(int k) const { return {grid_, slice(k)}; }

  std::string to_json() const;

 private:
  Grid grid_;
  std::vector<double> times_;
  Eigen::MatrixXd values_;  // times x nodes
};

}  // namespace dra
