#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pushtrack {

enum class ShapeKind : uint8_t { Disc = 0, Rect = 1, Ellip = 2 };

/// Planar object geometry, centered at the object frame origin.
///   Disc:  dims = (radius, radius)
///   Rect:  dims = (width, height), axis-aligned
///   Ellip: dims = (semi_major, semi_minor), major axis along x
struct ShapeModel {
  ShapeKind kind = ShapeKind::Disc;
  double a = 0.05;
  double b = 0.05;

  static ShapeModel disc(double radius) { return {ShapeKind::Disc, radius, radius}; }
  static ShapeModel rect(double width, double height) {
    return {ShapeKind::Rect, width, height};
  }
  static ShapeModel ellip(double semi_major, double semi_minor) {
    return {ShapeKind::Ellip, semi_major, semi_minor};
  }

  /// Half-extent of the axis-aligned bounding box.
  Eigen::Vector2d half_extent() const;
  bool contains(const Eigen::Vector2d& p) const;
};

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from_string(const std::string& name);

/// Exact signed distance to the shape boundary, negative inside. Disc and
/// rect are closed form; the ellipse runs a safeguarded Newton iteration on
/// the closest-boundary-point condition.
double analytic_sdf(const ShapeModel& shape, const Eigen::Vector2d& p);

/// Closest point on the shape boundary (used by the simulator to keep the
/// pusher tip exactly on the surface).
Eigen::Vector2d closest_boundary_point(const ShapeModel& shape,
                                       const Eigen::Vector2d& p);

/// Outward unit normal of the boundary at (or nearest to) p.
Eigen::Vector2d boundary_normal(const ShapeModel& shape,
                                const Eigen::Vector2d& p);

struct SdfLookup {
  double distance = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  bool out_of_bounds = false;  // query was clamped into the grid extent
};

/// Precomputed signed distance field on a regular grid in the object frame.
/// `origin` is the center of cell (0, 0); values are row-major with the x
/// index fastest. Immutable after build; lookups are thread-safe.
class SdfGrid {
 public:
  SdfGrid() = default;
  SdfGrid(Eigen::Vector2d origin, double resolution, int nx, int ny,
          std::vector<double> values);

  const Eigen::Vector2d& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const std::vector<double>& values() const { return values_; }

  double at(int ix, int iy) const { return values_[iy * nx_ + ix]; }

  /// Bilinear interpolation of the stored field; gradient by central
  /// differences of the interpolant (step = resolution). Out-of-extent
  /// queries are clamped and flagged.
  SdfLookup lookup(const Eigen::Vector2d& p) const;

  /// Same value as lookup() but with the exact in-cell derivative of the
  /// bilinear interpolant. The geometric factor differentiates through this
  /// so its analytic Jacobian matches the residual it actually evaluates.
  SdfLookup lookup_interpolant(const Eigen::Vector2d& p) const;

 private:
  Eigen::Vector2d clamp_query(const Eigen::Vector2d& p, bool& clamped) const;
  double interpolate(const Eigen::Vector2d& p) const;

  Eigen::Vector2d origin_ = Eigen::Vector2d::Zero();
  double resolution_ = 1e-3;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> values_;
};

/// Samples the analytic SDF at cell centers over 2.5x the shape's bounding
/// box. Default resolution 1 mm.
SdfGrid build_sdf(const ShapeModel& shape, double resolution = 1e-3);

}  // namespace pushtrack
