#include "pushtrack/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pushtrack {

Eigen::Vector2d ShapeModel::half_extent() const {
  switch (kind) {
    case ShapeKind::Disc:
      return {a, a};
    case ShapeKind::Rect:
      return {a / 2.0, b / 2.0};
    case ShapeKind::Ellip:
      return {a, b};
  }
  return {a, a};
}

bool ShapeModel::contains(const Eigen::Vector2d& p) const {
  switch (kind) {
    case ShapeKind::Disc:
      return p.squaredNorm() < a * a;
    case ShapeKind::Rect:
      return std::abs(p.x()) < a / 2.0 && std::abs(p.y()) < b / 2.0;
    case ShapeKind::Ellip: {
      const double u = p.x() / a, v = p.y() / b;
      return u * u + v * v < 1.0;
    }
  }
  return false;
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Disc:
      return "disc";
    case ShapeKind::Rect:
      return "rect";
    case ShapeKind::Ellip:
      return "ellip";
  }
  return "disc";
}

ShapeKind shape_kind_from_string(const std::string& name) {
  if (name == "disc") return ShapeKind::Disc;
  if (name == "rect") return ShapeKind::Rect;
  if (name == "ellip") return ShapeKind::Ellip;
  throw std::invalid_argument("unknown shape kind: " + name);
}

namespace {

// Closest point on an axis-aligned ellipse boundary, first quadrant only
// (px, py >= 0). Safeguarded Newton on the stationarity condition
//   h(phi) = (a^2 - b^2) sin(phi) cos(phi) - px a sin(phi) + py b cos(phi)
// which has h(0) >= 0, h(pi/2) <= 0 and a unique root for interior queries.
Eigen::Vector2d ellipse_closest_quadrant(double a, double b, double px,
                                         double py) {
  if (px == 0.0 && py == 0.0) return a < b ? Eigen::Vector2d(a, 0.0)
                                           : Eigen::Vector2d(0.0, b);
  const double d = a * a - b * b;
  if (py == 0.0) {
    // Candidates: the (a, 0) vertex and, inside the evolute, the foot point.
    Eigen::Vector2d best(a, 0.0);
    double best_d2 = (px - a) * (px - a);
    if (d > 0.0) {
      const double t = a * px / d;
      if (t < 1.0) {
        const Eigen::Vector2d q(a * t, b * std::sqrt(1.0 - t * t));
        const double d2 = (q - Eigen::Vector2d(px, 0.0)).squaredNorm();
        if (d2 < best_d2) best = q, best_d2 = d2;
      }
    }
    return best;
  }
  if (px == 0.0) {
    Eigen::Vector2d best(0.0, b);
    double best_d2 = (py - b) * (py - b);
    if (d < 0.0) {
      const double u = -b * py / d;
      if (u < 1.0) {
        const Eigen::Vector2d q(a * std::sqrt(1.0 - u * u), b * u);
        const double d2 = (q - Eigen::Vector2d(0.0, py)).squaredNorm();
        if (d2 < best_d2) best = q, best_d2 = d2;
      }
    }
    return best;
  }

  double lo = 0.0, hi = M_PI / 2.0;
  double phi = std::atan2(a * py, b * px);
  for (int it = 0; it < 40; ++it) {
    const double s = std::sin(phi), c = std::cos(phi);
    const double h = d * s * c - px * a * s + py * b * c;
    if (h > 0.0)
      lo = phi;
    else
      hi = phi;
    const double hp = d * (c * c - s * s) - px * a * c - py * b * s;
    double next = phi - h / hp;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
    if (std::abs(next - phi) < 1e-15) {
      phi = next;
      break;
    }
    phi = next;
  }
  return {a * std::cos(phi), b * std::sin(phi)};
}

}  // namespace

Eigen::Vector2d closest_boundary_point(const ShapeModel& shape,
                                       const Eigen::Vector2d& p) {
  switch (shape.kind) {
    case ShapeKind::Disc: {
      const double n = p.norm();
      if (n < 1e-15) return {shape.a, 0.0};
      return p * (shape.a / n);
    }
    case ShapeKind::Rect: {
      const Eigen::Vector2d h(shape.a / 2.0, shape.b / 2.0);
      const Eigen::Vector2d q = p.cwiseAbs() - h;
      Eigen::Vector2d cp;
      if (q.x() > 0.0 || q.y() > 0.0) {
        // Outside (or on an edge extension): clamp into the box.
        cp = p.cwiseMax(-h).cwiseMin(h);
      } else {
        // Inside: project to the nearest face.
        cp = p;
        if (q.x() > q.y())
          cp.x() = std::copysign(h.x(), p.x() == 0.0 ? 1.0 : p.x());
        else
          cp.y() = std::copysign(h.y(), p.y() == 0.0 ? 1.0 : p.y());
      }
      return cp;
    }
    case ShapeKind::Ellip: {
      const Eigen::Vector2d q = ellipse_closest_quadrant(
          shape.a, shape.b, std::abs(p.x()), std::abs(p.y()));
      return {std::copysign(q.x(), p.x() == 0.0 ? 1.0 : p.x()),
              std::copysign(q.y(), p.y() == 0.0 ? 1.0 : p.y())};
    }
  }
  return p;
}

double analytic_sdf(const ShapeModel& shape, const Eigen::Vector2d& p) {
  switch (shape.kind) {
    case ShapeKind::Disc:
      return p.norm() - shape.a;
    case ShapeKind::Rect: {
      const Eigen::Vector2d h(shape.a / 2.0, shape.b / 2.0);
      const Eigen::Vector2d q = p.cwiseAbs() - h;
      const double outside = q.cwiseMax(0.0).norm();
      const double inside = std::min(std::max(q.x(), q.y()), 0.0);
      return outside + inside;
    }
    case ShapeKind::Ellip: {
      const double dist = (p - closest_boundary_point(shape, p)).norm();
      return shape.contains(p) ? -dist : dist;
    }
  }
  return 0.0;
}

Eigen::Vector2d boundary_normal(const ShapeModel& shape,
                                const Eigen::Vector2d& p) {
  const Eigen::Vector2d cp = closest_boundary_point(shape, p);
  switch (shape.kind) {
    case ShapeKind::Disc:
      return cp.normalized();
    case ShapeKind::Rect: {
      const Eigen::Vector2d h(shape.a / 2.0, shape.b / 2.0);
      const double ex = std::abs(std::abs(cp.x()) - h.x());
      const double ey = std::abs(std::abs(cp.y()) - h.y());
      const bool on_x_face = ex < 1e-12;
      const bool on_y_face = ey < 1e-12;
      if (on_x_face && on_y_face) {
        // Corner: bisector direction.
        return Eigen::Vector2d(std::copysign(1.0, cp.x()),
                               std::copysign(1.0, cp.y()))
            .normalized();
      }
      if (on_x_face) return {std::copysign(1.0, cp.x()), 0.0};
      return {0.0, std::copysign(1.0, cp.y())};
    }
    case ShapeKind::Ellip:
      return Eigen::Vector2d(cp.x() / (shape.a * shape.a),
                             cp.y() / (shape.b * shape.b))
          .normalized();
  }
  return {1.0, 0.0};
}

SdfGrid::SdfGrid(Eigen::Vector2d origin, double resolution, int nx, int ny,
                 std::vector<double> values)
    : origin_(std::move(origin)),
      resolution_(resolution),
      nx_(nx),
      ny_(ny),
      values_(std::move(values)) {
  if (resolution_ <= 0.0 || nx_ < 2 || ny_ < 2 ||
      values_.size() != static_cast<size_t>(nx_) * static_cast<size_t>(ny_))
    throw std::invalid_argument("SdfGrid: inconsistent dimensions");
}

Eigen::Vector2d SdfGrid::clamp_query(const Eigen::Vector2d& p,
                                     bool& clamped) const {
  const Eigen::Vector2d lo = origin_;
  const Eigen::Vector2d hi =
      origin_ + resolution_ * Eigen::Vector2d(nx_ - 1, ny_ - 1);
  Eigen::Vector2d q = p.cwiseMax(lo).cwiseMin(hi);
  clamped = (q - p).norm() > 0.0;
  return q;
}

double SdfGrid::interpolate(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d g = (p - origin_) / resolution_;
  int ix = static_cast<int>(std::floor(g.x()));
  int iy = static_cast<int>(std::floor(g.y()));
  ix = std::clamp(ix, 0, nx_ - 2);
  iy = std::clamp(iy, 0, ny_ - 2);
  const double fx = std::clamp(g.x() - ix, 0.0, 1.0);
  const double fy = std::clamp(g.y() - iy, 0.0, 1.0);
  const double v00 = at(ix, iy), v10 = at(ix + 1, iy);
  const double v01 = at(ix, iy + 1), v11 = at(ix + 1, iy + 1);
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
         fy * ((1.0 - fx) * v01 + fx * v11);
}

SdfLookup SdfGrid::lookup_interpolant(const Eigen::Vector2d& p) const {
  SdfLookup out;
  const Eigen::Vector2d q = clamp_query(p, out.out_of_bounds);
  const Eigen::Vector2d g = (q - origin_) / resolution_;
  int ix = static_cast<int>(std::floor(g.x()));
  int iy = static_cast<int>(std::floor(g.y()));
  ix = std::clamp(ix, 0, nx_ - 2);
  iy = std::clamp(iy, 0, ny_ - 2);
  const double fx = std::clamp(g.x() - ix, 0.0, 1.0);
  const double fy = std::clamp(g.y() - iy, 0.0, 1.0);
  const double v00 = at(ix, iy), v10 = at(ix + 1, iy);
  const double v01 = at(ix, iy + 1), v11 = at(ix + 1, iy + 1);
  out.distance = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
                 fy * ((1.0 - fx) * v01 + fx * v11);
  out.gradient.x() =
      ((1.0 - fy) * (v10 - v00) + fy * (v11 - v01)) / resolution_;
  out.gradient.y() =
      ((1.0 - fx) * (v01 - v00) + fx * (v11 - v10)) / resolution_;
  return out;
}

SdfLookup SdfGrid::lookup(const Eigen::Vector2d& p) const {
  SdfLookup out;
  Eigen::Vector2d q = clamp_query(p, out.out_of_bounds);
  out.distance = interpolate(q);
  const double h = resolution_;
  out.gradient.x() =
      (interpolate(q + Eigen::Vector2d(h, 0)) - interpolate(q - Eigen::Vector2d(h, 0))) /
      (2.0 * h);
  out.gradient.y() =
      (interpolate(q + Eigen::Vector2d(0, h)) - interpolate(q - Eigen::Vector2d(0, h))) /
      (2.0 * h);
  return out;
}

SdfGrid build_sdf(const ShapeModel& shape, double resolution) {
  if (resolution <= 0.0)
    throw std::invalid_argument("build_sdf: resolution must be positive");
  // Extent 2.5x the shape bounding box, symmetric, with a cell center at the
  // object frame origin.
  const Eigen::Vector2d half = 2.5 * shape.half_extent();
  const int mx = static_cast<int>(std::ceil(half.x() / resolution));
  const int my = static_cast<int>(std::ceil(half.y() / resolution));
  const int nx = 2 * mx + 1, ny = 2 * my + 1;
  const Eigen::Vector2d origin(-mx * resolution, -my * resolution);
  std::vector<double> values(static_cast<size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      const Eigen::Vector2d p = origin + resolution * Eigen::Vector2d(ix, iy);
      values[static_cast<size_t>(iy) * nx + ix] = analytic_sdf(shape, p);
    }
  return SdfGrid(origin, resolution, nx, ny, std::move(values));
}

}  // namespace pushtrack
