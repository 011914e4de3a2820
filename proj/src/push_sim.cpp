#include "pushtrack/push_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "pushtrack/rng.hpp"

namespace pushtrack {

std::string to_string(PressureModel m) {
  return m == PressureModel::Uniform ? "uniform" : "corner_concentrated";
}

PressureModel pressure_model_from_string(const std::string& name) {
  if (name == "uniform") return PressureModel::Uniform;
  if (name == "corner_concentrated") return PressureModel::CornerConcentrated;
  throw std::invalid_argument("unknown pressure model: " + name);
}

std::string to_string(ContactClass c) {
  switch (c) {
    case ContactClass::Disc:
      return "disc";
    case ContactClass::Ellip:
      return "ellip";
    case ContactClass::RectCorners:
      return "rect-corners";
    case ContactClass::RectEdges:
      return "rect-edges";
  }
  return "disc";
}

namespace {

struct GaussLegendre {
  std::vector<double> x, w;
};

GaussLegendre gauss_legendre(int n) {
  GaussLegendre g;
  g.x.resize(n);
  g.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    g.x[i] = x;
    g.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return g;
}

template <typename F>
double integrate(F f, double lo, double hi, const GaussLegendre& gl) {
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (size_t i = 0; i < gl.x.size(); ++i) sum += gl.w[i] * f(mid + half * gl.x[i]);
  return sum * half;
}

const GaussLegendre& gl64() {
  static const GaussLegendre g = gauss_legendre(64);
  return g;
}

Eigen::Matrix3d limit_surface_matrix(const Eigen::Vector2d& q, double c) {
  Eigen::Matrix3d d;
  d << 1.0, 0.0, -q.y(),  //
      0.0, 1.0, q.x(),    //
      -q.y(), q.x(), -c * c;
  return d;
}

}  // namespace

double compute_c(const ShapeModel& shape, PressureModel pressure_model) {
  const double a = shape.a, b = shape.b;
  if (pressure_model == PressureModel::Uniform) {
    switch (shape.kind) {
      case ShapeKind::Disc:
        return 2.0 * a / 3.0;
      case ShapeKind::Ellip: {
        // (1/A) int ||r|| dA reduces to a boundary-angle integral.
        const double i = integrate(
            [&](double t) {
              const double ct = std::cos(t), st = std::sin(t);
              return std::sqrt(a * a * ct * ct + b * b * st * st);
            },
            0.0, M_PI / 2.0, gl64());
        return 4.0 * i / (3.0 * M_PI);
      }
      case ShapeKind::Rect: {
        const double hx = a / 2.0, hy = b / 2.0;
        const double split = std::atan2(hy, hx);
        const double i1 = integrate(
            [&](double t) { return std::pow(hx / std::cos(t), 3.0); }, 0.0,
            split, gl64());
        const double i2 = integrate(
            [&](double t) { return std::pow(hy / std::sin(t), 3.0); }, split,
            M_PI / 2.0, gl64());
        return (i1 + i2) / (3.0 * hx * hy);
      }
    }
  } else {
    switch (shape.kind) {
      case ShapeKind::Disc:
        return a;
      case ShapeKind::Rect:
        // Equal point masses at the four corners.
        return 0.5 * std::hypot(a, b);
      case ShapeKind::Ellip: {
        // Pressure concentrated on the rim.
        const double num = integrate(
            [&](double t) {
              const double ct = std::cos(t), st = std::sin(t);
              const double r = std::sqrt(a * a * ct * ct + b * b * st * st);
              const double ds = std::sqrt(a * a * st * st + b * b * ct * ct);
              return r * ds;
            },
            0.0, M_PI / 2.0, gl64());
        const double den = integrate(
            [&](double t) {
              const double ct = std::cos(t), st = std::sin(t);
              return std::sqrt(a * a * st * st + b * b * ct * ct);
            },
            0.0, M_PI / 2.0, gl64());
        return num / den;
      }
    }
  }
  return 2.0 * a / 3.0;
}

Twist2 qs_step(const Pose2& object, const Eigen::Vector2d& contact_point,
               const Eigen::Vector2d& pusher_velocity, const PushParams& params) {
  const Eigen::Vector2d q = transform_to(object, contact_point);
  if (params.c * params.c + q.squaredNorm() < 1e-12)
    throw std::invalid_argument("qs_step: degenerate contact geometry (singular D)");
  const Eigen::Vector2d vp = rotation2(-object.theta) * pusher_velocity;
  const Eigen::Matrix3d d = limit_surface_matrix(q, params.c);
  const Eigen::Vector3d v = d.partialPivLu().solve(Eigen::Vector3d(vp.x(), vp.y(), 0.0));
  return {v.x(), v.y(), v.z()};
}

SurfacePatch surface_patch(const ShapeModel& shape, const Eigen::Vector2d& p_obj) {
  SurfacePatch patch;
  patch.point = closest_boundary_point(shape, p_obj);
  patch.normal = boundary_normal(shape, p_obj);
  switch (shape.kind) {
    case ShapeKind::Disc:
      patch.curvature = 1.0 / shape.a;
      patch.tangent_angle =
          std::atan2(patch.normal.y(), patch.normal.x()) + M_PI / 2.0;
      break;
    case ShapeKind::Rect: {
      const double hx = shape.a / 2.0, hy = shape.b / 2.0;
      const bool corner = std::abs(std::abs(patch.point.x()) - hx) < 1e-9 &&
                          std::abs(std::abs(patch.point.y()) - hy) < 1e-9;
      patch.is_corner = corner;
      patch.curvature = 0.0;
      if (corner) {
        // Wedge patch oriented along the corner bisector.
        patch.tangent_angle = std::atan2(patch.normal.y(), patch.normal.x());
      } else if (std::abs(std::abs(patch.point.x()) - hx) < 1e-9) {
        patch.tangent_angle = M_PI / 2.0;  // vertical edge
      } else {
        patch.tangent_angle = 0.0;
      }
      break;
    }
    case ShapeKind::Ellip: {
      const double phi =
          std::atan2(patch.point.y() / shape.b, patch.point.x() / shape.a);
      const double a = shape.a, b = shape.b;
      const double s = std::sin(phi), c = std::cos(phi);
      patch.curvature =
          a * b / std::pow(a * a * s * s + b * b * c * c, 1.5);
      patch.tangent_angle = std::atan2(b * c, -a * s);
      break;
    }
  }
  return patch;
}

std::optional<ContactClass> PushSequence::class_at(int t) const {
  if (t < 0 || t >= num_steps()) return std::nullopt;
  const int ep = steps[t].episode;
  if (ep < 0 || ep >= static_cast<int>(episodes.size())) return std::nullopt;
  return episodes[ep].label;
}

namespace {

// One sticking contact step: given the previous object pose, the previous
// pusher tip (on the surface) and the commanded new tip position, finds the
// object pose and projected tip satisfying the discrete D V = V_p relation
// and the on-surface constraint simultaneously.
struct ContactStep {
  Pose2 object;
  Eigen::Vector2d tip;
  Twist2 twist;
};

ContactStep solve_contact_step(const Pose2& o_prev, const Eigen::Vector2d& e_prev,
                               const Eigen::Vector2d& e_cmd,
                               const PushParams& prm) {
  Pose2 o = o_prev;
  Eigen::Vector2d e = e_cmd;
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector2d cp =
        closest_boundary_point(prm.shape, transform_to(o, e));
    const Eigen::Vector2d e_proj = transform_from(o, cp);
    const Eigen::Vector2d u = (e_proj - e_prev) / prm.dt;
    const Eigen::Vector2d vp = rotation2(-o.theta) * u;
    const Eigen::Matrix3d d = limit_surface_matrix(cp, prm.c);
    v = d.partialPivLu().solve(Eigen::Vector3d(vp.x(), vp.y(), 0.0));
    const double theta_new = wrap_angle(o_prev.theta + prm.dt * v.z());
    const Eigen::Vector2d dxy =
        rotation2(theta_new) * Eigen::Vector2d(v.x(), v.y()) * prm.dt;
    const Pose2 o_new(o_prev.x + dxy.x(), o_prev.y + dxy.y(), theta_new);
    const double change = std::abs(o_new.x - o.x) + std::abs(o_new.y - o.y) +
                          std::abs(wrap_angle(o_new.theta - o.theta)) +
                          (e_proj - e).norm();
    o = o_new;
    e = e_proj;
    if (change < 1e-15) break;
  }
  return {o, e, {v.x(), v.y(), v.z()}};
}

Eigen::Vector2d site_point(const ShapeModel& shape, const EpisodeSpec& ep) {
  switch (shape.kind) {
    case ShapeKind::Disc:
      return shape.a * Eigen::Vector2d(std::cos(ep.site_angle), std::sin(ep.site_angle));
    case ShapeKind::Ellip:
      return {shape.a * std::cos(ep.site_angle), shape.b * std::sin(ep.site_angle)};
    case ShapeKind::Rect: {
      const double hx = shape.a / 2.0, hy = shape.b / 2.0;
      if (ep.rect_corner) {
        switch (ep.rect_corner_index & 3) {
          case 0: return {hx, hy};
          case 1: return {-hx, hy};
          case 2: return {-hx, -hy};
          default: return {hx, -hy};
        }
      }
      const double f = 2.0 * ep.rect_fraction - 1.0;  // [-1, 1] along the edge
      switch (ep.rect_edge & 3) {
        case 0: return {hx, f * hy};
        case 1: return {f * hx, hy};
        case 2: return {-hx, f * hy};
        default: return {f * hx, -hy};
      }
    }
  }
  return Eigen::Vector2d::Zero();
}

}  // namespace

PushSequence simulate_sequence(const TrajectorySpec& spec, const PushParams& params,
                               const NoiseSpec& noise, uint64_t seed) {
  if (params.dt <= 0.0 || params.c <= 0.0)
    throw std::invalid_argument("simulate_sequence: invalid push params");

  PushSequence seq;
  seq.shape = params.shape;
  seq.params = params;
  seq.noise = noise;
  seq.seed = seed;
  seq.spec = spec;

  Rng rng(Rng::derive(seed, 0xEFF));
  const double dt = params.dt;
  const int total = spec.total_steps;

  Pose2 o;  // object starts at the origin
  Eigen::Vector2d e_pos = Eigen::Vector2d::Zero();
  double e_theta = 0.0;
  int t = 0;
  int run = -1;  // current contact episode index

  auto emit = [&](bool in_contact, const Eigen::Vector2d& normal_world) {
    StepRecord rec;
    rec.t = t;
    rec.time = t * dt;
    rec.object_pose_gt = o;
    rec.effector_pose_gt = Pose2(e_pos.x(), e_pos.y(), e_theta);
    const Eigen::Vector3d eta(rng.normal(0.0, noise.sigma_xy),
                              rng.normal(0.0, noise.sigma_xy),
                              rng.normal(0.0, noise.sigma_theta));
    rec.effector_pose_noisy = boxplus(rec.effector_pose_gt, eta);
    rec.contact.in_contact = in_contact;
    if (in_contact) {
      rec.contact.contact_point = e_pos;
      rec.contact.surface_normal = normal_world;
    }
    rec.episode = in_contact ? run : -1;
    rec.tactile_frame_id = t;
    if (e_pos.norm() > 0.8 || rec.object_pose_gt.translation().norm() > 0.8)
      throw std::runtime_error("simulate_sequence: trajectory left the workspace");
    seq.steps.push_back(rec);
    ++t;
  };

  auto world_normal = [&]() {
    const SurfacePatch patch = surface_patch(params.shape, transform_to(o, e_pos));
    return Eigen::Vector2d(rotation2(o.theta) * patch.normal);
  };

  for (size_t ei = 0; ei < spec.episodes.size() && t < total; ++ei) {
    const EpisodeSpec& ep = spec.episodes[ei];
    // Plan against the current (stationary) object pose.
    const Eigen::Vector2d target_obj = site_point(params.shape, ep);
    const SurfacePatch patch0 = surface_patch(params.shape, target_obj);
    const Eigen::Vector2d target_w = transform_from(o, patch0.point);
    const Eigen::Vector2d n_w = rotation2(o.theta) * patch0.normal;
    const Eigen::Vector2d standoff =
        target_w + n_w * (ep.approach_steps * ep.speed * dt);

    if (t == 0) {
      e_pos = standoff;
      e_theta = std::atan2(-n_w.y(), -n_w.x());
      emit(false, n_w);
    } else {
      // Transit to the standoff point in free space.
      e_theta = std::atan2(-n_w.y(), -n_w.x());
      while (t < total && (standoff - e_pos).norm() > spec.transit_speed * dt) {
        e_pos += (standoff - e_pos).normalized() * spec.transit_speed * dt;
        emit(false, n_w);
      }
      if (t < total) {
        e_pos = standoff;
        emit(false, n_w);
      }
    }

    // Approach along the inward normal until the tip crosses the boundary.
    bool contacted = false;
    while (t < total && !contacted) {
      const Eigen::Vector2d proposed = e_pos - n_w * ep.speed * dt;
      if (analytic_sdf(params.shape, transform_to(o, proposed)) <= 0.0) {
        e_pos = transform_from(
            o, closest_boundary_point(params.shape, transform_to(o, proposed)));
        contacted = true;
        ++run;
        emit(true, world_normal());
      } else {
        e_pos = proposed;
        emit(false, n_w);
      }
    }
    if (!contacted) break;

    // Push.
    for (int i = 0; i < ep.push_steps && t < total; ++i) {
      const SurfacePatch patch = surface_patch(params.shape, transform_to(o, e_pos));
      const Eigen::Vector2d n_cur = rotation2(o.theta) * patch.normal;
      const double offset = ep.offset_angle + ep.offset_rate * i;
      const Eigen::Vector2d dir = rotation2(offset) * (-n_cur);
      const Eigen::Vector2d e_cmd = e_pos + dir * ep.speed * dt;
      const ContactStep step = solve_contact_step(o, e_pos, e_cmd, params);
      o = step.object;
      e_pos = step.tip;
      emit(true, world_normal());
    }

    // Retract: the contact flag persists for the first separating step
    // (2-step hysteresis), with the tip held on the surface; afterwards the
    // tip moves away freely.
    const Eigen::Vector2d n_out = world_normal();
    for (int i = 0; i < ep.retract_steps && t < total; ++i) {
      if (i == 0) {
        emit(true, n_out);  // commanded separation, still touching
      } else {
        e_pos += n_out * ep.speed * dt;
        emit(false, n_out);
      }
    }
  }

  // Idle out the remaining steps.
  while (t < total) emit(false, Eigen::Vector2d::UnitX());

  // Collect maximal in-contact runs, labeled from the executed episodes.
  int idx = -1;
  for (int s = 0; s < seq.num_steps(); ++s) {
    if (!seq.steps[s].contact.in_contact) continue;
    if (seq.steps[s].episode != idx) {
      idx = seq.steps[s].episode;
      ContactEpisode run_info;
      run_info.start = s;
      run_info.end = s;
      switch (params.shape.kind) {
        case ShapeKind::Disc:
          run_info.label = ContactClass::Disc;
          break;
        case ShapeKind::Ellip:
          run_info.label = ContactClass::Ellip;
          break;
        case ShapeKind::Rect:
          run_info.label = spec.episodes[idx].rect_corner
                               ? ContactClass::RectCorners
                               : ContactClass::RectEdges;
          break;
      }
      seq.episodes.push_back(run_info);
    }
    seq.episodes.back().end = s;
  }
  return seq;
}

double max_qs_residual(const PushSequence& seq) {
  double worst = 0.0;
  const double dt = seq.params.dt;
  for (int t = 1; t < seq.num_steps(); ++t) {
    const StepRecord& prev = seq.steps[t - 1];
    const StepRecord& cur = seq.steps[t];
    if (!prev.contact.in_contact || !cur.contact.in_contact) continue;
    if (prev.episode != cur.episode) continue;
    const Pose2& o1 = cur.object_pose_gt;
    const Pose2& o0 = prev.object_pose_gt;
    const Eigen::Matrix2d rot = rotation2(-o1.theta);
    const Eigen::Vector2d vlin =
        rot * Eigen::Vector2d(o1.x - o0.x, o1.y - o0.y) / dt;
    const Eigen::Vector3d v(vlin.x(), vlin.y(), wrap_angle(o1.theta - o0.theta) / dt);
    const Eigen::Vector2d ulin =
        rot * Eigen::Vector2d(cur.effector_pose_gt.x - prev.effector_pose_gt.x,
                              cur.effector_pose_gt.y - prev.effector_pose_gt.y) /
        dt;
    const Eigen::Vector3d vp(ulin.x(), ulin.y(), 0.0);
    const Eigen::Vector2d q =
        transform_to(o1, cur.effector_pose_gt.translation());
    const Eigen::Vector3d r = limit_surface_matrix(q, seq.params.c) * v - vp;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace {

constexpr double deg = M_PI / 180.0;

TrajectorySpec random_spec(const ShapeModel& shape, Rng& rng) {
  TrajectorySpec spec;
  const int n_ep = rng.bernoulli(0.5) ? 2 : 3;
  for (int i = 0; i < n_ep; ++i) {
    EpisodeSpec ep;
    if (shape.kind == ShapeKind::Rect) {
      ep.rect_corner = rng.bernoulli(0.5);
      ep.rect_corner_index = static_cast<int>(rng.uniform_int(4));
      ep.rect_edge = static_cast<int>(rng.uniform_int(4));
      ep.rect_fraction = rng.uniform(0.25, 0.75);
    } else {
      ep.site_angle = rng.uniform(0.0, 2.0 * M_PI);
    }
    ep.speed = rng.uniform(0.010, 0.030);
    const bool aggressive = rng.bernoulli(0.5);
    const double base =
        aggressive ? rng.uniform(8.0, 16.0) * deg : rng.uniform(0.0, 4.0) * deg;
    ep.offset_angle = rng.bernoulli(0.5) ? base : -base;
    const bool curved = rng.bernoulli(0.5);
    ep.push_steps = 85 + static_cast<int>(rng.uniform_int(50));
    if (i + 1 == n_ep) ep.push_steps = 200;  // last push runs out the clock
    const double drift = curved ? rng.uniform(2.0, 7.0) * deg : 0.0;
    ep.offset_rate = (rng.bernoulli(0.5) ? drift : -drift) / ep.push_steps;
    ep.approach_steps = (i == 0 ? 15 : 10) + static_cast<int>(rng.uniform_int(6));
    ep.retract_steps = 8;
    spec.episodes.push_back(ep);
  }
  return spec;
}

bool sticking_cone_ok(const PushSequence& seq, double mu) {
  const double cone = std::atan(mu);
  const double dt = seq.params.dt;
  for (int t = 1; t < seq.num_steps(); ++t) {
    const StepRecord& prev = seq.steps[t - 1];
    const StepRecord& cur = seq.steps[t];
    if (!prev.contact.in_contact || !cur.contact.in_contact) continue;
    if (prev.episode != cur.episode) continue;
    const Pose2& o1 = cur.object_pose_gt;
    const Pose2& o0 = prev.object_pose_gt;
    const Eigen::Vector2d vlin =
        rotation2(-o1.theta) * Eigen::Vector2d(o1.x - o0.x, o1.y - o0.y) / dt;
    if (vlin.norm() < 1e-9) continue;  // static hysteresis step
    const Eigen::Vector2d q = transform_to(o1, cur.effector_pose_gt.translation());
    const SurfacePatch patch = surface_patch(seq.shape, q);
    const double limit = cone + (patch.is_corner ? M_PI / 4.0 : 0.0) + 1e-6;
    const double cosang =
        vlin.normalized().dot(-patch.normal);  // force direction ~ (vx, vy)
    if (std::acos(std::clamp(cosang, -1.0, 1.0)) > limit) return false;
  }
  return true;
}

bool sequence_valid(const PushSequence& seq, const TrajectorySpec& spec) {
  if (seq.episodes.size() != spec.episodes.size()) return false;
  if (seq.episodes.size() < 2 || seq.episodes.size() > 3) return false;
  // Last push must not be cut degenerately short by the step budget.
  const ContactEpisode& last = seq.episodes.back();
  if (last.end - last.start < 40) return false;
  if (max_qs_residual(seq) > 1e-9) return false;
  if (!sticking_cone_ok(seq, 0.5)) return false;
  return true;
}

}  // namespace

std::vector<PushSequence> generate_trial_set(const ShapeModel& shape, int n_sequences,
                                             uint64_t seed, const NoiseSpec& noise,
                                             PressureModel pressure) {
  PushParams params;
  params.shape = shape;
  params.pressure_model = pressure;
  params.c = compute_c(shape, pressure);
  std::vector<PushSequence> out;
  out.reserve(n_sequences);
  for (int i = 0; i < n_sequences; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
      const uint64_t sub = Rng::derive(Rng::derive(seed, i), attempt);
      Rng rng(sub);
      const TrajectorySpec spec = random_spec(shape, rng);
      try {
        PushSequence seq = simulate_sequence(spec, params, noise, sub);
        if (sequence_valid(seq, spec)) {
          out.push_back(std::move(seq));
          ok = true;
        }
      } catch (const std::runtime_error&) {
        // workspace violation: retry with the next derived seed
      }
    }
    if (!ok)
      throw std::runtime_error("generate_trial_set: no valid sequence after 64 attempts");
  }
  return out;
}

}  // namespace pushtrack
