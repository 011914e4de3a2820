#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pushtrack/sdf.hpp"
#include "pushtrack/se2.hpp"

namespace pushtrack {

enum class PressureModel : uint8_t { Uniform = 0, CornerConcentrated = 1 };

std::string to_string(PressureModel m);
PressureModel pressure_model_from_string(const std::string& name);

/// Contact-patch class conditioning the tactile observation model: one
/// cluster per local curvature regime.
enum class ContactClass : int {
  Disc = 0,
  Ellip = 1,
  RectCorners = 2,
  RectEdges = 3,
};
constexpr int kNumContactClasses = 4;

std::string to_string(ContactClass c);

struct PushParams {
  double c = 0.03;   // tau_max / f_max ratio of the limit surface, meters
  double dt = 1.0 / 30.0;
  ShapeModel shape;
  PressureModel pressure_model = PressureModel::Uniform;
};

/// tau_max / f_max for the given shape and pressure distribution: the mean
/// support-point distance under uniform pressure, or the corner/rim moment
/// ratio under concentrated pressure.
double compute_c(const ShapeModel& shape, PressureModel pressure_model);

struct ContactState {
  bool in_contact = false;
  Eigen::Vector2d contact_point = Eigen::Vector2d::Zero();   // world frame
  Eigen::Vector2d surface_normal = Eigen::Vector2d::UnitX(); // world, outward
};

/// Object twist (object frame) for a sticking push: solves D V = V_p with
/// the contact point expressed in the object frame. contact_point and
/// pusher_velocity are world-frame. Throws std::invalid_argument when D is
/// singular (degenerate contact geometry).
Twist2 qs_step(const Pose2& object, const Eigen::Vector2d& contact_point,
               const Eigen::Vector2d& pusher_velocity, const PushParams& params);

/// Local boundary geometry at a contact point given in the object frame.
struct SurfacePatch {
  Eigen::Vector2d point = Eigen::Vector2d::Zero();   // on the boundary
  Eigen::Vector2d normal = Eigen::Vector2d::UnitX(); // outward
  double tangent_angle = 0.0;  // axial direction of the boundary (corner: bisector)
  double curvature = 0.0;      // 1/m; corners report is_corner instead
  bool is_corner = false;
};

SurfacePatch surface_patch(const ShapeModel& shape, const Eigen::Vector2d& p_obj);

struct StepRecord {
  int t = 0;
  double time = 0.0;
  Pose2 object_pose_gt;
  Pose2 effector_pose_gt;
  Pose2 effector_pose_noisy;
  ContactState contact;
  int episode = -1;      // index into PushSequence::episodes, -1 when free
  int tactile_frame_id = -1;
};

struct ContactEpisode {
  int start = 0;  // first in-contact step
  int end = 0;    // last in-contact step (inclusive)
  ContactClass label = ContactClass::Disc;
};

/// Per-episode pusher plan. Sites are boundary parameters: angle for
/// disc/ellip; for rect either an edge (edge index + fraction along it) or a
/// corner index.
struct EpisodeSpec {
  double site_angle = 0.0;  // disc/ellip boundary angle
  int rect_edge = 0;        // 0..3, used when !rect_corner
  double rect_fraction = 0.5;
  bool rect_corner = false;
  int rect_corner_index = 0;
  double speed = 0.02;          // pushing speed, m/s
  double offset_angle = 0.0;    // command direction offset from inward normal
  double offset_rate = 0.0;     // rad per step, curvature of the push
  int approach_steps = 16;
  int push_steps = 110;
  int retract_steps = 8;
};

struct TrajectorySpec {
  std::vector<EpisodeSpec> episodes;
  int total_steps = 450;
  double transit_speed = 0.12;  // free-space repositioning speed, m/s
};

struct NoiseSpec {
  double sigma_xy = 1e-3;      // effector reading noise, m
  double sigma_theta = 1e-2;   // rad
};

struct PushSequence {
  ShapeModel shape;
  PushParams params;
  NoiseSpec noise;
  uint64_t seed = 0;
  TrajectorySpec spec;
  std::vector<ContactEpisode> episodes;
  std::vector<StepRecord> steps;

  int num_steps() const { return static_cast<int>(steps.size()); }
  /// Class label for a step, or nullopt when not inside an episode.
  std::optional<ContactClass> class_at(int t) const;
};

/// Integrates the sticking quasi-static dynamics along the pusher plan.
/// Contact is kept exactly on the surface by projecting the pusher tip each
/// step; a fixed-point iteration makes the recorded poses satisfy the
/// discrete D V = V_p relation to ~1e-12. Contact breaks after the commanded
/// velocity separates from the surface for 2 consecutive steps, and
/// re-establishes when the commanded tip crosses the boundary. Deterministic
/// given the seed. Throws std::runtime_error if the trajectory leaves the
/// workspace.
PushSequence simulate_sequence(const TrajectorySpec& spec, const PushParams& params,
                               const NoiseSpec& noise, uint64_t seed);

/// Generates n sequences with randomized straight/curved pushes, varied
/// contact sites and 2-3 contact episodes of 450 steps at 30 Hz. Sequences
/// failing the sticking-cone or episode-count checks are regenerated from a
/// derived seed.
std::vector<PushSequence> generate_trial_set(const ShapeModel& shape, int n_sequences,
                                             uint64_t seed,
                                             const NoiseSpec& noise = {},
                                             PressureModel pressure = PressureModel::Uniform);

/// Max |D V - V_p| over all in-contact transitions; the simulator's own
/// consistency diagnostic.
double max_qs_residual(const PushSequence& seq);

}  // namespace pushtrack
