#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "crustplan/contact.hpp"
#include "crustplan/kinematics.hpp"
#include "crustplan/quasistatics.hpp"

namespace crustplan {

struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Hand pose relative to the object; the hand follows the object rigidly
/// along the whole path.
struct GraspCandidate {
  std::string id;
  Pose hand_in_object;
};

std::vector<GraspCandidate> load_grasps(const std::string& path);

/// Crust thickness policy: either the compliance-derived pose-dependent
/// value or a fixed band.
struct ThicknessPolicy {
  bool dynamic = true;
  double fixed_value = 0;

  static ThicknessPolicy dynamic_policy() { return {true, 0}; }
  static ThicknessPolicy fixed(double value) { return {false, value}; }
};

struct PlannerParams {
  int max_iterations = 10000;
  int smoothing_iterations = 350;
  double max_time_s = 100.0;
  double goal_bias = 0.1;
  double translation_step = 0.05;   // m
  double rotation_step = 0.2;       // rad
  double rotation_sample_range = 0.5;  // rad, tilt range explored around the
                                       // start-goal rotation interpolation
  Vec3 rotation_sample_axis = Vec3::Zero();  // nonzero: tilt only about this
                                             // axis (world frame)
  double sample_margin_y = -1.0;  // >= 0 overrides the y sampling margin
  double goal_pos_tol = 0.01;       // m
  double goal_rot_tol = 0.0349066;  // rad, 2 deg
  double ik_pos_tol = 0.005;        // IK tolerances for the thickness estimate
  double ik_rot_tol = 0.0349066;
  double metric_rotation_weight = 1.0;  // meters per radian in the tree metric
  int cone_edges = 8;
  int max_contacts = 16;
  double contact_sample_spacing = 0.01;
  uint64_t seed = 1;
  ThicknessPolicy thickness;
};

struct PlanNode {
  Pose object_pose;
  Pose hand_pose;  // object_pose composed with the grasp offset, exactly
  HandForceSolution force;
  double thickness = 0;
  Configuration q;  // IK estimate realizing the hand pose (may be empty)
  int parent = -1;
};

struct ObjectPath {
  std::string grasp_id;
  Pose grasp_offset;
  std::vector<PlanNode> nodes;  // start to goal
};

enum class PlanOutcome { Success, Timeout, IterationsExhausted, InvalidEndpoint };

struct PlanStats {
  int iterations = 0;
  int tree_nodes = 0;
  int rejected_projection = 0;
  int rejected_ik = 0;
  int rejected_contact = 0;
  int rejected_force = 0;
  double elapsed_s = 0;
  double min_thickness = 0;  // observed over accepted nodes
  double max_thickness = 0;
};

struct PlanResult {
  PlanOutcome outcome = PlanOutcome::IterationsExhausted;
  ObjectPath path;  // valid only on Success
  PlanStats stats;
  std::string message;
};

/// Grasps that are collision-free (hand mesh vs environment) and IK-reachable
/// at both the start and the goal object pose. Input order is preserved.
std::vector<GraspCandidate> filter_grasps(const std::vector<GraspCandidate>& candidates,
                                          const TriMesh& object, const Pose& start,
                                          const Pose& goal, const KinematicModel& model,
                                          const Environment& environment, double eps_p,
                                          double eps_r);

/// Translate the pose along the separation direction until the object sits
/// inside the crust band (0, thickness]. Fails after `max_steps` corrections
/// or when no in-band pose is found.
std::optional<Pose> project_to_contact(const TriMesh& object, const Pose& pose,
                                       const Environment& environment, double thickness,
                                       int max_steps = 32);

struct ContactSample {
  Pose pose;
  double thickness = 0;
  Configuration q;
};

/// Steer from `current` toward `target` within the step bounds, then project
/// into the crust band. Dynamic policy re-estimates the thickness from an IK
/// solve at the projected hand pose, seeded from the parent configuration;
/// IK failure rejects the sample (out of the manipulator's operating range).
std::optional<ContactSample> sample_contact_pose(const TriMesh& object, const PlanNode& current,
                                                 const Pose& target, const PlannerParams& params,
                                                 const Environment& environment,
                                                 const KinematicModel& model,
                                                 const Pose& grasp_offset);

/// RRT over object poses. Every accepted node is inside the crust band and
/// certified by the minimum-hand-force solve; segment midpoints are checked
/// too. Shortcut smoothing re-validates everything it splices in.
PlanResult plan(const Environment& environment, const TriMesh& object,
                const GraspCandidate& grasp, const GravityLoad& load, const Pose& start,
                const Pose& goal, const KinematicModel& model, const PlannerParams& params);

struct PathViolation {
  int node = -1;       // index; midpoints report the lower endpoint
  bool midpoint = false;
  std::string what;
};

struct PathReport {
  bool ok = false;
  std::vector<PathViolation> violations;
};

/// Independent re-check of a path: classification and force solve at every
/// node and every segment midpoint, plus the exact hand-pose composition.
PathReport validate_path(const ObjectPath& path, const Environment& environment,
                         const TriMesh& object, const KinematicModel& model,
                         const GravityLoad& load, double f_max,
                         const PlannerParams& params = {});

std::string dump_path_json(const ObjectPath& path);
ObjectPath load_path_json(const std::string& text);

}  // namespace crustplan
