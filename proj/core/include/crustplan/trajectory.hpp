#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crustplan/planner.hpp"
#include "crustplan/quasistatics.hpp"

namespace crustplan {

/// One step of the per-pair minimum-motion problem: move from the current
/// configuration to one realizing the next hand pose, under joint limits,
/// torque limits from the planned hand force, and the base motion rule
/// (base x bounded, base y and yaw frozen).
struct StepProblem {
  Configuration q_current;
  Pose target_hand;
  Vec3 hand_force = Vec3::Zero();
  double eps_p = 0.005;     // m
  double eps_r = 0.0349066; // rad, 2 deg
  double base_step = 0.05;  // m, |delta base x| bound
};

struct StepOptions {
  int base_samples = 11;       // multi-start grid over base x
  int projection_iters = 120;  // damped least squares onto the pose constraint
  int descent_iters = 60;      // null-space displacement descent
  double damping = 0.05;
  double torque_margin = 0.7;  // penalty activates above this ratio
};

enum class StepFailureCause { PoseUnreachable, TorqueInfeasible };

struct StepOutcome {
  bool ok = false;
  Configuration q;
  double displacement = 0;  // ||q - q_current||
  StepFailureCause cause = StepFailureCause::PoseUnreachable;
  int binding_joint = -1;   // worst joint when torque infeasible
  std::string message;
};

StepOutcome optimize_step(const KinematicModel& model, const StepProblem& problem,
                          const StepOptions& opts = {});

struct TrajectoryStep {
  Configuration q;
  Eigen::VectorXd tau;
  std::vector<double> torque_ratios;
  double pos_error = 0;  // achieved TCP pose error against the path hand pose
  double rot_error = 0;
};

struct JointTrajectory {
  std::vector<TrajectoryStep> steps;  // aligned with the path nodes
};

struct TrajFailure {
  int step = -1;  // index of the path node that could not be reached
  StepFailureCause cause = StepFailureCause::PoseUnreachable;
  std::string message;
};

struct TrajectoryResult {
  bool ok = false;
  JointTrajectory trajectory;
  TrajFailure failure;
};

/// Chain optimize_step over every consecutive node pair of the path.
/// `q_init` must realize the first node's hand pose within the tolerances.
TrajectoryResult optimize_trajectory(const KinematicModel& model, const ObjectPath& path,
                                     const Configuration& q_init, double eps_p, double eps_r,
                                     double base_step, const StepOptions& opts = {});

/// Baseline: nearest-IK chaining with no torque and no base constraints.
/// Torques are reported, not enforced.
TrajectoryResult ik_only_trajectory(const KinematicModel& model, const ObjectPath& path,
                                    const Configuration& q_init, double eps_p, double eps_r);

struct TrajectoryViolation {
  int step = -1;
  std::string what;
};

struct TrajectoryReport {
  bool ok = false;
  double peak_torque_ratio = 0;
  std::vector<TrajectoryViolation> violations;
};

/// Independent re-check: FK against the path hand poses, joint limits,
/// J^T torques against the limits (optional), and the base motion rule
/// (optional, for the optimized variant).
TrajectoryReport validate_trajectory(const KinematicModel& model, const ObjectPath& path,
                                     const JointTrajectory& traj, double eps_p, double eps_r,
                                     double base_step, bool enforce_torques,
                                     bool enforce_base);

std::string dump_trajectory_json(const JointTrajectory& traj);
std::string dump_trajectory_csv(const JointTrajectory& traj);
JointTrajectory load_trajectory_json(const std::string& text);

}  // namespace crustplan
