#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crustplan/pose.hpp"

namespace crustplan {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class JointType { Prismatic, Revolute };

struct Joint {
  std::string name;
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();          // unit, in the joint's local frame
  Pose parent_transform;              // fixed transform from parent frame
  double pos_min = 0, pos_max = 0;    // rad or m
  double torque_min = 0, torque_max = 0;  // N*m or N
};

using Configuration = Eigen::VectorXd;
using JacobianMatrix = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Serial chain of a mobile manipulator. By convention the first
/// `base_joint_count` joints are the mobile base (x translation, y
/// translation, yaw), the rest the arm.
struct KinematicModel {
  std::string name;
  std::vector<Joint> joints;
  int base_joint_count = 3;
  Vec3 base_pivot = Vec3::Zero();     // in the frame after the base joints
  double delta_theta_x = 0;           // base compliance angles, radians
  double delta_theta_y = 0;
  Pose tcp_offset;                    // from the last joint frame
  double payload_force = 0;           // N, max hand force magnitude
  std::string hand_mesh_path;         // optional, for grasp collision checks

  int dof() const { return static_cast<int>(joints.size()); }
  /// Conservative arm reach: pivot-to-TCP distance upper bound over the arm
  /// joints (sum of link offsets plus prismatic ranges).
  double max_arm_reach() const;

  void validate() const;
};

KinematicModel load_robot_model(const std::string& path);

/// TCP pose in the world frame.
Pose fk(const KinematicModel& model, const Configuration& q);

/// Geometric Jacobian at the TCP, world frame, linear rows on top.
JacobianMatrix jacobian(const KinematicModel& model, const Configuration& q);

struct IkOptions {
  int restarts = 200;
  int iterations = 100;
  double damping = 0.05;
  uint64_t seed = 0xC0FFEE;
};

/// Damped-least-squares IK with random restarts inside the joint limits.
/// Returns nullopt when no configuration meets both tolerances within the
/// iteration budget (signals an unreachable pose).
std::optional<Configuration> ik_solve(const KinematicModel& model, const Pose& target,
                                      const Configuration& seed, double eps_p, double eps_r,
                                      const IkOptions& opts = {});

/// World position of the base compliance pivot at configuration q.
Vec3 base_pivot_world(const KinematicModel& model, const Configuration& q);

/// Compliance-derived crust thickness: L(q) * tan(max compliance angle) with
/// L the pivot-to-TCP distance. Zero when the caller's reach test failed.
double crust_thickness(const KinematicModel& model, const Configuration& q,
                       bool within_reach = true);

}  // namespace crustplan
