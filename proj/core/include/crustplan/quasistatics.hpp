#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crustplan/contact.hpp"
#include "crustplan/kinematics.hpp"

namespace crustplan {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Linearized friction cones: per contact, m unit edge vectors obtained by
/// tilting the normal by atan(mu) around evenly spaced tangents.
struct FrictionConeBasis {
  std::vector<std::vector<Vec3>> edges;  // [contact][edge]
  int edges_per_contact = 0;
};

struct GravityLoad {
  double mass = 0;                // kg, > 0
  double g = 9.80665;             // m/s^2
  Vec3 com = Vec3::Zero();        // center of mass, object frame
};

struct HandForceSolution {
  Vec3 hand_force = Vec3::Zero();     // N, world frame
  Eigen::VectorXd lambda;             // contact edge coefficients, >= 0
  double force_residual = 0;          // N
  double torque_residual = 0;         // N*m
  bool balanced = false;              // a force/torque balance exists
  bool feasible = false;              // balanced and ||F_h|| <= F_max
};

FrictionConeBasis build_cones(const ContactSet& contacts, int edges_per_contact = 8);

/// Minimum-norm hand force balancing gravity against the contact supports:
///   min ||F_h||^2  s.t.  sum F_s + F_h + G = 0,
///                        sum r_s x F_s + r_h x F_h + r_g x G = 0,
///                        F_s in the linearized cones.
/// `grasp_point` and the contact set share the world frame; `com_world` is
/// the gravity application point in world frame. The minimizer is reported
/// even when the payload cap or the balance itself fails.
HandForceSolution solve_min_hand_force(const ContactSet& contacts,
                                       const FrictionConeBasis& cones,
                                       const GravityLoad& load, const Vec3& com_world,
                                       const Vec3& grasp_point, double f_max);

/// tau = J^T (F_h; 0): pure hand force, no hand moment.
Eigen::VectorXd joint_torques(const JacobianMatrix& jac, const Vec3& hand_force);

struct TorqueReport {
  bool within_limits = false;
  std::vector<double> ratios;  // per joint, |tau| over the binding limit
  int worst_joint = -1;
  double worst_ratio = 0;
};

TorqueReport torque_within_limits(const KinematicModel& model, const Eigen::VectorXd& tau);

/// JSON record of one solve, for offline debugging.
std::string dump_solve_json(const ContactSet& contacts, const FrictionConeBasis& cones,
                            const GravityLoad& load, const Vec3& grasp_point,
                            const HandForceSolution& solution);

}  // namespace crustplan
