#include "crustplan/trajectory.hpp"

#include <sstream>

#include <json.hpp>

namespace crustplan {

namespace {

// 6-vector pose error (linear on top, rotation log below), target relative to
// the TCP pose at q.
Eigen::Matrix<double, 6, 1> pose_error(const Pose& tcp, const Pose& target) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.translation - tcp.translation;
  e.tail<3>() = rotation_log(target.rotation * tcp.rotation.transpose());
  return e;
}

bool within_pose_tol(const Pose& tcp, const Pose& target, double eps_p, double eps_r) {
  return (target.translation - tcp.translation).norm() <= eps_p &&
         rotation_angle(target.rotation, tcp.rotation) <= eps_r;
}

void clamp_limits(const KinematicModel& model, Configuration& q) {
  for (int k = 0; k < model.dof(); ++k) {
    q[k] = std::clamp(q[k], model.joints[k].pos_min, model.joints[k].pos_max);
  }
}

std::vector<double> torque_ratios(const KinematicModel& model, const Eigen::VectorXd& tau) {
  return torque_within_limits(model, tau).ratios;
}

// Damped least squares on the free joint subset; returns true when the pose
// tolerance is met.
bool project_pose(const KinematicModel& model, Configuration& q, const std::vector<int>& free,
                  const Pose& target, double eps_p, double eps_r, int iters, double damping) {
  for (int it = 0; it < iters; ++it) {
    Pose tcp = fk(model, q);
    if (within_pose_tol(tcp, target, 0.8 * eps_p, 0.8 * eps_r)) return true;
    auto e = pose_error(tcp, target);
    JacobianMatrix full = jacobian(model, q);
    Eigen::MatrixXd jf(6, free.size());
    for (size_t i = 0; i < free.size(); ++i) jf.col(i) = full.col(free[i]);
    Eigen::MatrixXd jjt = jf * jf.transpose() +
                          damping * damping * Eigen::MatrixXd::Identity(6, 6);
    Eigen::VectorXd dq = jf.transpose() * jjt.ldlt().solve(e);
    double m = dq.cwiseAbs().maxCoeff();
    if (m > 0.5) dq *= 0.5 / m;
    for (size_t i = 0; i < free.size(); ++i) q[free[i]] += dq[i];
    clamp_limits(model, q);
  }
  return within_pose_tol(fk(model, q), target, eps_p, eps_r);
}

double torque_penalty(const KinematicModel& model, const Configuration& q, const Vec3& force,
                      double margin) {
  Eigen::VectorXd tau = joint_torques(jacobian(model, q), force);
  double p = 0;
  for (double r : torque_ratios(model, tau)) {
    double over = r - margin;
    if (over > 0) p += over * over;
  }
  return p;
}

}  // namespace

StepOutcome optimize_step(const KinematicModel& model, const StepProblem& problem,
                          const StepOptions& opts) {
  const int d = model.dof();
  if (problem.q_current.size() != d) {
    throw SolverError("optimize_step: configuration dimension mismatch");
  }
  const bool has_base = model.base_joint_count >= 3;

  std::vector<int> free;  // joints the step may move: base x plus the arm
  if (has_base) free.push_back(0);
  for (int k = has_base ? model.base_joint_count : 0; k < d; ++k) free.push_back(k);

  StepOutcome best;
  best.displacement = std::numeric_limits<double>::infinity();
  bool pose_reached_somewhere = false;
  double best_ratio = std::numeric_limits<double>::infinity();
  int best_ratio_joint = -1;
  bool base_blocked = false;
  struct Candidate {
    Configuration q;
    double displacement;
    double peak_ratio;
  };
  std::vector<Candidate> candidates;

  // sample -1 lets the projection move base x and arm jointly (the nearest
  // unconstrained solution); the rest grid base x and project the arm only
  const int samples = has_base ? std::max(1, opts.base_samples) : 1;
  for (int s = has_base ? -1 : 0; s < samples; ++s) {
    Configuration q = problem.q_current;
    if (s >= 0 && has_base && samples > 1) {
      double frac = samples == 1 ? 0.5 : static_cast<double>(s) / (samples - 1);
      double bx = problem.q_current[0] - problem.base_step + 2.0 * problem.base_step * frac;
      q[0] = std::clamp(bx, model.joints[0].pos_min, model.joints[0].pos_max);
    }

    std::vector<int> arm = free;
    if (s >= 0 && has_base) arm.erase(arm.begin());
    if (!project_pose(model, q, arm, problem.target_hand, problem.eps_p, problem.eps_r,
                      opts.projection_iters, opts.damping)) {
      continue;
    }
    pose_reached_somewhere = true;

    // null-space descent: shrink the displacement, penalize torque ratios
    // near the limit, stay on the pose constraint
    for (int it = 0; it < opts.descent_iters; ++it) {
      JacobianMatrix full = jacobian(model, q);
      Eigen::MatrixXd jf(6, arm.size());
      for (size_t i = 0; i < arm.size(); ++i) jf.col(i) = full.col(arm[i]);
      Eigen::MatrixXd jjt =
          jf * jf.transpose() + opts.damping * opts.damping * Eigen::MatrixXd::Identity(6, 6);
      Eigen::MatrixXd pinv = jf.transpose() * jjt.ldlt().solve(Eigen::MatrixXd::Identity(6, 6));
      Eigen::MatrixXd nullspace =
          Eigen::MatrixXd::Identity(arm.size(), arm.size()) - pinv * jf;

      Eigen::VectorXd g(arm.size());
      for (size_t i = 0; i < arm.size(); ++i) g[i] = q[arm[i]] - problem.q_current[arm[i]];
      // numeric torque-penalty gradient, only when the penalty is active
      double p0 = torque_penalty(model, q, problem.hand_force, opts.torque_margin);
      if (p0 > 0) {
        const double h = 1e-5;
        for (size_t i = 0; i < arm.size(); ++i) {
          Configuration qp = q;
          qp[arm[i]] += h;
          g[i] += 50.0 * (torque_penalty(model, qp, problem.hand_force, opts.torque_margin) -
                          p0) / h;
        }
      }
      Eigen::VectorXd dq = -0.5 * (nullspace * g);
      if (dq.norm() < 1e-10) break;
      for (size_t i = 0; i < arm.size(); ++i) q[arm[i]] += dq[i];
      clamp_limits(model, q);
      project_pose(model, q, arm, problem.target_hand, problem.eps_p, problem.eps_r, 10,
                   opts.damping);
    }

    if (!within_pose_tol(fk(model, q), problem.target_hand, problem.eps_p, problem.eps_r)) {
      continue;
    }
    if (has_base && std::abs(q[0] - problem.q_current[0]) > problem.base_step + 1e-12) {
      base_blocked = true;
      continue;
    }

    Eigen::VectorXd tau = joint_torques(jacobian(model, q), problem.hand_force);
    TorqueReport rep = torque_within_limits(model, tau);
    if (!rep.within_limits) {
      if (rep.worst_ratio < best_ratio) {
        best_ratio = rep.worst_ratio;
        best_ratio_joint = rep.worst_joint;
      }
      continue;
    }

    candidates.push_back({q, (q - problem.q_current).norm(), rep.worst_ratio});
  }

  if (!candidates.empty()) {
    // minimum displacement wins, but near-ties (within 5%) go to the
    // candidate with the lower peak torque ratio
    double min_disp = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) min_disp = std::min(min_disp, c.displacement);
    const Candidate* pick = nullptr;
    for (const auto& c : candidates) {
      if (c.displacement > 1.05 * min_disp + 1e-12) continue;
      if (!pick || c.peak_ratio < pick->peak_ratio ||
          (c.peak_ratio == pick->peak_ratio && c.displacement < pick->displacement)) {
        pick = &c;
      }
    }
    best.ok = true;
    best.q = pick->q;
    best.displacement = pick->displacement;
  }

  if (!best.ok) {
    if (!pose_reached_somewhere) {
      best.cause = StepFailureCause::PoseUnreachable;
      best.message = "target hand pose unreachable within tolerances";
    } else if (!std::isfinite(best_ratio)) {
      // every pose-reaching candidate needed more base travel than allowed
      best.cause = StepFailureCause::PoseUnreachable;
      best.message = base_blocked
                         ? "target hand pose unreachable within the base step bound"
                         : "target hand pose unreachable within tolerances";
    } else {
      best.cause = StepFailureCause::TorqueInfeasible;
      best.binding_joint = best_ratio_joint;
      std::ostringstream os;
      os << "torque limit exceeded, worst joint " << best_ratio_joint << " at ratio "
         << best_ratio;
      best.message = os.str();
    }
  }
  return best;
}

namespace {

TrajectoryStep make_step(const KinematicModel& model, const Configuration& q, const Vec3& force,
                         const Pose& target) {
  TrajectoryStep step;
  step.q = q;
  step.tau = joint_torques(jacobian(model, q), force);
  step.torque_ratios = torque_ratios(model, step.tau);
  Pose tcp = fk(model, q);
  step.pos_error = (target.translation - tcp.translation).norm();
  step.rot_error = rotation_angle(target.rotation, tcp.rotation);
  return step;
}

}  // namespace

TrajectoryResult optimize_trajectory(const KinematicModel& model, const ObjectPath& path,
                                     const Configuration& q_init, double eps_p, double eps_r,
                                     double base_step, const StepOptions& opts) {
  TrajectoryResult result;
  if (path.nodes.empty()) throw SolverError("optimize_trajectory: empty path");
  if (!within_pose_tol(fk(model, q_init), path.nodes[0].hand_pose, eps_p, eps_r)) {
    result.failure = {0, StepFailureCause::PoseUnreachable,
                      "q_init does not realize the first path node"};
    return result;
  }
  result.trajectory.steps.push_back(
      make_step(model, q_init, path.nodes[0].force.hand_force, path.nodes[0].hand_pose));

  Configuration q = q_init;
  for (size_t t = 1; t < path.nodes.size(); ++t) {
    StepProblem prob;
    prob.q_current = q;
    prob.target_hand = path.nodes[t].hand_pose;
    prob.hand_force = path.nodes[t].force.hand_force;
    prob.eps_p = eps_p;
    prob.eps_r = eps_r;
    prob.base_step = base_step;
    StepOutcome out = optimize_step(model, prob, opts);
    if (!out.ok) {
      result.failure = {static_cast<int>(t), out.cause, out.message};
      return result;
    }
    q = out.q;
    result.trajectory.steps.push_back(
        make_step(model, q, prob.hand_force, prob.target_hand));
  }
  result.ok = true;
  return result;
}

TrajectoryResult ik_only_trajectory(const KinematicModel& model, const ObjectPath& path,
                                    const Configuration& q_init, double eps_p, double eps_r) {
  TrajectoryResult result;
  if (path.nodes.empty()) throw SolverError("ik_only_trajectory: empty path");
  if (!within_pose_tol(fk(model, q_init), path.nodes[0].hand_pose, eps_p, eps_r)) {
    result.failure = {0, StepFailureCause::PoseUnreachable,
                      "q_init does not realize the first path node"};
    return result;
  }
  result.trajectory.steps.push_back(
      make_step(model, q_init, path.nodes[0].force.hand_force, path.nodes[0].hand_pose));

  IkOptions ik_opts;
  ik_opts.restarts = 1;  // stay near the previous configuration
  ik_opts.iterations = 200;
  Configuration q = q_init;
  for (size_t t = 1; t < path.nodes.size(); ++t) {
    auto sol = ik_solve(model, path.nodes[t].hand_pose, q, eps_p, eps_r, ik_opts);
    if (!sol) {
      // widen the search before giving up
      IkOptions retry = ik_opts;
      retry.restarts = 50;
      sol = ik_solve(model, path.nodes[t].hand_pose, q, eps_p, eps_r, retry);
    }
    if (!sol) {
      result.failure = {static_cast<int>(t), StepFailureCause::PoseUnreachable,
                        "inverse kinematics failed"};
      return result;
    }
    q = *sol;
    result.trajectory.steps.push_back(
        make_step(model, q, path.nodes[t].force.hand_force, path.nodes[t].hand_pose));
  }
  result.ok = true;
  return result;
}

TrajectoryReport validate_trajectory(const KinematicModel& model, const ObjectPath& path,
                                     const JointTrajectory& traj, double eps_p, double eps_r,
                                     double base_step, bool enforce_torques,
                                     bool enforce_base) {
  TrajectoryReport report;
  if (traj.steps.size() != path.nodes.size()) {
    report.violations.push_back({-1, "trajectory and path lengths differ"});
    return report;
  }
  for (size_t t = 0; t < traj.steps.size(); ++t) {
    const Configuration& q = traj.steps[t].q;
    int idx = static_cast<int>(t);
    if (q.size() != model.dof()) {
      report.violations.push_back({idx, "configuration dimension mismatch"});
      continue;
    }
    for (int k = 0; k < model.dof(); ++k) {
      if (q[k] < model.joints[k].pos_min - 1e-12 || q[k] > model.joints[k].pos_max + 1e-12) {
        report.violations.push_back({idx, "joint limit violated: " + model.joints[k].name});
      }
    }
    Pose tcp = fk(model, q);
    if (!within_pose_tol(tcp, path.nodes[t].hand_pose, eps_p, eps_r)) {
      report.violations.push_back({idx, "hand pose tolerance violated"});
    }
    Eigen::VectorXd tau = joint_torques(jacobian(model, q), path.nodes[t].force.hand_force);
    TorqueReport tr = torque_within_limits(model, tau);
    report.peak_torque_ratio = std::max(report.peak_torque_ratio, tr.worst_ratio);
    if (enforce_torques && !tr.within_limits) {
      report.violations.push_back({idx, "torque limit violated"});
    }
    if (enforce_base && t > 0 && model.base_joint_count >= 3) {
      const Configuration& prev = traj.steps[t - 1].q;
      if (q[1] != prev[1] || q[2] != prev[2]) {
        report.violations.push_back({idx, "base y or yaw moved"});
      }
      if (std::abs(q[0] - prev[0]) > base_step + 1e-12) {
        report.violations.push_back({idx, "base x step bound violated"});
      }
    }
  }
  report.ok = report.violations.empty();
  return report;
}

std::string dump_trajectory_json(const JointTrajectory& traj) {
  nlohmann::json doc;
  doc["steps"] = nlohmann::json::array();
  for (size_t t = 0; t < traj.steps.size(); ++t) {
    const TrajectoryStep& s = traj.steps[t];
    nlohmann::json j;
    j["t"] = t;
    j["q"] = std::vector<double>(s.q.data(), s.q.data() + s.q.size());
    j["tau"] = std::vector<double>(s.tau.data(), s.tau.data() + s.tau.size());
    j["torque_ratios"] = s.torque_ratios;
    j["pos_error"] = s.pos_error;
    j["rot_error"] = s.rot_error;
    doc["steps"].push_back(j);
  }
  return doc.dump(2);
}

std::string dump_trajectory_csv(const JointTrajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  size_t d = traj.steps.empty() ? 0 : static_cast<size_t>(traj.steps[0].q.size());
  os << "t";
  for (size_t k = 0; k < d; ++k) os << ",q" << k;
  for (size_t k = 0; k < d; ++k) os << ",tau" << k;
  for (size_t k = 0; k < d; ++k) os << ",ratio" << k;
  os << ",pos_error,rot_error\n";
  for (size_t t = 0; t < traj.steps.size(); ++t) {
    const TrajectoryStep& s = traj.steps[t];
    os << t;
    for (size_t k = 0; k < d; ++k) os << "," << s.q[k];
    for (size_t k = 0; k < d; ++k) os << "," << s.tau[k];
    for (size_t k = 0; k < d; ++k) os << "," << s.torque_ratios[k];
    os << "," << s.pos_error << "," << s.rot_error << "\n";
  }
  return os.str();
}

JointTrajectory load_trajectory_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SolverError(std::string("trajectory json: ") + e.what());
  }
  JointTrajectory traj;
  try {
    for (const auto& j : doc.at("steps")) {
      TrajectoryStep s;
      auto qv = j.at("q").get<std::vector<double>>();
      s.q = Eigen::Map<const Eigen::VectorXd>(qv.data(), qv.size());
      auto tv = j.at("tau").get<std::vector<double>>();
      s.tau = Eigen::Map<const Eigen::VectorXd>(tv.data(), tv.size());
      s.torque_ratios = j.at("torque_ratios").get<std::vector<double>>();
      s.pos_error = j.at("pos_error").get<double>();
      s.rot_error = j.at("rot_error").get<double>();
      traj.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SolverError(std::string("trajectory json: ") + e.what());
  }
  return traj;
}

}  // namespace crustplan
