#include "crustplan/quasistatics.hpp"

#include <json.hpp>

#include "crustplan/nnls.hpp"

namespace crustplan {

FrictionConeBasis build_cones(const ContactSet& contacts, int edges_per_contact) {
  if (contacts.points.empty()) {
    throw SolverError("build_cones: empty contact set");
  }
  if (edges_per_contact < 4) {
    throw SolverError("build_cones: need at least 4 cone edges");
  }
  FrictionConeBasis basis;
  basis.edges_per_contact = edges_per_contact;
  for (size_t i = 0; i < contacts.points.size(); ++i) {
    double mu = contacts.friction[i];
    if (mu < 0) throw SolverError("build_cones: negative friction coefficient");
    const Vec3& n = contacts.normals[i];
    // deterministic tangent frame
    Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 t1 = n.cross(ref).normalized();
    Vec3 t2 = n.cross(t1);
    std::vector<Vec3> edges;
    for (int j = 0; j < edges_per_contact; ++j) {
      double phi = 2.0 * M_PI * j / edges_per_contact;
      edges.push_back((n + mu * (std::cos(phi) * t1 + std::sin(phi) * t2)).normalized());
    }
    basis.edges.push_back(std::move(edges));
  }
  return basis;
}

HandForceSolution solve_min_hand_force(const ContactSet& contacts,
                                       const FrictionConeBasis& cones,
                                       const GravityLoad& load, const Vec3& com_world,
                                       const Vec3& grasp_point, double f_max) {
  if (load.mass <= 0) throw SolverError("solve_min_hand_force: mass must be positive");
  const Vec3 gravity(0, 0, -load.mass * load.g);

  // Eliminate F_h via the force balance, leaving the torque balance about the
  // grasp point:  sum_s lambda * ((r_s - r_h) x e_s) = (r_h - r_g) x G.
  int n_coeffs = 0;
  for (const auto& e : cones.edges) n_coeffs += static_cast<int>(e.size());
  Eigen::MatrixXd edge_mat(3, n_coeffs);     // E: force contributions
  Eigen::MatrixXd torque_mat(3, n_coeffs);   // B: torque contributions about r_h
  int col = 0;
  for (size_t s = 0; s < cones.edges.size(); ++s) {
    Vec3 arm = contacts.points[s] - grasp_point;
    for (const Vec3& e : cones.edges[s]) {
      edge_mat.col(col) = e;
      torque_mat.col(col) = arm.cross(e);
      ++col;
    }
  }
  const Vec3 torque_rhs = (grasp_point - com_world).cross(gravity);

  const double f_scale = std::max(1.0, gravity.norm());
  double l_char = 1.0;
  for (size_t s = 0; s < contacts.points.size(); ++s) {
    l_char = std::max(l_char, (contacts.points[s] - grasp_point).norm());
  }
  l_char = std::max(l_char, (com_world - grasp_point).norm());
  const double force_tol = 1e-6 * f_scale;
  const double torque_tol = 1e-6 * f_scale * l_char;

  HandForceSolution sol;
  if (n_coeffs == 0) {
    sol.lambda.resize(0);
    sol.hand_force = -gravity;
    sol.torque_residual = torque_rhs.norm();
  } else {
    // Augmented-Lagrangian NNLS on the scaled system. A single stiff penalty
    // either leaves the torque residual loose or drowns out the force
    // objective, so instead the torque block gets a moderate weight and its
    // right-hand side absorbs a multiplier estimate across a few passes.
    const double weight = 1e2;
    const Eigen::MatrixXd b_scaled = torque_mat / (f_scale * l_char);
    const Vec3 c_scaled = torque_rhs / (f_scale * l_char);
    Eigen::MatrixXd a(6, n_coeffs);
    a.topRows(3) = weight * b_scaled;
    a.bottomRows(3) = edge_mat / f_scale;
    Eigen::VectorXd b(6);
    b.tail(3) = -gravity / f_scale;

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n_coeffs);
    Vec3 multiplier = Vec3::Zero();
    const double inner_tol = 1e-2 * torque_tol / (f_scale * l_char);
    for (int pass = 0; pass < 12; ++pass) {
      b.head(3) = weight * (c_scaled + multiplier);
      if (!nnls(a, b, lambda, 50 * n_coeffs + 100)) {
        throw SolverError("solve_min_hand_force: NNLS did not converge after " +
                          std::to_string(50 * n_coeffs + 100) + " iterations");
      }
      Vec3 violation = c_scaled - b_scaled * lambda;
      if (violation.norm() <= inner_tol) break;
      multiplier += violation;
    }

    // Polish on the discovered support: solve the equality-constrained
    // least squares exactly and keep it when it stays nonnegative.
    std::vector<int> support;
    for (int j = 0; j < n_coeffs; ++j) {
      if (lambda[j] > 1e-12) support.push_back(j);
    }
    if (!support.empty()) {
      const int k = static_cast<int>(support.size());
      Eigen::MatrixXd e_s(3, k), b_s(3, k);
      for (int i = 0; i < k; ++i) {
        e_s.col(i) = edge_mat.col(support[i]) / f_scale;
        b_s.col(i) = b_scaled.col(support[i]);
      }
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 3, k + 3);
      Eigen::VectorXd rhs(k + 3);
      kkt.topLeftCorner(k, k) = 2.0 * e_s.transpose() * e_s;
      kkt.topRightCorner(k, 3) = b_s.transpose();
      kkt.bottomLeftCorner(3, k) = b_s;
      rhs.head(k) = -2.0 * e_s.transpose() * (gravity / f_scale);
      rhs.tail(3) = c_scaled;
      Eigen::VectorXd polished = kkt.fullPivLu().solve(rhs);
      if (polished.allFinite() && (polished.head(k).array() >= 0).all()) {
        Eigen::VectorXd candidate = Eigen::VectorXd::Zero(n_coeffs);
        for (int i = 0; i < k; ++i) candidate[support[i]] = polished[i];
        double cand_resid = (torque_mat * candidate - torque_rhs).norm();
        double cand_force = (gravity + edge_mat * candidate).norm();
        if (cand_resid <= torque_tol &&
            (cand_force <= (gravity + edge_mat * lambda).norm() ||
             (torque_mat * lambda - torque_rhs).norm() > torque_tol)) {
          lambda = candidate;
        }
      }
    }

    sol.lambda = lambda;
    sol.hand_force = -gravity - edge_mat * lambda;
    sol.torque_residual = (torque_mat * lambda - torque_rhs).norm();
  }
  sol.force_residual = 0;  // F_h absorbs the force balance exactly
  sol.balanced = sol.torque_residual <= torque_tol && sol.force_residual <= force_tol;
  sol.feasible = sol.balanced && sol.hand_force.norm() <= f_max;
  return sol;
}

Eigen::VectorXd joint_torques(const JacobianMatrix& jac, const Vec3& hand_force) {
  Eigen::Matrix<double, 6, 1> wrench;
  wrench << hand_force, Vec3::Zero();
  return jac.transpose() * wrench;
}

TorqueReport torque_within_limits(const KinematicModel& model, const Eigen::VectorXd& tau) {
  if (tau.size() != model.dof()) {
    throw SolverError("torque_within_limits: dimension mismatch");
  }
  TorqueReport report;
  report.within_limits = true;
  for (int k = 0; k < model.dof(); ++k) {
    const Joint& j = model.joints[k];
    double limit = tau[k] >= 0 ? j.torque_max : -j.torque_min;
    double ratio;
    if (limit <= 0) {
      ratio = std::abs(tau[k]) > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    } else {
      ratio = std::abs(tau[k]) / limit;
    }
    report.ratios.push_back(ratio);
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_joint = k;
    }
    if (ratio > 1.0) report.within_limits = false;
  }
  return report;
}

std::string dump_solve_json(const ContactSet& contacts, const FrictionConeBasis& cones,
                            const GravityLoad& load, const Vec3& grasp_point,
                            const HandForceSolution& solution) {
  nlohmann::json doc;
  auto vec = [](const Vec3& v) { return std::vector<double>{v.x(), v.y(), v.z()}; };
  for (size_t i = 0; i < contacts.points.size(); ++i) {
    doc["contacts"].push_back({{"point", vec(contacts.points[i])},
                               {"normal", vec(contacts.normals[i])},
                               {"friction", contacts.friction[i]}});
  }
  for (const auto& cone : cones.edges) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : cone) edges.push_back(vec(e));
    doc["cones"].push_back(edges);
  }
  doc["load"] = {{"mass", load.mass}, {"g", load.g}, {"com", vec(load.com)}};
  doc["grasp_point"] = vec(grasp_point);
  doc["solution"] = {{"hand_force", vec(solution.hand_force)},
                     {"lambda", std::vector<double>(solution.lambda.data(),
                                                    solution.lambda.data() + solution.lambda.size())},
                     {"force_residual", solution.force_residual},
                     {"torque_residual", solution.torque_residual},
                     {"balanced", solution.balanced},
                     {"feasible", solution.feasible}};
  return doc.dump(2);
}

}  // namespace crustplan
