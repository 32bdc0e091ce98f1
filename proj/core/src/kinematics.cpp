#include "crustplan/kinematics.hpp"

#include <fstream>
#include <random>

#include <json.hpp>

namespace crustplan {

namespace {

Pose joint_motion(const Joint& j, double q) {
  Pose p;
  if (j.type == JointType::Prismatic) {
    p.translation = j.axis * q;
  } else {
    p.rotation = axis_angle(j.axis, q);
  }
  return p;
}

void check_dim(const KinematicModel& model, const Configuration& q) {
  if (q.size() != model.dof()) {
    throw ModelError("configuration dimension " + std::to_string(q.size()) +
                     " does not match model dof " + std::to_string(model.dof()));
  }
}

}  // namespace

double KinematicModel::max_arm_reach() const {
  double reach = tcp_offset.translation.norm();
  for (int k = base_joint_count; k < dof(); ++k) {
    reach += joints[k].parent_transform.translation.norm();
    if (joints[k].type == JointType::Prismatic) {
      reach += std::max(std::abs(joints[k].pos_min), std::abs(joints[k].pos_max));
    }
  }
  return reach;
}

void KinematicModel::validate() const {
  if (joints.empty()) throw ModelError("model '" + name + "': no joints");
  if (base_joint_count < 0 || base_joint_count > dof()) {
    throw ModelError("model '" + name + "': invalid base_joint_count");
  }
  for (const auto& j : joints) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw ModelError("joint '" + j.name + "': axis must be unit length");
    }
    if (j.pos_min > j.pos_max) {
      throw ModelError("joint '" + j.name + "': position limits reversed");
    }
    if (j.torque_min > j.torque_max) {
      throw ModelError("joint '" + j.name + "': torque limits reversed");
    }
    if (!j.parent_transform.is_orthonormal(1e-8)) {
      throw ModelError("joint '" + j.name + "': parent transform not orthonormal");
    }
  }
  if (delta_theta_x < 0 || delta_theta_y < 0) {
    throw ModelError("model '" + name + "': negative compliance angle");
  }
}

namespace {

Pose parse_transform(const nlohmann::json& j) {
  Pose p;
  if (j.contains("xyz")) {
    auto v = j.at("xyz");
    p.translation = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
  }
  if (j.contains("rpy")) {
    auto v = j.at("rpy");
    p.rotation = (Eigen::AngleAxisd(v.at(2).get<double>(), Vec3::UnitZ()) *
                  Eigen::AngleAxisd(v.at(1).get<double>(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(v.at(0).get<double>(), Vec3::UnitX()))
                     .toRotationMatrix();
  }
  return p;
}

}  // namespace

KinematicModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open robot model: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("robot model '" + path + "': " + e.what());
  }
  KinematicModel m;
  try {
    m.name = doc.value("name", path);
    for (const auto& jj : doc.at("joints")) {
      Joint j;
      j.name = jj.value("name", "joint" + std::to_string(m.joints.size()));
      std::string type = jj.at("type");
      if (type == "prismatic") {
        j.type = JointType::Prismatic;
      } else if (type == "revolute") {
        j.type = JointType::Revolute;
      } else {
        throw ModelError("joint '" + j.name + "': unknown type '" + type + "'");
      }
      auto ax = jj.at("axis");
      j.axis = Vec3(ax.at(0).get<double>(), ax.at(1).get<double>(), ax.at(2).get<double>()).normalized();
      if (jj.contains("origin")) j.parent_transform = parse_transform(jj.at("origin"));
      auto lim = jj.at("limits");
      j.pos_min = lim.at(0).get<double>();
      j.pos_max = lim.at(1).get<double>();
      auto tl = jj.at("torque_limits");
      j.torque_min = tl.at(0).get<double>();
      j.torque_max = tl.at(1).get<double>();
      m.joints.push_back(j);
    }
    m.base_joint_count = doc.value("base_joint_count", 3);
    if (doc.contains("base_pivot")) {
      auto v = doc.at("base_pivot");
      m.base_pivot = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    }
    if (doc.contains("compliance")) {
      m.delta_theta_x = doc.at("compliance").value("delta_theta_x", 0.0);
      m.delta_theta_y = doc.at("compliance").value("delta_theta_y", 0.0);
    }
    if (doc.contains("tcp_offset")) m.tcp_offset = parse_transform(doc.at("tcp_offset"));
    m.payload_force = doc.value("payload_force", 0.0);
    m.hand_mesh_path = doc.value("hand_mesh", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("robot model '" + path + "': " + e.what());
  }
  m.validate();
  return m;
}

Pose fk(const KinematicModel& model, const Configuration& q) {
  check_dim(model, q);
  Pose t;
  for (int k = 0; k < model.dof(); ++k) {
    t = t.compose(model.joints[k].parent_transform).compose(joint_motion(model.joints[k], q[k]));
  }
  return t.compose(model.tcp_offset);
}

JacobianMatrix jacobian(const KinematicModel& model, const Configuration& q) {
  check_dim(model, q);
  const int d = model.dof();
  // Frames before each joint's motion, to read world axes and origins.
  std::vector<Pose> pre(d);
  Pose t;
  for (int k = 0; k < d; ++k) {
    t = t.compose(model.joints[k].parent_transform);
    pre[k] = t;
    t = t.compose(joint_motion(model.joints[k], q[k]));
  }
  Vec3 p_tcp = t.compose(model.tcp_offset).translation;

  JacobianMatrix jac(6, d);
  for (int k = 0; k < d; ++k) {
    Vec3 axis_w = pre[k].rotation * model.joints[k].axis;
    if (model.joints[k].type == JointType::Prismatic) {
      jac.col(k).head<3>() = axis_w;
      jac.col(k).tail<3>().setZero();
    } else {
      jac.col(k).head<3>() = axis_w.cross(p_tcp - pre[k].translation);
      jac.col(k).tail<3>() = axis_w;
    }
  }
  return jac;
}

std::optional<Configuration> ik_solve(const KinematicModel& model, const Pose& target,
                                      const Configuration& seed, double eps_p, double eps_r,
                                      const IkOptions& opts) {
  check_dim(model, seed);
  if (eps_p <= 0 || eps_r <= 0) throw ModelError("ik_solve: tolerances must be positive");
  const int d = model.dof();
  std::mt19937_64 rng(opts.seed);

  auto clamp = [&](Configuration& q) {
    for (int k = 0; k < d; ++k) {
      q[k] = std::clamp(q[k], model.joints[k].pos_min, model.joints[k].pos_max);
    }
  };

  for (int restart = 0; restart <= opts.restarts; ++restart) {
    Configuration q = seed;
    if (restart > 0) {
      for (int k = 0; k < d; ++k) {
        std::uniform_real_distribution<double> u(model.joints[k].pos_min,
                                                 model.joints[k].pos_max);
        q[k] = u(rng);
      }
    }
    clamp(q);
    for (int it = 0; it < opts.iterations; ++it) {
      Pose cur = fk(model, q);
      Vec3 ep = target.translation - cur.translation;
      Vec3 er = rotation_log(target.rotation * cur.rotation.transpose());
      if (ep.norm() <= eps_p && er.norm() <= eps_r) return q;
      Eigen::Matrix<double, 6, 1> e;
      e << ep, er;
      JacobianMatrix jac = jacobian(model, q);
      Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
      jjt.diagonal().array() += opts.damping * opts.damping;
      Configuration dq = jac.transpose() * jjt.ldlt().solve(e);
      double step = std::min(1.0, 0.5 / std::max(1e-9, dq.cwiseAbs().maxCoeff()));
      q += step * dq;
      clamp(q);
    }
    {
      Pose cur = fk(model, q);
      if ((target.translation - cur.translation).norm() <= eps_p &&
          rotation_log(target.rotation * cur.rotation.transpose()).norm() <= eps_r) {
        return q;
      }
    }
  }
  return std::nullopt;
}

Vec3 base_pivot_world(const KinematicModel& model, const Configuration& q) {
  check_dim(model, q);
  Pose t;
  for (int k = 0; k < model.base_joint_count; ++k) {
    t = t.compose(model.joints[k].parent_transform).compose(joint_motion(model.joints[k], q[k]));
  }
  return t.apply(model.base_pivot);
}

double crust_thickness(const KinematicModel& model, const Configuration& q, bool within_reach) {
  if (!within_reach) return 0;
  double l = (fk(model, q).translation - base_pivot_world(model, q)).norm();
  double dt = std::max(model.delta_theta_x, model.delta_theta_y);
  return l * std::tan(dt);
}

}  // namespace crustplan
