#include <doctest.h>

#include <fstream>
#include <random>

#include "crustplan/kinematics.hpp"

using namespace crustplan;

namespace {

Joint revolute_z(const std::string& name, const Vec3& offset, double lim = M_PI,
                 double torque = 100) {
  Joint j;
  j.name = name;
  j.type = JointType::Revolute;
  j.axis = Vec3::UnitZ();
  j.parent_transform.translation = offset;
  j.pos_min = -lim;
  j.pos_max = lim;
  j.torque_min = -torque;
  j.torque_max = torque;
  return j;
}

Joint prismatic(const std::string& name, const Vec3& axis, double lo, double hi,
                double force = 500) {
  Joint j;
  j.name = name;
  j.type = JointType::Prismatic;
  j.axis = axis;
  j.pos_min = lo;
  j.pos_max = hi;
  j.torque_min = -force;
  j.torque_max = force;
  return j;
}

// Planar 2R arm, 1 m links, no mobile base.
KinematicModel planar_2r() {
  KinematicModel m;
  m.name = "planar2r";
  m.base_joint_count = 0;
  m.joints.push_back(revolute_z("shoulder", Vec3::Zero()));
  m.joints.push_back(revolute_z("elbow", Vec3::UnitX()));
  m.tcp_offset.translation = Vec3::UnitX();
  m.validate();
  return m;
}

// Mobile base (x, y, yaw) + 3R arm reaching out of plane.
KinematicModel mobile_arm() {
  KinematicModel m;
  m.name = "mobile3r";
  m.joints.push_back(prismatic("base_x", Vec3::UnitX(), -5, 5));
  m.joints.push_back(prismatic("base_y", Vec3::UnitY(), -5, 5));
  m.joints.push_back(revolute_z("base_yaw", Vec3::Zero()));
  Joint shoulder = revolute_z("shoulder", Vec3(0, 0, 0.4));
  shoulder.axis = Vec3::UnitY();
  Joint elbow = revolute_z("elbow", Vec3(0.5, 0, 0));
  elbow.axis = Vec3::UnitY();
  Joint wrist = revolute_z("wrist", Vec3(0.5, 0, 0));
  m.joints.push_back(shoulder);
  m.joints.push_back(elbow);
  m.joints.push_back(wrist);
  m.tcp_offset.translation = Vec3(0.2, 0, 0);
  m.base_pivot = Vec3(0, 0, 0.1);
  m.delta_theta_x = 0.00873;
  m.delta_theta_y = 0.015;
  m.payload_force = 18.3;
  m.validate();
  return m;
}

Configuration zeros(const KinematicModel& m) { return Configuration::Zero(m.dof()); }

JacobianMatrix finite_difference_jacobian(const KinematicModel& m, const Configuration& q,
                                          double h = 1e-6) {
  JacobianMatrix jac(6, m.dof());
  for (int k = 0; k < m.dof(); ++k) {
    Configuration qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    Pose fp = fk(m, qp), fm = fk(m, qm);
    jac.col(k).head<3>() = (fp.translation - fm.translation) / (2 * h);
    jac.col(k).tail<3>() = rotation_log(fp.rotation * fm.rotation.transpose()) / (2 * h);
  }
  return jac;
}

Configuration random_config(const KinematicModel& m, std::mt19937_64& rng) {
  Configuration q(m.dof());
  for (int k = 0; k < m.dof(); ++k) {
    std::uniform_real_distribution<double> u(m.joints[k].pos_min, m.joints[k].pos_max);
    q[k] = u(rng);
  }
  return q;
}

}  // namespace

TEST_CASE("fk: all-zero configuration gives the home pose") {
  auto m = mobile_arm();
  Pose home = fk(m, zeros(m));
  CHECK(home.translation.isApprox(Vec3(1.2, 0, 0.4), 1e-12));
  CHECK(home.rotation.isApprox(Mat3::Identity(), 1e-12));
}

TEST_CASE("fk: planar 2R trigonometry") {
  auto m = planar_2r();
  Configuration q(2);
  q << 0, M_PI / 2;
  Pose p = fk(m, q);
  CHECK(p.translation.isApprox(Vec3(1, 1, 0), 1e-12));
}

TEST_CASE("fk: base translation equivariance") {
  auto m = mobile_arm();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    Configuration q = random_config(m, rng);
    Configuration q2 = q;
    q2[0] += 0.3;
    Vec3 dp = fk(m, q2).translation - fk(m, q).translation;
    CHECK(dp.isApprox(Vec3(0.3, 0, 0), 1e-9));
  }
}

TEST_CASE("fk: dimension mismatch throws") {
  auto m = planar_2r();
  CHECK_THROWS_AS(fk(m, Configuration::Zero(5)), ModelError);
  CHECK_THROWS_AS(jacobian(m, Configuration::Zero(1)), ModelError);
}

TEST_CASE("jacobian: prismatic base column is the axis") {
  auto m = mobile_arm();
  std::mt19937_64 rng(6);
  for (int i = 0; i < 5; ++i) {
    auto jac = jacobian(m, random_config(m, rng));
    CHECK(jac.col(0).head<3>().isApprox(Vec3::UnitX(), 1e-12));
    CHECK(jac.col(0).tail<3>().norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("jacobian: planar 2R analytic columns at zero") {
  auto m = planar_2r();
  auto jac = jacobian(m, zeros(m));
  CHECK(jac.col(0).head<3>().isApprox(Vec3(0, 2, 0), 1e-12));
  CHECK(jac.col(1).head<3>().isApprox(Vec3(0, 1, 0), 1e-12));
}

TEST_CASE("jacobian: matches central differences") {
  std::mt19937_64 rng(42);
  auto m = mobile_arm();
  for (int i = 0; i < 100; ++i) {
    Configuration q = random_config(m, rng);
    JacobianMatrix diff = jacobian(m, q) - finite_difference_jacobian(m, q);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("ik: fixed point at the seed") {
  auto m = mobile_arm();
  std::mt19937_64 rng(9);
  Configuration q = random_config(m, rng);
  auto sol = ik_solve(m, fk(m, q), q, 1e-4, 1e-3);
  REQUIRE(sol.has_value());
  Pose p = fk(m, *sol);
  CHECK((p.translation - fk(m, q).translation).norm() <= 1e-4);
}

TEST_CASE("ik: unreachable target reports no solution") {
  auto m = planar_2r();
  Pose target;
  target.translation = {10, 0, 0};
  IkOptions opts;
  opts.restarts = 10;  // keep the failure case fast
  auto sol = ik_solve(m, target, zeros(m), 1e-3, 1e-2, opts);
  CHECK(!sol.has_value());
}

TEST_CASE("ik: planar 2R closed-form branches") {
  auto m = planar_2r();
  Pose target;
  target.translation = {1, 1, 0};
  // accept any orientation: wide rotational tolerance
  auto sol = ik_solve(m, target, zeros(m), 1e-4, 10.0);
  REQUIRE(sol.has_value());
  double q1 = (*sol)[0], q2 = (*sol)[1];
  // closed form: q2 = +-pi/2 with q1 = 0 or pi/2
  bool branch_a = std::abs(q2 - M_PI / 2) < 1e-2 && std::abs(q1) < 1e-2;
  bool branch_b = std::abs(q2 + M_PI / 2) < 1e-2 && std::abs(q1 - M_PI / 2) < 1e-2;
  CHECK((branch_a || branch_b));
  CHECK((fk(m, *sol).translation - target.translation).norm() <= 1e-4);
}

TEST_CASE("ik: round trip across random targets") {
  auto m = mobile_arm();
  std::mt19937_64 rng(17);
  for (int i = 0; i < 10; ++i) {
    Configuration q = random_config(m, rng);
    Pose target = fk(m, q);
    auto sol = ik_solve(m, target, zeros(m), 1e-4, 1e-3);
    REQUIRE(sol.has_value());
    CHECK((fk(m, *sol).translation - target.translation).norm() <= 1e-4);
    CHECK(rotation_angle(fk(m, *sol).rotation, target.rotation) <= 1e-3);
    for (int k = 0; k < m.dof(); ++k) {
      CHECK((*sol)[k] >= m.joints[k].pos_min - 1e-12);
      CHECK((*sol)[k] <= m.joints[k].pos_max + 1e-12);
    }
  }
}

TEST_CASE("crust_thickness: L tan(delta_theta_max)") {
  auto m = mobile_arm();
  // home: TCP (1.2, 0, 0.4), pivot (0, 0, 0.1) -> L known
  Configuration q = zeros(m);
  double l = (Vec3(1.2, 0, 0.4) - Vec3(0, 0, 0.1)).norm();
  CHECK(crust_thickness(m, q) == doctest::Approx(l * std::tan(0.015)).epsilon(1e-12));

  // spec pair: L = 2 m, max angle 0.859 deg -> 30.0 mm
  KinematicModel flat = m;
  flat.delta_theta_x = flat.delta_theta_y = 0.859 * M_PI / 180.0;
  flat.tcp_offset.translation = Vec3(1.0, 0, 0);  // stretch TCP so L = 2
  Configuration q2 = zeros(flat);
  double l2 = (fk(flat, q2).translation - base_pivot_world(flat, q2)).norm();
  double expect = l2 * std::tan(0.859 * M_PI / 180.0);
  CHECK(crust_thickness(flat, q2) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(2.0 * std::tan(0.015) == doctest::Approx(0.0300).epsilon(1e-3));
}

TEST_CASE("crust_thickness: zero compliance and out-of-reach give zero") {
  auto m = mobile_arm();
  m.delta_theta_x = m.delta_theta_y = 0;
  CHECK(crust_thickness(m, zeros(m)) == 0.0);
  auto m2 = mobile_arm();
  CHECK(crust_thickness(m2, zeros(m2), /*within_reach=*/false) == 0.0);
}

TEST_CASE("crust_thickness: monotone in pivot-to-TCP distance") {
  auto m = mobile_arm();
  Configuration folded = zeros(m);
  folded[4] = 2.0;  // bend the elbow hard
  CHECK(crust_thickness(m, folded) < crust_thickness(m, zeros(m)));
}

TEST_CASE("robot model json round trip and validation") {
  const char* path = "/tmp/crustplan_model_test.json";
  {
    std::ofstream out(path);
    out << R"({
      "name": "test-bot",
      "joints": [
        {"name": "base_x", "type": "prismatic", "axis": [1,0,0],
         "limits": [-5,5], "torque_limits": [-500,500]},
        {"name": "base_y", "type": "prismatic", "axis": [0,1,0],
         "limits": [-5,5], "torque_limits": [-500,500]},
        {"name": "base_yaw", "type": "revolute", "axis": [0,0,1],
         "limits": [-3.14,3.14], "torque_limits": [-300,300]},
        {"name": "shoulder", "type": "revolute", "axis": [0,1,0],
         "origin": {"xyz": [0,0,0.4]},
         "limits": [-2.0,2.0], "torque_limits": [-50,50]}
      ],
      "base_joint_count": 3,
      "base_pivot": [0,0,0.1],
      "compliance": {"delta_theta_x": 0.00873, "delta_theta_y": 0.015},
      "tcp_offset": {"xyz": [0.3,0,0]},
      "payload_force": 18.3
    })";
  }
  auto m = load_robot_model(path);
  CHECK(m.dof() == 4);
  CHECK(m.payload_force == doctest::Approx(18.3));
  CHECK(m.delta_theta_y == doctest::Approx(0.015));
  Pose home = fk(m, Configuration::Zero(4));
  CHECK(home.translation.isApprox(Vec3(0.3, 0, 0.4), 1e-12));

  CHECK_THROWS_AS(load_robot_model("/tmp/does_not_exist.json"), ModelError);
}
