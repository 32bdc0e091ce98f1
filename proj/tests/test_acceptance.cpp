// Acceptance suite for the shipped toolkit. Each numbered criterion prints
// exactly one PASS/FAIL line; the exit code is the number of failures.
//
// Heavier criteria reuse a shared set of pipeline runs over the scenarios in
// CRUSTPLAN_SCENARIO_DIR, executed once up front.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crustplan/convex.hpp"
#include "crustplan/scenario.hpp"
#include "statics_oracle.hpp"

#ifndef CRUSTPLAN_SCENARIO_DIR
#error "CRUSTPLAN_SCENARIO_DIR must point at the shipped scenario directory"
#endif

using namespace crustplan;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarioDir = CRUSTPLAN_SCENARIO_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int g_failures = 0;

void report(int index, bool pass, const std::string& text) {
  std::cout << "[" << (index < 10 ? " " : "") << index << "] " << (pass ? "PASS" : "FAIL")
            << "  " << text << std::endl;
  if (!pass) ++g_failures;
}

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

ContactSet make_contacts(const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                         double mu) {
  ContactSet c;
  c.points = points;
  c.normals = normals;
  c.friction.assign(points.size(), mu);
  return c;
}

ContactSet random_instance(std::mt19937_64& rng, int n_contacts, double mu_max, Vec3& com,
                           Vec3& grasp) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> umu(0.0, mu_max);
  ContactSet c;
  for (int i = 0; i < n_contacts; ++i) {
    c.points.push_back({u(rng), u(rng), u(rng)});
    Vec3 n(u(rng), u(rng), 1.0 + 0.5 * u(rng));
    c.normals.push_back(n.normalized());
    c.friction.push_back(umu(rng));
  }
  com = {u(rng), u(rng), 0.5 + u(rng)};
  grasp = {u(rng), u(rng), 0.8 + u(rng)};
  return c;
}

TriMesh random_convex(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts;
  for (int i = 0; i < 24; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  return convex_hull(pts, "rand");
}

JacobianMatrix fd_jacobian(const KinematicModel& m, const Configuration& q, double h = 1e-6) {
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

double peak_ratio(const JointTrajectory& traj) {
  double peak = 0;
  for (const auto& step : traj.steps) {
    for (double r : step.torque_ratios) peak = std::max(peak, r);
  }
  return peak;
}

// One shared pipeline run per shipped scenario, reused by criteria 6-9 and 11.
struct SuiteRun {
  std::string name;
  Scenario scenario;
  RunReport run;
  std::string dir;
};

std::vector<SuiteRun> run_suite(const fs::path& scratch) {
  const std::vector<std::string> names = {"slide_cabinet", "retry_lift_cabinet",
                                          "overhang_slab", "unload_slab_scaled"};
  std::vector<SuiteRun> suite;
  for (const auto& name : names) {
    SuiteRun sr;
    sr.name = name;
    sr.scenario = load_scenario((kScenarioDir / (name + ".json")).string());
    sr.dir = (scratch / name).string();
    sr.run = run_pipeline(sr.scenario, sr.scenario.planner.seed, sr.dir);
    suite.push_back(std::move(sr));
  }
  return suite;
}

void criterion_1_statics_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> unum(1, 3);
  double t0 = now_s();
  int checked = 0, mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    Vec3 com, grasp;
    auto contacts = random_instance(rng, unum(rng), 1.0, com, grasp);
    auto cones = build_cones(contacts, 4);
    GravityLoad load{2.0, 9.80665, Vec3::Zero()};
    auto sol = solve_min_hand_force(contacts, cones, load, com, grasp, 1e9);
    auto oracle = crustplan_test::min_hand_force_oracle(contacts, cones, load, com, grasp);
    ++checked;
    if (sol.balanced != oracle.balanced) {
      ++mismatches;
      continue;
    }
    if (oracle.balanced &&
        std::abs(sol.hand_force.norm() - oracle.hand_force_norm) >
            0.02 * std::max(1.0, oracle.hand_force_norm)) {
      ++mismatches;
    }
  }
  double elapsed = now_s() - t0;
  std::ostringstream os;
  os << "minimum-hand-force solver matches the exhaustive oracle on " << checked
     << " random instances (" << mismatches << " mismatches, " << elapsed << " s)";
  report(1, mismatches == 0 && elapsed < 10.0, os.str());
}

void criterion_2_analytic_statics() {
  GravityLoad load{2.5, 9.80665, Vec3::Zero()};
  const double mg = load.mass * load.g;
  bool ok = true;

  ContactSet none;
  FrictionConeBasis no_cones;
  auto free_sol = solve_min_hand_force(none, no_cones, load, Vec3(0, 0, 0.5), Vec3(0, 0, 1.0), 30.0);
  ok = ok && free_sol.balanced && std::abs(free_sol.hand_force.norm() - mg) <= 1e-3;

  auto square = make_contacts(
      {{0.2, 0.2, 0}, {-0.2, 0.2, 0}, {-0.2, -0.2, 0}, {0.2, -0.2, 0}},
      {Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitZ()}, 0.5);
  auto sup_sol = solve_min_hand_force(square, build_cones(square, 8), load, Vec3(0, 0, 0.1),
                                      Vec3(0, 0.4, 0.2), 30.0);
  ok = ok && sup_sol.feasible && sup_sol.hand_force.norm() <= 1e-6;

  auto rod = make_contacts({{0, 0, 0}}, {Vec3::UnitZ()}, 2.0);
  auto rod_sol = solve_min_hand_force(rod, build_cones(rod, 8), load, Vec3(0.5, 0, 0),
                                      Vec3(1.0, 0, 0), 30.0);
  ok = ok && rod_sol.balanced && std::abs(rod_sol.hand_force.norm() - mg / 2) <= 1e-3;

  report(2, ok, "analytic statics: free-float carries full weight, supported cube needs none, "
                "rod lever splits it");
}

void criterion_3_jacobian(const KinematicModel& model) {
  std::mt19937_64 rng(42);
  double worst_jac = 0;
  for (int i = 0; i < 100; ++i) {
    Configuration q = random_config(model, rng);
    JacobianMatrix diff = jacobian(model, q) - fd_jacobian(model, q);
    worst_jac = std::max(worst_jac, diff.cwiseAbs().maxCoeff());
  }
  double worst_work = 0;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    Configuration q = random_config(model, rng);
    Vec3 f(10 * u(rng), 10 * u(rng), 10 * u(rng));
    Eigen::VectorXd tau = joint_torques(jacobian(model, q), f);
    for (int k = 0; k < model.dof(); ++k) {
      double h = 1e-6;
      Configuration qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      double dw = f.dot(fk(model, qp).translation - fk(model, qm).translation) / (2 * h);
      worst_work = std::max(worst_work, std::abs(tau[k] - dw));
    }
  }
  std::ostringstream os;
  os << "Jacobian vs central differences (max err " << worst_jac
     << ") and torque virtual work (max err " << worst_work << ")";
  report(3, worst_jac < 1e-5 && worst_work < 1e-4, os.str());
}

void criterion_4_minkowski_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const double thickness = 0.05;
  int tested = 0, disagreements = 0;
  for (int trial = 0; trial < 400 && tested < 100; ++trial) {
    auto a = random_convex(rng, 0.3);
    auto b = random_convex(rng, 0.3);
    Pose pa = Pose::identity();
    Pose pb;
    pb.translation = {u(rng), u(rng), u(rng)};
    Environment env;
    env.push_back({b, pb, 0.5});

    auto outer = emit_crust_mesh(a, thickness * 1.01);
    auto inner = emit_crust_mesh(a, thickness * 0.99);
    bool outer_overlaps =
        convex_signed_distance(outer.vertices, pa, b.vertices, pb).distance <= 0;
    bool inner_overlaps =
        convex_signed_distance(inner.vertices, pa, b.vertices, pb).distance <= 0;
    if (outer_overlaps != inner_overlaps) continue;  // polyhedral dilation uncertain
    bool original_overlaps =
        convex_signed_distance(a.vertices, pa, b.vertices, pb).distance <= 0;
    bool oracle_contact = inner_overlaps && !original_overlaps;

    auto c = classify(a, pa, env, thickness);
    if (std::abs(c.min_separation - thickness) < thickness * 0.02 ||
        std::abs(c.min_separation) < 1e-6) {
      continue;  // threshold tie, excluded from the discrete comparison
    }
    ++tested;
    if ((c.state == ContactState::Contact) != oracle_contact) ++disagreements;
  }
  std::ostringstream os;
  os << "crust classification matches the Minkowski-dilation overlap oracle (" << tested
     << " scenes, " << disagreements << " disagreements)";
  report(4, tested >= 100 && disagreements == 0, os.str());
}

void criterion_5_thickness_trend() {
  Scenario sc = load_scenario((kScenarioDir / "unload_slab_scaled.json").string());
  bool cap_ok = sc.planner.max_time_s <= 100.0;
  std::vector<ThicknessPolicy> policies = {
      ThicknessPolicy::fixed(0.03), ThicknessPolicy::fixed(0.015), ThicknessPolicy::fixed(0.005),
      ThicknessPolicy::dynamic_policy()};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto rows = run_sweep(sc, policies, seeds);
  double r30 = rows[0].success_rate, r15 = rows[1].success_rate, r05 = rows[2].success_rate;
  double rdyn = rows[3].success_rate;
  bool trend = r30 >= r15 && r15 >= r05;
  bool dyn_close = rdyn >= r30 - 20.0;
  std::ostringstream os;
  os << "thickness-policy trend on the scaled unload, 10 seeds: fixed-3cm " << r30
     << "% >= fixed-1.5cm " << r15 << "% >= fixed-0.5cm " << r05 << "%, dynamic " << rdyn
     << "% within 20 points of fixed-3cm";
  report(5, cap_ok && trend && dyn_close, os.str());
}

void criterion_6_path_invariants(const std::vector<SuiteRun>& suite) {
  int paths = 0, violations = 0;
  for (const auto& sr : suite) {
    if (sr.run.status != RunStatus::Success) continue;
    ObjectPath path = load_path_json(slurp(sr.run.path_file));
    PlannerParams params = sr.scenario.planner;
    params.seed = sr.run.seed;
    auto rep = validate_path(path, sr.scenario.environment, sr.scenario.object,
                             sr.scenario.model, sr.scenario.load,
                             sr.scenario.model.payload_force, params);
    ++paths;
    violations += static_cast<int>(rep.violations.size());
    for (const auto& v : rep.violations) {
      std::cout << "      " << sr.name << " node " << v.node << ": " << v.what << "\n";
    }
  }
  std::ostringstream os;
  os << "every returned path revalidates from its emitted file (" << paths << " paths, "
     << violations << " violations)";
  report(6, paths >= 3 && violations == 0, os.str());
}

void criterion_7_trajectory_invariants(const std::vector<SuiteRun>& suite) {
  int trajs = 0, bad = 0;
  double worst = 0;
  for (const auto& sr : suite) {
    if (sr.run.status != RunStatus::Success) continue;
    ObjectPath path = load_path_json(slurp(sr.run.path_file));
    JointTrajectory traj = load_trajectory_json(slurp(sr.run.trajectory_file));
    auto rep = validate_trajectory(sr.scenario.model, path, traj, sr.scenario.eps_p,
                                   sr.scenario.eps_r, sr.scenario.base_step, true, true);
    ++trajs;
    worst = std::max(worst, peak_ratio(traj));
    if (!rep.ok || peak_ratio(traj) >= 1.0) {
      ++bad;
      for (const auto& v : rep.violations) {
        std::cout << "      " << sr.name << " step " << v.step << ": " << v.what << "\n";
      }
    }
  }
  std::ostringstream os;
  os << "every returned trajectory keeps torque ratios < 1, base rule and pose tolerances ("
     << trajs << " trajectories, peak ratio " << worst << ")";
  report(7, trajs >= 3 && bad == 0, os.str());
}

void criterion_8_optimizer_vs_baseline(const std::vector<SuiteRun>& suite) {
  int compared = 0, regressions = 0, rescued = 0;
  for (const auto& sr : suite) {
    if (sr.run.status != RunStatus::Success) continue;
    fs::path ik_file = fs::path(sr.dir) / "trajectory_ik.json";
    if (!fs::exists(ik_file)) continue;
    JointTrajectory opt = load_trajectory_json(slurp(sr.run.trajectory_file));
    JointTrajectory ik = load_trajectory_json(slurp(ik_file.string()));
    double p_opt = peak_ratio(opt), p_ik = peak_ratio(ik);
    ++compared;
    // 0.01 absorbs the solver granularity between the base-constrained
    // optimizer and the unconstrained baseline when neither is torque-bound
    if (p_opt > p_ik + 0.01) {
      ++regressions;
      std::cout << "      " << sr.name << ": optimized peak " << p_opt << " > baseline " << p_ik
                << "\n";
    }
    if (p_ik >= 1.0 && p_opt < 1.0) ++rescued;
  }
  std::ostringstream os;
  os << "optimized peak torque ratio <= IK-only baseline on all " << compared
     << " compared runs; " << rescued << " scenario(s) where only the optimizer stays in limits";
  report(8, compared >= 3 && regressions == 0 && rescued >= 1, os.str());
}

void criterion_9_support_necessity(const std::vector<SuiteRun>& suite) {
  // Remove the environment and re-solve the force balance along a successful
  // path: somewhere the hand alone must exceed its payload.
  bool found = false;
  std::string where;
  for (const auto& sr : suite) {
    if (sr.run.status != RunStatus::Success) continue;
    ObjectPath path = load_path_json(slurp(sr.run.path_file));
    ContactSet none;
    FrictionConeBasis no_cones;
    for (const auto& node : path.nodes) {
      Vec3 com_world = node.object_pose.rotation * sr.scenario.load.com +
                       node.object_pose.translation;
      auto sol = solve_min_hand_force(none, no_cones, sr.scenario.load, com_world,
                                      node.hand_pose.translation,
                                      sr.scenario.model.payload_force);
      if (sol.balanced && sol.hand_force.norm() > sr.scenario.model.payload_force) {
        found = true;
        where = sr.name;
        break;
      }
    }
    if (found) break;
  }
  report(9, found,
         "removing the environment pushes the required hand force beyond the payload"
         " on a successful path" + (found ? " (" + where + ")" : ""));
}

void criterion_10_calibration() {
  double deg = 180.0 / M_PI;
  double a = calibrate_compliance(1.718, 0.015) * deg;
  double b = calibrate_compliance(1.667, 0.025) * deg;
  std::ostringstream os;
  os << "compliance calibration reproduces the measured pairs (0.500 vs " << a
     << " deg, 0.859 vs " << b << " deg)";
  report(10, std::abs(a - 0.500) <= 0.05 * 0.500 && std::abs(b - 0.859) <= 0.05 * 0.859,
         os.str());
}

void criterion_11_determinism(const fs::path& scratch) {
  Scenario sc = load_scenario((kScenarioDir / "slide_cabinet.json").string());
  RunReport a = run_pipeline(sc, 5, (scratch / "det_a").string());
  RunReport b = run_pipeline(sc, 5, (scratch / "det_b").string());
  bool ok = a.status == RunStatus::Success && b.status == RunStatus::Success;
  // every JSON output except report.json, which carries wall-clock timings
  for (const char* f : {"path.json", "trajectory.json", "trajectory.csv", "trajectory_ik.json"}) {
    fs::path fa = scratch / "det_a" / f, fb = scratch / "det_b" / f;
    if (fs::exists(fa) != fs::exists(fb)) ok = false;
    if (ok && fs::exists(fa)) ok = slurp(fa.string()) == slurp(fb.string());
  }
  report(11, ok, "two runs with the same seed emit byte-identical path and trajectory files");
}

}  // namespace

int main() {
  setenv("CRUSTPLAN_WORKERS", "1", 1);
  fs::path scratch = fs::temp_directory_path() / "crustplan_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  try {
    criterion_1_statics_oracle();
    criterion_2_analytic_statics();
    criterion_3_jacobian(load_robot_model((kScenarioDir / "robot.json").string()));
    criterion_4_minkowski_oracle();
    criterion_5_thickness_trend();
    auto suite = run_suite(scratch);
    criterion_6_path_invariants(suite);
    criterion_7_trajectory_invariants(suite);
    criterion_8_optimizer_vs_baseline(suite);
    criterion_9_support_necessity(suite);
    criterion_10_calibration();
    criterion_11_determinism(scratch);
  } catch (const std::exception& e) {
    std::cout << "acceptance suite aborted: " << e.what() << std::endl;
    return 99;
  }

  std::cout << (g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << " ("
            << (11 - g_failures) << "/11)" << std::endl;
  return g_failures;
}
