#include "crustplan/scenario.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;

namespace crustplan {

namespace {

Pose parse_pose(const nlohmann::json& j) {
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

std::string resolve(const fs::path& base_dir, const std::string& ref) {
  fs::path p(ref);
  if (p.is_absolute()) return p.string();
  return (base_dir / p).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Success: return "success";
    case RunStatus::AllGraspsExhausted: return "all-grasps-exhausted";
    case RunStatus::Timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  fs::path base_dir = fs::absolute(path).parent_path();

  Scenario sc;
  sc.source_path = fs::absolute(path).string();
  try {
    sc.name = doc.value("name", fs::path(path).stem().string());

    const auto& obj = doc.at("object");
    sc.object = load_mesh(resolve(base_dir, obj.at("mesh").get<std::string>()));
    sc.load.mass = obj.at("mass").get<double>();
    if (sc.load.mass <= 0) throw ConfigError("scenario: object mass must be positive");
    if (obj.contains("com")) {
      auto c = obj.at("com");
      sc.load.com = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    }

    for (const auto& body : doc.at("environment")) {
      EnvBody env;
      env.mesh = load_mesh(resolve(base_dir, body.at("mesh").get<std::string>()));
      env.pose = parse_pose(body);
      env.friction = body.value("friction", 0.5);
      sc.environment.push_back(std::move(env));
    }
    if (sc.environment.empty()) throw ConfigError("scenario: empty environment");

    sc.model = load_robot_model(resolve(base_dir, doc.at("robot").get<std::string>()));
    if (!sc.model.hand_mesh_path.empty() && !fs::path(sc.model.hand_mesh_path).is_absolute()) {
      // hand mesh is referenced from the robot model file
      fs::path robot_dir =
          fs::absolute(resolve(base_dir, doc.at("robot").get<std::string>())).parent_path();
      sc.model.hand_mesh_path = (robot_dir / sc.model.hand_mesh_path).string();
    }
    sc.grasps = load_grasps(resolve(base_dir, doc.at("grasps").get<std::string>()));

    sc.start = parse_pose(doc.at("start"));
    sc.goal = parse_pose(doc.at("goal"));

    const auto& th = doc.at("thickness");
    if (th.is_string() && th.get<std::string>() == "dynamic") {
      sc.planner.thickness = ThicknessPolicy::dynamic_policy();
    } else if (th.is_object() && th.contains("fixed")) {
      double v = th.at("fixed").get<double>();
      if (v < 0) throw ConfigError("scenario: fixed thickness must be >= 0");
      sc.planner.thickness = ThicknessPolicy::fixed(v);
    } else {
      throw ConfigError("scenario: thickness must be \"dynamic\" or {\"fixed\": value}");
    }

    if (doc.contains("planner")) {
      const auto& p = doc.at("planner");
      sc.planner.max_iterations = p.value("max_iterations", sc.planner.max_iterations);
      sc.planner.smoothing_iterations =
          p.value("smoothing_iterations", sc.planner.smoothing_iterations);
      sc.planner.max_time_s = p.value("max_time_s", sc.planner.max_time_s);
      sc.planner.goal_bias = p.value("goal_bias", sc.planner.goal_bias);
      sc.planner.translation_step = p.value("translation_step", sc.planner.translation_step);
      sc.planner.rotation_step = p.value("rotation_step", sc.planner.rotation_step);
      sc.planner.rotation_sample_range =
          p.value("rotation_sample_range", sc.planner.rotation_sample_range);
      if (p.contains("rotation_sample_axis")) {
        const auto& a = p.at("rotation_sample_axis");
        sc.planner.rotation_sample_axis =
            Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
      }
      sc.planner.sample_margin_y = p.value("sample_margin_y", sc.planner.sample_margin_y);
      sc.planner.goal_pos_tol = p.value("goal_pos_tol", sc.planner.goal_pos_tol);
      sc.planner.goal_rot_tol = p.value("goal_rot_tol", sc.planner.goal_rot_tol);
      sc.planner.metric_rotation_weight =
          p.value("metric_rotation_weight", sc.planner.metric_rotation_weight);
      sc.planner.cone_edges = p.value("cone_edges", sc.planner.cone_edges);
      sc.planner.max_contacts = p.value("max_contacts", sc.planner.max_contacts);
      sc.planner.contact_sample_spacing =
          p.value("contact_sample_spacing", sc.planner.contact_sample_spacing);
      sc.planner.seed = p.value("seed", sc.planner.seed);
    }
    if (doc.contains("tolerances")) {
      const auto& t = doc.at("tolerances");
      sc.eps_p = t.value("eps_p", sc.eps_p);
      if (t.contains("eps_r_deg")) sc.eps_r = t.at("eps_r_deg").get<double>() * M_PI / 180.0;
    }
    sc.base_step = doc.value("base_step", sc.base_step);
    sc.planner.ik_pos_tol = sc.eps_p;
    sc.planner.ik_rot_tol = sc.eps_r;
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  if (!sc.start.is_orthonormal(1e-9) || !sc.goal.is_orthonormal(1e-9)) {
    throw ConfigError("scenario: start/goal rotations are not orthonormal");
  }
  return sc;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ConfigError("cannot rename " + tmp + " to " + path);
  }
}

double calibrate_compliance(double l_arm, double delta_d) {
  if (l_arm <= 0) throw ConfigError("calibrate_compliance: arm length must be positive");
  if (delta_d < 0) throw ConfigError("calibrate_compliance: displacement must be >= 0");
  return std::atan(delta_d / l_arm);
}

namespace {

std::optional<Configuration> initial_configuration(const Scenario& sc, const ObjectPath& path) {
  const PlanNode& first = path.nodes.front();
  if (first.q.size() == sc.model.dof()) {
    Pose tcp = fk(sc.model, first.q);
    if ((tcp.translation - first.hand_pose.translation).norm() <= sc.eps_p &&
        rotation_angle(tcp.rotation, first.hand_pose.rotation) <= sc.eps_r) {
      return first.q;
    }
  }
  Configuration mid(sc.model.dof());
  for (int k = 0; k < sc.model.dof(); ++k) {
    mid[k] = 0.5 * (sc.model.joints[k].pos_min + sc.model.joints[k].pos_max);
  }
  return ik_solve(sc.model, first.hand_pose, mid, sc.eps_p, sc.eps_r);
}

nlohmann::json report_to_json(const RunReport& report, const Scenario& sc) {
  nlohmann::json doc;
  doc["status"] = status_name(report.status);
  doc["seed"] = report.seed;
  doc["scenario"] = sc.source_path;
  doc["payload_force"] = sc.model.payload_force;
  doc["attempts"] = nlohmann::json::array();
  for (const auto& a : report.attempts) {
    doc["attempts"].push_back({{"grasp_id", a.grasp_id},
                               {"plan_ok", a.plan_ok},
                               {"traj_ok", a.traj_ok},
                               {"plan_message", a.plan_message},
                               {"traj_message", a.traj_message},
                               {"plan_time_s", a.plan_time_s},
                               {"traj_time_s", a.traj_time_s}});
  }
  nlohmann::json files;
  if (!report.path_file.empty()) files["path"] = fs::path(report.path_file).filename().string();
  if (!report.trajectory_file.empty()) {
    files["trajectory"] = fs::path(report.trajectory_file).filename().string();
    files["trajectory_csv"] = fs::path(report.trajectory_csv_file).filename().string();
  }
  doc["files"] = files;
  return doc;
}

}  // namespace

RunReport run_pipeline(const Scenario& sc, uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  RunReport report;
  report.seed = seed;

  PlannerParams params = sc.planner;
  params.seed = seed;

  std::vector<GraspCandidate> feasible =
      filter_grasps(sc.grasps, sc.object, sc.start, sc.goal, sc.model, sc.environment, sc.eps_p,
                    sc.eps_r);
  bool saw_timeout = false;
  for (const auto& grasp : feasible) {
    GraspAttempt attempt;
    attempt.grasp_id = grasp.id;

    PlanResult pr =
        plan(sc.environment, sc.object, grasp, sc.load, sc.start, sc.goal, sc.model, params);
    attempt.plan_time_s = pr.stats.elapsed_s;
    if (pr.outcome != PlanOutcome::Success) {
      attempt.plan_message = pr.message;
      if (pr.outcome == PlanOutcome::Timeout) saw_timeout = true;
      report.attempts.push_back(attempt);
      continue;
    }
    attempt.plan_ok = true;

    double t0 = now_seconds();
    auto q0 = initial_configuration(sc, pr.path);
    if (!q0) {
      attempt.traj_message = "no initial configuration realizes the first node";
      attempt.traj_time_s = now_seconds() - t0;
      report.attempts.push_back(attempt);
      continue;
    }
    TrajectoryResult tr =
        optimize_trajectory(sc.model, pr.path, *q0, sc.eps_p, sc.eps_r, sc.base_step);
    attempt.traj_time_s = now_seconds() - t0;
    if (!tr.ok) {
      attempt.traj_message = tr.failure.message;
      report.attempts.push_back(attempt);
      continue;
    }

    // independent re-checks before anything is published
    PathReport path_rep = validate_path(pr.path, sc.environment, sc.object, sc.model, sc.load,
                                        sc.model.payload_force, params);
    TrajectoryReport traj_rep = validate_trajectory(sc.model, pr.path, tr.trajectory, sc.eps_p,
                                                    sc.eps_r, sc.base_step, true, true);
    if (!path_rep.ok || !traj_rep.ok) {
      attempt.traj_message = "re-validation of the planned outputs failed";
      report.attempts.push_back(attempt);
      continue;
    }
    attempt.traj_ok = true;
    report.attempts.push_back(attempt);

    report.path_file = (fs::path(out_dir) / "path.json").string();
    report.trajectory_file = (fs::path(out_dir) / "trajectory.json").string();
    report.trajectory_csv_file = (fs::path(out_dir) / "trajectory.csv").string();
    atomic_write(report.path_file, dump_path_json(pr.path));
    atomic_write(report.trajectory_file, dump_trajectory_json(tr.trajectory));
    atomic_write(report.trajectory_csv_file, dump_trajectory_csv(tr.trajectory));

    // torque-unconstrained baseline for side-by-side plots
    TrajectoryResult base = ik_only_trajectory(sc.model, pr.path, *q0, sc.eps_p, sc.eps_r);
    if (base.ok) {
      atomic_write((fs::path(out_dir) / "trajectory_ik.json").string(),
                   dump_trajectory_json(base.trajectory));
    }

    report.status = RunStatus::Success;
    break;
  }

  if (report.status != RunStatus::Success) {
    report.status = saw_timeout ? RunStatus::Timeout : RunStatus::AllGraspsExhausted;
  }
  report.report_file = (fs::path(out_dir) / "report.json").string();
  atomic_write(report.report_file, report_to_json(report, sc).dump(2));
  return report;
}

std::vector<SweepRow> run_sweep(const Scenario& sc, const std::vector<ThicknessPolicy>& policies,
                                const std::vector<uint64_t>& seeds) {
  if (policies.empty() || seeds.empty()) {
    throw ConfigError("run_sweep: need at least one policy and one seed");
  }
  std::vector<GraspCandidate> feasible =
      filter_grasps(sc.grasps, sc.object, sc.start, sc.goal, sc.model, sc.environment, sc.eps_p,
                    sc.eps_r);

  struct Cell {
    bool ok = false;
    double time_s = 0;
    double tmin = 0, tmax = 0;
  };
  const size_t n = policies.size() * seeds.size();
  std::vector<Cell> cells(n);

  auto worker_count = [&]() -> unsigned {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CRUSTPLAN_WORKERS")) {
      long v = std::strtol(env, nullptr, 10);
      if (v > 0) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return std::min<unsigned>(hw, static_cast<unsigned>(n));
  }();

  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t idx = next.fetch_add(1); idx < n; idx = next.fetch_add(1)) {
      size_t pi = idx / seeds.size();
      size_t si = idx % seeds.size();
      PlannerParams params = sc.planner;
      params.thickness = policies[pi];
      params.seed = seeds[si];
      Cell& cell = cells[idx];
      if (feasible.empty()) continue;
      PlanResult pr = plan(sc.environment, sc.object, feasible.front(), sc.load, sc.start,
                           sc.goal, sc.model, params);
      cell.ok = pr.outcome == PlanOutcome::Success;
      cell.time_s = pr.stats.elapsed_s;
      cell.tmin = pr.stats.min_thickness;
      cell.tmax = pr.stats.max_thickness;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w + 1 < worker_count; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<SweepRow> rows;
  for (size_t pi = 0; pi < policies.size(); ++pi) {
    SweepRow row;
    if (policies[pi].dynamic) {
      row.policy = "dynamic";
    } else {
      std::ostringstream os;
      os << "fixed:" << policies[pi].fixed_value;
      row.policy = os.str();
    }
    int ok = 0;
    double time_sum = 0;
    double tmin = std::numeric_limits<double>::infinity(), tmax = 0;
    for (size_t si = 0; si < seeds.size(); ++si) {
      const Cell& c = cells[pi * seeds.size() + si];
      ok += c.ok ? 1 : 0;
      time_sum += c.time_s;
      if (c.ok) {
        tmin = std::min(tmin, c.tmin);
        tmax = std::max(tmax, c.tmax);
      }
    }
    row.success_rate = 100.0 * ok / static_cast<double>(seeds.size());
    row.mean_time_s = time_sum / static_cast<double>(seeds.size());
    row.min_thickness = std::isfinite(tmin) ? tmin : 0;
    row.max_thickness = tmax;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "policy,success_rate,mean_time_s,min_thickness,max_thickness\n";
  for (const auto& r : rows) {
    os << r.policy << "," << r.success_rate << "," << r.mean_time_s << "," << r.min_thickness
       << "," << r.max_thickness << "\n";
  }
  return os.str();
}

namespace {

const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plot hand-force and torque-ratio series emitted next to this script."""
import csv
import os
import sys

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to draw the plots")

here = os.path.dirname(os.path.abspath(__file__))


def read_csv(name):
    path = os.path.join(here, name)
    if not os.path.exists(path):
        return None, None
    with open(path) as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


header, rows = read_csv("hand_force.csv")
if rows:
    t = [r[0] for r in rows]
    f = [r[1] for r in rows]
    fmax = rows[0][2]
    plt.figure()
    plt.plot(t, f, label="|F_h|")
    plt.axhline(fmax, color="r", linestyle="--", label="F_max")
    peak = max(f)
    plt.annotate(f"max {peak:.2f} N", (t[f.index(peak)], peak))
    plt.xlabel("step")
    plt.ylabel("hand force [N]")
    plt.legend()
    plt.savefig(os.path.join(here, "hand_force.png"), dpi=120)

header, rows = read_csv("torques.csv")
ik_header, ik_rows = read_csv("torques_ik.csv")
if rows:
    t = [r[0] for r in rows]
    plt.figure()
    for j in range(1, len(header)):
        plt.plot(t, [r[j] for r in rows], label=header[j])
        if ik_rows:
            plt.plot([r[0] for r in ik_rows], [r[j] for r in ik_rows], linestyle=":",
                     label=header[j] + " (ik)")
    plt.axhline(1.0, color="r", linestyle="--")
    plt.xlabel("step")
    plt.ylabel("torque ratio")
    plt.legend(fontsize=6)
    plt.savefig(os.path.join(here, "torques.png"), dpi=120)
print("plots written to", here)
)PY";

std::string ratios_csv(const JointTrajectory& traj) {
  std::ostringstream os;
  os.precision(17);
  size_t d = traj.steps.empty() ? 0 : traj.steps[0].torque_ratios.size();
  os << "t";
  for (size_t k = 0; k < d; ++k) os << ",ratio" << k;
  os << "\n";
  for (size_t t = 0; t < traj.steps.size(); ++t) {
    os << t;
    for (double r : traj.steps[t].torque_ratios) os << "," << r;
    os << "\n";
  }
  return os.str();
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& run_dir) {
  fs::path dir(run_dir);
  if (!fs::exists(dir / "report.json")) {
    throw ConfigError("emit_plots: no report.json in " + run_dir);
  }
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(read_file((dir / "report.json").string()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("emit_plots: report.json: ") + e.what());
  }
  if (!report.at("files").contains("path")) {
    throw ConfigError("emit_plots: run did not succeed, nothing to plot");
  }
  double f_max = report.value("payload_force", 0.0);

  ObjectPath path =
      load_path_json(read_file((dir / report["files"]["path"].get<std::string>()).string()));
  JointTrajectory traj = load_trajectory_json(
      read_file((dir / report["files"]["trajectory"].get<std::string>()).string()));

  std::vector<std::string> written;
  {
    std::ostringstream os;
    os.precision(17);
    os << "t,hand_force_norm,f_max\n";
    for (size_t t = 0; t < path.nodes.size(); ++t) {
      os << t << "," << path.nodes[t].force.hand_force.norm() << "," << f_max << "\n";
    }
    std::string file = (dir / "hand_force.csv").string();
    atomic_write(file, os.str());
    written.push_back(file);
  }
  {
    std::string file = (dir / "torques.csv").string();
    atomic_write(file, ratios_csv(traj));
    written.push_back(file);
  }
  if (fs::exists(dir / "trajectory_ik.json")) {
    JointTrajectory ik = load_trajectory_json(read_file((dir / "trajectory_ik.json").string()));
    std::string file = (dir / "torques_ik.csv").string();
    atomic_write(file, ratios_csv(ik));
    written.push_back(file);
  }
  {
    std::string file = (dir / "plot.py").string();
    atomic_write(file, kPlotScript);
    written.push_back(file);
  }
  return written;
}

std::vector<std::string> validate_run_dir(const std::string& run_dir) {
  std::vector<std::string> problems;
  fs::path dir(run_dir);
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(read_file((dir / "report.json").string()));
  } catch (const std::exception& e) {
    return {std::string("cannot read report.json: ") + e.what()};
  }
  if (report.value("status", "") != "success") {
    return {"run status is not success; nothing to validate"};
  }
  Scenario sc;
  try {
    sc = load_scenario(report.at("scenario").get<std::string>());
  } catch (const std::exception& e) {
    return {std::string("cannot reload scenario: ") + e.what()};
  }
  try {
    ObjectPath path =
        load_path_json(read_file((dir / report["files"]["path"].get<std::string>()).string()));
    PlannerParams params = sc.planner;
    PathReport pr = validate_path(path, sc.environment, sc.object, sc.model, sc.load,
                                  sc.model.payload_force, params);
    for (const auto& v : pr.violations) {
      std::ostringstream os;
      os << "path node " << v.node << (v.midpoint ? " (midpoint)" : "") << ": " << v.what;
      problems.push_back(os.str());
    }
    JointTrajectory traj = load_trajectory_json(
        read_file((dir / report["files"]["trajectory"].get<std::string>()).string()));
    TrajectoryReport tr = validate_trajectory(sc.model, path, traj, sc.eps_p, sc.eps_r,
                                              sc.base_step, true, true);
    for (const auto& v : tr.violations) {
      std::ostringstream os;
      os << "trajectory step " << v.step << ": " << v.what;
      problems.push_back(os.str());
    }
  } catch (const std::exception& e) {
    problems.push_back(std::string("validation error: ") + e.what());
  }
  return problems;
}

}  // namespace crustplan
