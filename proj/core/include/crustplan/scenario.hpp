#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "crustplan/planner.hpp"
#include "crustplan/trajectory.hpp"

namespace crustplan {

/// Bad input files or references; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A full task description: object, environment, robot, grasp candidates,
/// start and goal object poses, planning parameters. File references in the
/// scenario document resolve relative to its directory.
struct Scenario {
  std::string name;
  std::string source_path;  // absolute path of the scenario file
  TriMesh object;
  GravityLoad load;
  Environment environment;
  KinematicModel model;
  std::vector<GraspCandidate> grasps;
  Pose start;
  Pose goal;
  PlannerParams planner;
  double eps_p = 0.005;
  double eps_r = 0.0349066;
  double base_step = 0.05;
};

Scenario load_scenario(const std::string& path);

struct GraspAttempt {
  std::string grasp_id;
  bool plan_ok = false;
  bool traj_ok = false;
  std::string plan_message;
  std::string traj_message;
  double plan_time_s = 0;
  double traj_time_s = 0;
};

enum class RunStatus { Success, AllGraspsExhausted, Timeout };

struct RunReport {
  RunStatus status = RunStatus::AllGraspsExhausted;
  std::vector<GraspAttempt> attempts;
  uint64_t seed = 0;
  std::string path_file;
  std::string trajectory_file;
  std::string trajectory_csv_file;
  std::string report_file;
};

/// Grasp-retry workflow: filter grasps, then for each candidate in order
/// plan the object motion and optimize the robot trajectory; the first grasp
/// that passes both stages wins. Outputs land in `out_dir` (created if
/// needed) and are re-validated before success is reported.
RunReport run_pipeline(const Scenario& scenario, uint64_t seed, const std::string& out_dir);

/// Compliance angle from a measured TCP displacement at a given arm length.
double calibrate_compliance(double l_arm, double delta_d);

struct SweepRow {
  std::string policy;
  double success_rate = 0;  // percent
  double mean_time_s = 0;
  double min_thickness = 0;
  double max_thickness = 0;
};

/// Planning-only experiment grid over thickness policies and seeds. Runs are
/// distributed over a worker pool capped by the CRUSTPLAN_WORKERS
/// environment variable; aggregation is deterministic.
std::vector<SweepRow> run_sweep(const Scenario& scenario,
                                const std::vector<ThicknessPolicy>& policies,
                                const std::vector<uint64_t>& seeds);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Plot data derived from a finished run directory: hand-force series,
/// per-joint torque-ratio series, and a standalone plotting script that
/// consumes only those CSVs. Returns the files written.
std::vector<std::string> emit_plots(const std::string& run_dir);

/// Re-check an emitted run directory from its files alone.
/// Returns a human-readable list of problems, empty when everything passes.
std::vector<std::string> validate_run_dir(const std::string& run_dir);

/// Write-then-rename so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace crustplan
