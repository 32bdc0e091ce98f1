// Command-line surface for the planning pipeline: run scenarios, sweep
// thickness policies, calibrate compliance angles, validate and plot runs.
// Exit codes: 0 success, 1 configuration error, 2 planning or optimization
// failure.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "crustplan/scenario.hpp"

using namespace crustplan;

namespace {

ThicknessPolicy parse_policy(const std::string& text) {
  if (text == "dynamic") return ThicknessPolicy::dynamic_policy();
  if (text.rfind("fixed:", 0) == 0) {
    try {
      double v = std::stod(text.substr(6));
      if (v < 0) throw ConfigError("fixed thickness must be >= 0");
      return ThicknessPolicy::fixed(v);
    } catch (const std::invalid_argument&) {
    }
  }
  throw ConfigError("bad thickness policy '" + text + "' (use dynamic or fixed:<meters>)");
}

const char* status_text(RunStatus s) {
  switch (s) {
    case RunStatus::Success: return "success";
    case RunStatus::AllGraspsExhausted: return "all-grasps-exhausted";
    case RunStatus::Timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contact-rich manipulation planning for overweight objects"};
  app.require_subcommand(1);

  std::string run_scenario, run_out = "run_out";
  uint64_t run_seed = 1;
  auto* run = app.add_subcommand("run", "plan a scenario end to end with grasp retries");
  run->add_option("scenario", run_scenario, "scenario JSON file")->required();
  run->add_option("--seed", run_seed, "random seed");
  run->add_option("--out", run_out, "output directory");

  std::string sweep_scenario, sweep_out = "sweep.csv";
  std::vector<std::string> sweep_policies;
  std::vector<uint64_t> sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "planning-only grid over thickness policies");
  sweep->add_option("scenario", sweep_scenario, "scenario JSON file")->required();
  sweep->add_option("--policies", sweep_policies, "dynamic or fixed:<meters>")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "seed list")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "output CSV file");

  double cal_arm = 0, cal_disp = 0;
  auto* calibrate = app.add_subcommand("calibrate", "compliance angle from a displacement");
  calibrate->add_option("--arm-length", cal_arm, "pivot-to-TCP distance, meters")->required();
  calibrate->add_option("--displacement", cal_disp, "measured TCP displacement, meters")
      ->required();

  std::string validate_dir;
  auto* validate = app.add_subcommand("validate", "re-check an emitted run directory");
  validate->add_option("run_dir", validate_dir, "run output directory")->required();

  std::string plot_dir;
  auto* plot = app.add_subcommand("plot", "emit plot data and script for a run");
  plot->add_option("run_dir", plot_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      Scenario sc = load_scenario(run_scenario);
      RunReport report = run_pipeline(sc, run_seed, run_out);
      std::cout << "status: " << status_text(report.status) << "\n";
      for (const auto& a : report.attempts) {
        std::cout << "  grasp " << a.grasp_id << ": plan "
                  << (a.plan_ok ? "ok" : "failed (" + a.plan_message + ")");
        if (a.plan_ok) {
          std::cout << ", trajectory "
                    << (a.traj_ok ? "ok" : "failed (" + a.traj_message + ")");
        }
        std::cout << "\n";
      }
      if (report.status == RunStatus::Success) {
        std::cout << "outputs: " << report.path_file << ", " << report.trajectory_file << "\n";
        return 0;
      }
      return 2;
    }
    if (sweep->parsed()) {
      std::vector<ThicknessPolicy> policies;
      for (const auto& p : sweep_policies) policies.push_back(parse_policy(p));
      Scenario sc = load_scenario(sweep_scenario);
      auto rows = run_sweep(sc, policies, sweep_seeds);
      std::string csv = sweep_to_csv(rows);
      atomic_write(sweep_out, csv);
      std::cout << csv;
      return 0;
    }
    if (calibrate->parsed()) {
      double rad = calibrate_compliance(cal_arm, cal_disp);
      std::printf("delta_theta: %.6f rad (%.3f deg)\n", rad, rad * 180.0 / M_PI);
      return 0;
    }
    if (validate->parsed()) {
      auto problems = validate_run_dir(validate_dir);
      if (problems.empty()) {
        std::cout << "run validates cleanly\n";
        return 0;
      }
      for (const auto& p : problems) std::cout << p << "\n";
      return 2;
    }
    if (plot->parsed()) {
      for (const auto& f : emit_plots(plot_dir)) std::cout << "wrote " << f << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const ModelError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const GeometryError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const PlanError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
