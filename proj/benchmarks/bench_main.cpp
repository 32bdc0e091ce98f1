// Microbenchmarks for the hot paths: convex separation queries, the
// minimum-hand-force solve, and a small end-to-end plan.
#include <benchmark/benchmark.h>

#include "crustplan/contact.hpp"
#include "crustplan/planner.hpp"
#include "crustplan/quasistatics.hpp"

using namespace crustplan;

namespace {

Environment slab_env() {
  EnvBody body;
  body.mesh = make_box(Vec3(0.6, 0.4, 0.05));
  body.pose.translation = Vec3(0, 0, -0.05);
  body.friction = 0.5;
  return {body};
}

TriMesh small_box() { return make_box(Vec3(0.1, 0.1, 0.05)); }

KinematicModel bench_model() {
  KinematicModel m;
  m.name = "bench";
  auto add = [&](JointType type, const Vec3& axis, const Vec3& origin, double lo, double hi,
                 double tq) {
    Joint j;
    j.type = type;
    j.axis = axis;
    j.parent_transform.translation = origin;
    j.pos_min = lo;
    j.pos_max = hi;
    j.torque_min = -tq;
    j.torque_max = tq;
    m.joints.push_back(j);
  };
  add(JointType::Prismatic, Vec3::UnitX(), Vec3::Zero(), -5, 5, 500);
  add(JointType::Prismatic, Vec3::UnitY(), Vec3::Zero(), -5, 5, 500);
  add(JointType::Revolute, Vec3::UnitZ(), Vec3::Zero(), -3.2, 3.2, 500);
  add(JointType::Revolute, Vec3::UnitY(), Vec3(0, 0, 0.4), -3.1, 3.1, 100);
  add(JointType::Revolute, Vec3::UnitY(), Vec3(0.5, 0, 0), -3.1, 3.1, 100);
  add(JointType::Revolute, Vec3::UnitY(), Vec3(0.5, 0, 0), -3.1, 3.1, 100);
  m.base_joint_count = 3;
  m.base_pivot = Vec3(0, 0, 0.1);
  m.delta_theta_x = 0.00873;
  m.delta_theta_y = 0.015;
  m.tcp_offset.translation = Vec3(0.2, 0, 0);
  m.payload_force = 18.3;
  return m;
}

void bm_signed_separation(benchmark::State& state) {
  Environment env = slab_env();
  TriMesh object = small_box();
  Pose pose;
  pose.translation = Vec3(0.1, 0.05, 0.051);
  for (auto _ : state) {
    benchmark::DoNotOptimize(signed_separation(object, pose, env));
  }
}
BENCHMARK(bm_signed_separation);

void bm_classify(benchmark::State& state) {
  Environment env = slab_env();
  TriMesh object = small_box();
  Pose pose;
  pose.translation = Vec3(0.1, 0.05, 0.051);
  for (auto _ : state) {
    benchmark::DoNotOptimize(classify(object, pose, env, 0.02));
  }
}
BENCHMARK(bm_classify);

void bm_min_hand_force(benchmark::State& state) {
  Environment env = slab_env();
  TriMesh object = small_box();
  Pose pose;
  pose.translation = Vec3(0.45, 0, 0.051);  // partial overhang, nonzero force
  GravityLoad load;
  load.mass = 2.0;
  auto contacts =
      extract_contacts(object, pose, env, 0.02, static_cast<int>(state.range(0)), 0.01);
  auto cones = build_cones(contacts, 8);
  Vec3 grasp = pose.apply(Vec3(0, 0, 0.06));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_min_hand_force(contacts, cones, load, pose.apply(load.com), grasp, 18.3));
  }
}
BENCHMARK(bm_min_hand_force)->Arg(4)->Arg(8)->Arg(16);

void bm_plan_slide(benchmark::State& state) {
  Environment env = slab_env();
  TriMesh object = small_box();
  KinematicModel model = bench_model();
  GravityLoad load;
  load.mass = 1.0;
  GraspCandidate grasp;
  grasp.id = "top";
  grasp.hand_in_object.translation = Vec3(0, 0, 0.06);
  Pose start, goal;
  start.translation = Vec3(0, 0, 0.051);
  goal.translation = Vec3(0.3, 0, 0.051);
  PlannerParams params;
  params.thickness = ThicknessPolicy::fixed(0.02);
  params.max_iterations = 4000;
  params.smoothing_iterations = 60;
  params.max_time_s = 60;
  for (auto _ : state) {
    params.seed = 7;
    benchmark::DoNotOptimize(plan(env, object, grasp, load, start, goal, model, params));
  }
}
BENCHMARK(bm_plan_slide)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
