#include "crustplan/planner.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

namespace crustplan {

namespace {

Configuration mid_config(const KinematicModel& model) {
  Configuration q(model.dof());
  for (int k = 0; k < model.dof(); ++k) {
    q[k] = 0.5 * (model.joints[k].pos_min + model.joints[k].pos_max);
  }
  return q;
}

nlohmann::json pose_to_json(const Pose& p) {
  std::vector<double> rot(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot[3 * r + c] = p.rotation(r, c);
  return {{"xyz", std::vector<double>{p.translation.x(), p.translation.y(), p.translation.z()}},
          {"rotation", rot}};
}

Pose pose_from_json(const nlohmann::json& j) {
  Pose p;
  auto t = j.at("xyz");
  p.translation = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  auto r = j.at("rotation");
  for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = r.at(i).get<double>();
  if (!p.is_orthonormal(1e-6)) throw PlanError("pose rotation is not orthonormal");
  p.rotation = project_to_so3(p.rotation);
  return p;
}

// Weighted SE(3) metric used by the tree and the goal test.
double pose_distance(const Pose& a, const Pose& b, double rot_weight) {
  return (a.translation - b.translation).norm() +
         rot_weight * rotation_angle(a.rotation, b.rotation);
}

struct NodeContext {
  const Environment& env;
  const TriMesh& object;
  const KinematicModel& model;
  const GravityLoad& load;
  const Pose& grasp_offset;
  const PlannerParams& params;
  double f_max;
  PlanStats* stats = nullptr;

  // Classify and certify one pose; nullopt on any constraint violation.
  std::optional<HandForceSolution> evaluate(const Pose& pose, double thickness,
                                            bool allow_free) const {
    ContactClassification c;
    try {
      c = classify(object, pose, env, std::max(thickness, 0.0));
    } catch (const GeometryError&) {
      if (stats) ++stats->rejected_contact;
      return std::nullopt;
    }
    Vec3 grasp_pt = pose.compose(grasp_offset).translation;
    Vec3 com_w = pose.apply(load.com);
    try {
      if (c.state == ContactState::Collision || (c.state == ContactState::Free && !allow_free)) {
        if (stats) ++stats->rejected_contact;
        return std::nullopt;
      }
      if (c.state == ContactState::Free) {
        ContactSet none;
        FrictionConeBasis no_cones;
        HandForceSolution sol = solve_min_hand_force(none, no_cones, load, com_w, grasp_pt, f_max);
        if (!sol.feasible) {
          if (stats) ++stats->rejected_force;
          return std::nullopt;
        }
        return sol;
      }
      ContactSet contacts = extract_contacts(object, pose, env, thickness, params.max_contacts,
                                             params.contact_sample_spacing);
      FrictionConeBasis cones = build_cones(contacts, params.cone_edges);
      HandForceSolution sol = solve_min_hand_force(contacts, cones, load, com_w, grasp_pt, f_max);
      if (!sol.feasible) {
        if (stats) ++stats->rejected_force;
        return std::nullopt;
      }
      return sol;
    } catch (const SolverError&) {
      if (stats) ++stats->rejected_force;
      return std::nullopt;
    }
  }

  std::optional<PlanNode> make_node(const Pose& pose, double thickness, const Configuration& q,
                                    int parent, bool allow_free) const {
    auto sol = evaluate(pose, thickness, allow_free);
    if (!sol) return std::nullopt;
    PlanNode node;
    node.object_pose = pose;
    node.hand_pose = pose.compose(grasp_offset);
    node.force = *sol;
    node.thickness = thickness;
    node.q = q;
    node.parent = parent;
    return node;
  }

  bool midpoint_ok(const PlanNode& a, const PlanNode& b, bool allow_free) const {
    Pose mid = interpolate(a.object_pose, b.object_pose, 0.5);
    double t = 0.5 * (a.thickness + b.thickness);
    return evaluate(mid, t, allow_free).has_value();
  }
};

}  // namespace

std::vector<GraspCandidate> load_grasps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PlanError("cannot open grasp file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw PlanError("grasp file '" + path + "': " + e.what());
  }
  const nlohmann::json& list = doc.is_array() ? doc : doc.at("grasps");
  std::vector<GraspCandidate> grasps;
  for (const auto& g : list) {
    GraspCandidate cand;
    cand.id = g.at("id").get<std::string>();
    auto t = g.at("xyz");
    cand.hand_in_object.translation =
        Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    if (g.contains("rpy")) {
      auto v = g.at("rpy");
      cand.hand_in_object.rotation =
          (Eigen::AngleAxisd(v.at(2).get<double>(), Vec3::UnitZ()) *
           Eigen::AngleAxisd(v.at(1).get<double>(), Vec3::UnitY()) *
           Eigen::AngleAxisd(v.at(0).get<double>(), Vec3::UnitX()))
              .toRotationMatrix();
    }
    for (const auto& prev : grasps) {
      if (prev.id == cand.id) throw PlanError("duplicate grasp id: " + cand.id);
    }
    grasps.push_back(cand);
  }
  return grasps;
}

std::vector<GraspCandidate> filter_grasps(const std::vector<GraspCandidate>& candidates,
                                          const TriMesh& object, const Pose& start,
                                          const Pose& goal, const KinematicModel& model,
                                          const Environment& environment, double eps_p,
                                          double eps_r) {
  if (candidates.empty()) throw PlanError("filter_grasps: empty candidate set");
  (void)object;
  std::optional<TriMesh> hand_mesh;
  if (!model.hand_mesh_path.empty()) hand_mesh = load_mesh(model.hand_mesh_path);

  Configuration seed = mid_config(model);
  std::vector<GraspCandidate> kept;
  for (const auto& g : candidates) {
    bool ok = true;
    for (const Pose& obj_pose : {start, goal}) {
      Pose hand = obj_pose.compose(g.hand_in_object);
      if (hand_mesh && signed_separation(*hand_mesh, hand, environment) <= 0) {
        ok = false;
        break;
      }
      if (!ik_solve(model, hand, seed, eps_p, eps_r)) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(g);
  }
  return kept;
}

std::optional<Pose> project_to_contact(const TriMesh& object, const Pose& pose,
                                       const Environment& environment, double thickness,
                                       int max_steps) {
  if (thickness <= 0) return std::nullopt;
  Pose p = pose;
  for (int step = 0; step < max_steps; ++step) {
    double s = signed_separation(object, p, environment);
    if (s > 0 && s <= thickness) return p;
    Vec3 dir = separation_direction(object, p, environment);
    // aim for the middle of the crust band
    p.translation += dir * (0.5 * thickness - s);
  }
  return std::nullopt;
}

std::optional<ContactSample> sample_contact_pose(const TriMesh& object, const PlanNode& current,
                                                 const Pose& target, const PlannerParams& params,
                                                 const Environment& environment,
                                                 const KinematicModel& model,
                                                 const Pose& grasp_offset) {
  // steer toward the target within the step bounds
  Vec3 dt = target.translation - current.object_pose.translation;
  Vec3 rv = rotation_log(current.object_pose.rotation.transpose() * target.rotation);
  double sc = 1.0;
  if (dt.norm() > params.translation_step) sc = std::min(sc, params.translation_step / dt.norm());
  if (rv.norm() > params.rotation_step) sc = std::min(sc, params.rotation_step / rv.norm());
  Pose steered{current.object_pose.rotation * rotation_exp(sc * rv),
               current.object_pose.translation + sc * dt};

  IkOptions ik_opts;
  ik_opts.restarts = 8;
  ik_opts.iterations = 60;
  Configuration seed = current.q.size() == model.dof() ? current.q : mid_config(model);

  double t_est;
  if (!params.thickness.dynamic) {
    t_est = params.thickness.fixed_value;
  } else if (current.thickness > 0) {
    t_est = current.thickness;
  } else {
    auto q0 = ik_solve(model, steered.compose(grasp_offset), seed, params.ik_pos_tol,
                       params.ik_rot_tol, ik_opts);
    if (!q0) return std::nullopt;
    t_est = crust_thickness(model, *q0);
    seed = *q0;
  }

  auto projected = project_to_contact(object, steered, environment, t_est);
  if (!projected) return std::nullopt;

  if (!params.thickness.dynamic) {
    return ContactSample{*projected, params.thickness.fixed_value, Configuration()};
  }

  // thickness at the pose actually reached, from the IK estimate there
  for (int round = 0; round < 2; ++round) {
    auto q = ik_solve(model, projected->compose(grasp_offset), seed, params.ik_pos_tol,
                      params.ik_rot_tol, ik_opts);
    if (!q) return std::nullopt;
    double t = crust_thickness(model, *q);
    double s = signed_separation(object, *projected, environment);
    if (s > 0 && s <= t) return ContactSample{*projected, t, *q};
    projected = project_to_contact(object, *projected, environment, t);
    if (!projected) return std::nullopt;
    seed = *q;
  }
  return std::nullopt;
}

PlanResult plan(const Environment& environment, const TriMesh& object,
                const GraspCandidate& grasp, const GravityLoad& load, const Pose& start,
                const Pose& goal, const KinematicModel& model, const PlannerParams& params) {
  if (model.payload_force <= 0) throw PlanError("plan: model has no payload force limit");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  PlanResult result;
  NodeContext ctx{environment, object,       model,  load, grasp.hand_in_object,
                  params,      model.payload_force, &result.stats};

  IkOptions ik_opts;
  ik_opts.restarts = 32;
  ik_opts.iterations = 80;

  auto endpoint_node = [&](const Pose& pose, int parent) -> std::optional<PlanNode> {
    double t;
    Configuration q;
    if (params.thickness.dynamic) {
      auto sol = ik_solve(model, pose.compose(grasp.hand_in_object), mid_config(model),
                          params.ik_pos_tol, params.ik_rot_tol, ik_opts);
      if (!sol) return std::nullopt;
      q = *sol;
      t = crust_thickness(model, q);
    } else {
      t = params.thickness.fixed_value;
    }
    return ctx.make_node(pose, t, q, parent, /*allow_free=*/true);
  };

  auto start_node = endpoint_node(start, -1);
  if (!start_node) {
    result.outcome = PlanOutcome::InvalidEndpoint;
    result.message = "start pose violates the contact or force constraint";
    result.stats.elapsed_s = elapsed();
    return result;
  }
  // fail fast when the goal itself cannot be certified
  if (!endpoint_node(goal, -1)) {
    result.outcome = PlanOutcome::InvalidEndpoint;
    result.message = "goal pose violates the contact or force constraint";
    result.stats.elapsed_s = elapsed();
    return result;
  }

  std::vector<PlanNode> tree{*start_node};
  result.stats.min_thickness = result.stats.max_thickness = start_node->thickness;
  auto note_thickness = [&](double t) {
    result.stats.min_thickness = std::min(result.stats.min_thickness, t);
    result.stats.max_thickness = std::max(result.stats.max_thickness, t);
  };

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vec3 lo = start.translation.cwiseMin(goal.translation);
  Vec3 hi = start.translation.cwiseMax(goal.translation);
  for (int k = 0; k < 3; ++k) {
    double margin = std::max(0.25, 0.5 * (hi[k] - lo[k]));
    if (k == 1 && params.sample_margin_y >= 0.0) margin = params.sample_margin_y;
    lo[k] -= margin;
    hi[k] += margin;
  }

  const bool fixed_axis = params.rotation_sample_axis.norm() > 1e-9;
  const Vec3 sample_axis =
      fixed_axis ? params.rotation_sample_axis.normalized() : Vec3::UnitZ();

  auto random_pose = [&]() -> Pose {
    Vec3 t;
    for (int k = 0; k < 3; ++k) t[k] = lo[k] + uni(rng) * (hi[k] - lo[k]);
    Mat3 base = interpolate(start, goal, uni(rng)).rotation;
    Vec3 axis = sample_axis;
    if (!fixed_axis) {
      axis = Vec3(gauss(rng), gauss(rng), gauss(rng));
      double n = axis.norm();
      if (n < 1e-9) axis = Vec3::UnitZ(); else axis /= n;
    }
    // a fixed axis needs a signed angle; a random axis covers both signs itself
    double u = uni(rng);
    double angle = (fixed_axis ? 2.0 * u - 1.0 : u) * params.rotation_sample_range;
    return {base * axis_angle(axis, angle), t};
  };

  auto near_goal = [&](const Pose& p) {
    return (p.translation - goal.translation).norm() <= params.goal_pos_tol &&
           rotation_angle(p.rotation, goal.rotation) <= params.goal_rot_tol;
  };

  int goal_index = -1;
  if (near_goal(start)) {
    goal_index = 0;
  }

  for (int it = 0; goal_index < 0 && it < params.max_iterations; ++it) {
    result.stats.iterations = it + 1;
    if (elapsed() > params.max_time_s) {
      result.outcome = PlanOutcome::Timeout;
      result.message = "planning time cap exceeded";
      result.stats.tree_nodes = static_cast<int>(tree.size());
      result.stats.elapsed_s = elapsed();
      return result;
    }

    Pose target = uni(rng) < params.goal_bias ? goal : random_pose();
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < tree.size(); ++i) {
      double d = pose_distance(tree[i].object_pose, target, params.metric_rotation_weight);
      if (d < best) {
        best = d;
        nearest = static_cast<int>(i);
      }
    }

    auto sample =
        sample_contact_pose(object, tree[nearest], target, params, environment, model,
                            grasp.hand_in_object);
    if (!sample) {
      ++result.stats.rejected_projection;
      continue;
    }
    auto node = ctx.make_node(sample->pose, sample->thickness, sample->q, nearest,
                              /*allow_free=*/false);
    if (!node) continue;
    if (!ctx.midpoint_ok(tree[nearest], *node, /*allow_free=*/false)) {
      ++result.stats.rejected_contact;
      continue;
    }
    tree.push_back(*node);
    note_thickness(node->thickness);

    if (near_goal(node->object_pose)) {
      auto goal_node = endpoint_node(goal, static_cast<int>(tree.size()) - 1);
      if (goal_node && ctx.midpoint_ok(tree.back(), *goal_node, /*allow_free=*/true)) {
        tree.push_back(*goal_node);
        note_thickness(goal_node->thickness);
        goal_index = static_cast<int>(tree.size()) - 1;
      }
    }
  }

  result.stats.tree_nodes = static_cast<int>(tree.size());
  if (goal_index < 0) {
    result.outcome = PlanOutcome::IterationsExhausted;
    result.message = "iteration budget exhausted";
    result.stats.elapsed_s = elapsed();
    return result;
  }

  std::vector<PlanNode> path;
  for (int i = goal_index; i >= 0; i = tree[i].parent) path.push_back(tree[i]);
  std::reverse(path.begin(), path.end());

  // shortcut smoothing with full re-validation of the spliced nodes
  IkOptions smooth_ik;
  smooth_ik.restarts = 8;
  smooth_ik.iterations = 60;
  for (int it = 0; it < params.smoothing_iterations && path.size() > 2; ++it) {
    if (elapsed() > params.max_time_s) break;
    int n = static_cast<int>(path.size());
    int i = static_cast<int>(uni(rng) * (n - 2));
    int j = i + 2 + static_cast<int>(uni(rng) * (n - i - 2));
    i = std::min(i, n - 3);
    j = std::min(j, n - 1);

    const PlanNode& a = path[i];
    const PlanNode& b = path[j];
    double dist = (b.object_pose.translation - a.object_pose.translation).norm();
    double ang = rotation_angle(a.object_pose.rotation, b.object_pose.rotation);
    int steps = std::max(
        1, static_cast<int>(std::ceil(
               std::max(dist / params.translation_step, ang / params.rotation_step))));
    if (steps >= j - i) continue;  // shortcut would not shrink the path

    std::vector<PlanNode> repl;
    Configuration seed = a.q.size() == model.dof() ? a.q : mid_config(model);
    const PlanNode* prev = &a;
    bool ok = true;
    for (int k = 1; k < steps && ok; ++k) {
      Pose p = interpolate(a.object_pose, b.object_pose, static_cast<double>(k) / steps);
      double t;
      Configuration q;
      if (params.thickness.dynamic) {
        auto sol = ik_solve(model, p.compose(grasp.hand_in_object), seed, params.ik_pos_tol,
                            params.ik_rot_tol, smooth_ik);
        if (!sol) {
          ok = false;
          break;
        }
        q = *sol;
        t = crust_thickness(model, q);
        seed = q;
      } else {
        t = params.thickness.fixed_value;
      }
      auto node = ctx.make_node(p, t, q, 0, /*allow_free=*/false);
      if (!node || !ctx.midpoint_ok(*prev, *node, /*allow_free=*/false)) {
        ok = false;
        break;
      }
      repl.push_back(*node);
      prev = &repl.back();
    }
    if (!ok || !ctx.midpoint_ok(*prev, b, j == n - 1)) continue;

    std::vector<PlanNode> shorter(path.begin(), path.begin() + i + 1);
    shorter.insert(shorter.end(), repl.begin(), repl.end());
    shorter.insert(shorter.end(), path.begin() + j, path.end());
    path = std::move(shorter);
  }

  for (size_t i = 0; i < path.size(); ++i) {
    path[i].parent = static_cast<int>(i) - 1;
    if (i > 0) note_thickness(path[i].thickness);
  }
  result.outcome = PlanOutcome::Success;
  result.path.grasp_id = grasp.id;
  result.path.grasp_offset = grasp.hand_in_object;
  result.path.nodes = std::move(path);
  result.stats.elapsed_s = elapsed();
  return result;
}

PathReport validate_path(const ObjectPath& path, const Environment& environment,
                         const TriMesh& object, const KinematicModel& model,
                         const GravityLoad& load, double f_max, const PlannerParams& params) {
  PathReport report;
  if (path.nodes.empty()) throw PlanError("validate_path: empty path");

  PlanStats scratch;
  NodeContext ctx{environment, object, model, load, path.grasp_offset, params, f_max, &scratch};

  const int n = static_cast<int>(path.nodes.size());
  for (int i = 0; i < n; ++i) {
    const PlanNode& node = path.nodes[i];
    Pose expected = node.object_pose.compose(path.grasp_offset);
    // entrywise rotation comparison: acos in rotation_angle amplifies the
    // rounding of a bitwise-equal but non-orthonormal product to ~1e-8
    if ((expected.translation - node.hand_pose.translation).norm() > 1e-9 ||
        (expected.rotation - node.hand_pose.rotation).cwiseAbs().maxCoeff() > 1e-9) {
      report.violations.push_back({i, false, "hand pose is not object pose * grasp offset"});
    }
    bool endpoint = i == 0 || i == n - 1;
    if (!ctx.evaluate(node.object_pose, node.thickness, endpoint)) {
      report.violations.push_back({i, false, "contact or force constraint violated"});
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    Pose mid = interpolate(path.nodes[i].object_pose, path.nodes[i + 1].object_pose, 0.5);
    double t = 0.5 * (path.nodes[i].thickness + path.nodes[i + 1].thickness);
    bool near_endpoint = i == 0 || i + 1 == n - 1;
    if (!ctx.evaluate(mid, t, near_endpoint)) {
      report.violations.push_back({i, true, "contact or force constraint violated at midpoint"});
    }
  }
  report.ok = report.violations.empty();
  return report;
}

std::string dump_path_json(const ObjectPath& path) {
  nlohmann::json doc;
  doc["grasp_id"] = path.grasp_id;
  doc["grasp_offset"] = pose_to_json(path.grasp_offset);
  doc["nodes"] = nlohmann::json::array();
  for (size_t i = 0; i < path.nodes.size(); ++i) {
    const PlanNode& node = path.nodes[i];
    nlohmann::json j;
    j["t"] = i;
    j["object_pose"] = pose_to_json(node.object_pose);
    j["hand_pose"] = pose_to_json(node.hand_pose);
    j["hand_force"] = {node.force.hand_force.x(), node.force.hand_force.y(),
                       node.force.hand_force.z()};
    j["thickness"] = node.thickness;
    if (node.q.size() > 0) {
      j["q"] = std::vector<double>(node.q.data(), node.q.data() + node.q.size());
    }
    doc["nodes"].push_back(j);
  }
  return doc.dump(2);
}

ObjectPath load_path_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(std::string("path json: ") + e.what());
  }
  ObjectPath path;
  try {
    path.grasp_id = doc.at("grasp_id").get<std::string>();
    path.grasp_offset = pose_from_json(doc.at("grasp_offset"));
    for (const auto& j : doc.at("nodes")) {
      PlanNode node;
      node.object_pose = pose_from_json(j.at("object_pose"));
      node.hand_pose = pose_from_json(j.at("hand_pose"));
      auto f = j.at("hand_force");
      node.force.hand_force =
          Vec3(f.at(0).get<double>(), f.at(1).get<double>(), f.at(2).get<double>());
      node.thickness = j.at("thickness").get<double>();
      if (j.contains("q")) {
        auto qv = j.at("q").get<std::vector<double>>();
        node.q = Eigen::Map<const Eigen::VectorXd>(qv.data(), qv.size());
      }
      node.parent = static_cast<int>(path.nodes.size()) - 1;
      path.nodes.push_back(node);
    }
  } catch (const nlohmann::json::exception& e) {
    throw PlanError(std::string("path json: ") + e.what());
  }
  return path;
}

}  // namespace crustplan
