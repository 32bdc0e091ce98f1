#include "crustplan/contact.hpp"

#include <algorithm>
#include <limits>

namespace crustplan {

namespace {

void check_mesh(const TriMesh& m) {
  if (!m.watertight) {
    throw GeometryError("mesh '" + m.name + "': not watertight");
  }
}

struct ClosestFeature {
  double distance;
  Vec3 point;        // on the environment body, world frame
  Vec3 face_normal;  // outward normal of the closest triangle, world frame
};

ClosestFeature closest_env_feature(const Vec3& p_world, const EnvBody& body) {
  Vec3 p = body.pose.inverse().apply(p_world);
  ClosestFeature best;
  best.distance = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < body.mesh.triangles.size(); ++t) {
    const auto& tri = body.mesh.triangles[t];
    Vec3 cl;
    double d = point_triangle_distance(p, body.mesh.vertices[tri[0]], body.mesh.vertices[tri[1]],
                                       body.mesh.vertices[tri[2]], &cl);
    if (d < best.distance) {
      best.distance = d;
      best.point = body.pose.apply(cl);
      best.face_normal = body.pose.rotation * body.mesh.triangle_normal(static_cast<int>(t));
    }
  }
  return best;
}

}  // namespace

double signed_separation(const TriMesh& object, const Pose& object_pose,
                         const Environment& environment) {
  check_mesh(object);
  if (environment.empty()) {
    throw GeometryError("signed_separation: empty environment");
  }
  double min_sep = std::numeric_limits<double>::infinity();
  for (const auto& body : environment) {
    check_mesh(body.mesh);
    ProximityResult r =
        convex_signed_distance(object.vertices, object_pose, body.mesh.vertices, body.pose);
    min_sep = std::min(min_sep, r.distance);
  }
  return min_sep;
}

Vec3 separation_direction(const TriMesh& object, const Pose& object_pose,
                          const Environment& environment) {
  check_mesh(object);
  if (environment.empty()) {
    throw GeometryError("separation_direction: empty environment");
  }
  double min_sep = std::numeric_limits<double>::infinity();
  ProximityResult nearest;
  for (const auto& body : environment) {
    check_mesh(body.mesh);
    ProximityResult r =
        convex_signed_distance(object.vertices, object_pose, body.mesh.vertices, body.pose);
    if (r.distance < min_sep) {
      min_sep = r.distance;
      nearest = r;
    }
  }
  Vec3 d = nearest.witness_a - nearest.witness_b;
  if (min_sep < 0) d = -d;
  double n = d.norm();
  return n > 1e-12 ? Vec3(d / n) : Vec3::UnitZ();
}

ContactClassification classify(const TriMesh& object, const Pose& object_pose,
                               const Environment& environment, double thickness) {
  if (thickness < 0) {
    throw GeometryError("classify: negative crust thickness");
  }
  ContactClassification c;
  c.min_separation = signed_separation(object, object_pose, environment);
  if (c.min_separation <= 0) {
    c.state = ContactState::Collision;
  } else if (c.min_separation <= thickness) {
    c.state = ContactState::Contact;
  } else {
    c.state = ContactState::Free;
  }
  return c;
}

ContactSet extract_contacts(const TriMesh& object, const Pose& object_pose,
                            const Environment& environment, double thickness,
                            int max_points, double sample_spacing) {
  ContactClassification c = classify(object, object_pose, environment, thickness);
  if (c.state != ContactState::Contact) {
    throw GeometryError("extract_contacts: object is not in Contact state");
  }

  // Candidate surface samples near each environment body. Prune triangles by
  // AABB distance before the fine sampling pass.
  struct Candidate {
    Vec3 point;
    Vec3 normal;
    double friction;
    double distance;
  };
  std::vector<Candidate> candidates;

  for (const auto& body : environment) {
    Vec3 blo, bhi;
    body.mesh.bounding_box(blo, bhi);
    // world-space AABB of the posed body, inflated by the crust band
    Vec3 corners[8];
    for (int i = 0; i < 8; ++i) {
      corners[i] = body.pose.apply({(i & 1) ? bhi.x() : blo.x(), (i & 2) ? bhi.y() : blo.y(),
                                    (i & 4) ? bhi.z() : blo.z()});
    }
    Vec3 wlo = corners[0], whi = corners[0];
    for (int i = 1; i < 8; ++i) {
      wlo = wlo.cwiseMin(corners[i]);
      whi = whi.cwiseMax(corners[i]);
    }
    wlo -= Vec3::Constant(thickness * 1.001);
    whi += Vec3::Constant(thickness * 1.001);

    TriMesh near;
    near.name = object.name;
    near.vertices = object.vertices;
    for (const auto& t : object.triangles) {
      Vec3 tlo = Vec3::Constant(std::numeric_limits<double>::infinity()), thi = -tlo;
      for (int k = 0; k < 3; ++k) {
        Vec3 w = object_pose.apply(object.vertices[t[k]]);
        tlo = tlo.cwiseMin(w);
        thi = thi.cwiseMax(w);
      }
      if ((tlo.array() <= whi.array()).all() && (thi.array() >= wlo.array()).all()) {
        near.triangles.push_back(t);
      }
    }
    if (near.triangles.empty()) continue;

    std::vector<Candidate> body_candidates;
    double body_min = std::numeric_limits<double>::infinity();
    for (const Vec3& p_local : sample_surface(near, sample_spacing)) {
      Vec3 p = object_pose.apply(p_local);
      if ((p.array() < wlo.array()).any() || (p.array() > whi.array()).any()) continue;
      ClosestFeature f = closest_env_feature(p, body);
      if (f.distance > thickness) continue;
      Vec3 n;
      if (f.distance > 1e-9) {
        n = (p - f.point).normalized();
      } else {
        n = f.face_normal;
      }
      body_candidates.push_back({p, n, body.friction, f.distance});
      body_min = std::min(body_min, f.distance);
    }
    // The patch against this body is the set of nearly-closest points; samples
    // deeper into the band belong to the gap, not the contact.
    const double slack = 1e-3;
    for (const auto& cand : body_candidates) {
      if (cand.distance <= body_min + slack) candidates.push_back(cand);
    }
  }

  if (candidates.empty()) {
    // The hulls are within the band but no sampled surface point is; fall
    // back to the single closest object vertex.
    double best = std::numeric_limits<double>::infinity();
    Candidate pick{};
    for (const auto& body : environment) {
      for (const auto& v : object.vertices) {
        Vec3 p = object_pose.apply(v);
        ClosestFeature f = closest_env_feature(p, body);
        if (f.distance < best) {
          best = f.distance;
          Vec3 n = f.distance > 1e-9 ? Vec3((p - f.point).normalized()) : f.face_normal;
          pick = {p, n, body.friction, f.distance};
        }
      }
    }
    candidates.push_back(pick);
  }

  // Farthest-point subsampling, seeded at the closest candidate so the
  // deepest contact always survives.
  std::vector<int> selected;
  int seed = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].distance < candidates[seed].distance) seed = static_cast<int>(i);
  }
  selected.push_back(seed);
  std::vector<double> min_d(candidates.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(selected.size()) < max_points &&
         selected.size() < candidates.size()) {
    int last = selected.back();
    int far = -1;
    double far_d = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
      min_d[i] = std::min(min_d[i], (candidates[i].point - candidates[last].point).squaredNorm());
      if (min_d[i] > far_d) {
        far_d = min_d[i];
        far = static_cast<int>(i);
      }
    }
    if (far_d < 1e-16) break;  // all remaining candidates coincide with picks
    selected.push_back(far);
  }

  ContactSet set;
  for (int i : selected) {
    set.points.push_back(candidates[i].point);
    set.normals.push_back(candidates[i].normal);
    set.friction.push_back(candidates[i].friction);
  }
  return set;
}

TriMesh emit_crust_mesh(const TriMesh& object, double thickness) {
  if (thickness <= 0) {
    throw GeometryError("emit_crust_mesh: thickness must be positive");
  }
  check_mesh(object);

  // Offset every hull vertex along a dense set of sphere directions and hull
  // the result: a convex approximation of the Minkowski sum with the sphere.
  TriMesh hull = convex_hull(object.vertices, object.name + "_hull");
  TriMesh sphere = make_icosphere(1.0, 2);
  std::vector<Vec3> cloud;
  cloud.reserve(hull.vertices.size() * sphere.vertices.size());
  for (const auto& v : hull.vertices) {
    for (const auto& d : sphere.vertices) {
      cloud.push_back(v + thickness * d);
    }
  }
  return convex_hull(cloud, object.name + "_crust");
}

}  // namespace crustplan
