#pragma once

#include <vector>

#include "crustplan/convex.hpp"
#include "crustplan/pose.hpp"
#include "crustplan/trimesh.hpp"

namespace crustplan {

struct EnvBody {
  TriMesh mesh;
  Pose pose;
  double friction = 0.5;
};

using Environment = std::vector<EnvBody>;

enum class ContactState { Free, Contact, Collision };

struct ContactClassification {
  ContactState state = ContactState::Free;
  double min_separation = 0;  // signed, meters; negative = penetration depth
};

/// Contact points on the object surface with environment normals, feeding the
/// quasistatic wrench balance.
struct ContactSet {
  std::vector<Vec3> points;    // world frame, on object surface
  std::vector<Vec3> normals;   // unit, environment -> object
  std::vector<double> friction;
};

/// Minimum over environment bodies of the signed separation between the
/// object and that body (bodies treated as convex; model non-convex
/// environments as unions of convex parts).
double signed_separation(const TriMesh& object, const Pose& object_pose,
                         const Environment& environment);

/// Unit direction that increases the minimum object-environment separation
/// when the object translates along it. Taken from the closest (or deepest)
/// witness pair of the nearest body.
Vec3 separation_direction(const TriMesh& object, const Pose& object_pose,
                          const Environment& environment);

/// Three-way crust rule: Collision if separation <= 0, Contact if it is in
/// (0, thickness], Free beyond.
ContactClassification classify(const TriMesh& object, const Pose& object_pose,
                               const Environment& environment, double thickness);

/// Representative contact points: object surface samples within `thickness`
/// of the environment, reduced to at most `max_points` by farthest-point
/// subsampling so the patch hull stays covered. Requires Contact state.
ContactSet extract_contacts(const TriMesh& object, const Pose& object_pose,
                            const Environment& environment, double thickness,
                            int max_points = 16, double sample_spacing = 0.005);

/// Dilated object mesh (Minkowski sum with a sphere of radius `thickness`,
/// convex approximation). Debug/visualization only.
TriMesh emit_crust_mesh(const TriMesh& object, double thickness);

}  // namespace crustplan
