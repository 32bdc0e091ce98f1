#pragma once

#include <vector>

#include "crustplan/pose.hpp"
#include "crustplan/trimesh.hpp"

namespace crustplan {

/// Result of a proximity query between two convex vertex sets.
struct ProximityResult {
  double distance = 0;    // > 0 separated, <= 0 penetrating (negated depth)
  Vec3 witness_a;         // closest / deepest point on A, world frame
  Vec3 witness_b;         // closest / deepest point on B, world frame
};

/// Signed distance between the convex hulls of two posed point sets.
/// GJK for the separated case, EPA for penetration depth.
ProximityResult convex_signed_distance(const std::vector<Vec3>& verts_a, const Pose& pose_a,
                                       const std::vector<Vec3>& verts_b, const Pose& pose_b);

/// Unsigned distance from a point to a triangle, with the closest point.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* closest = nullptr);

/// Closest surface point of a mesh to `p` (brute force over triangles).
double point_mesh_distance(const Vec3& p, const TriMesh& mesh, const Pose& pose,
                           Vec3* closest = nullptr);

/// Watertight convex hull of a point set. Throws GeometryError on degenerate
/// (flat or near-empty) input.
TriMesh convex_hull(const std::vector<Vec3>& points, const std::string& name = "hull");

}  // namespace crustplan
