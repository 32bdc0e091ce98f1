#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "crustplan/pose.hpp"

namespace crustplan {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Triangle mesh in meters. Indices are validated and zero-area triangles are
/// dropped at load time. Watertight meshes are closed 2-manifolds with
/// consistent outward orientation (signed volume > 0).
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  bool watertight = false;
  std::string name;

  Vec3 triangle_normal(int t) const {
    const auto& tri = triangles[t];
    Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
    Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
    return e1.cross(e2).normalized();
  }

  double signed_volume() const;
  double surface_area() const;

  void bounding_box(Vec3& lo, Vec3& hi) const;

  /// Validates indices, drops degenerate triangles, detects watertightness.
  /// Throws GeometryError (tagged with `name`) on malformed input.
  void finalize();
};

TriMesh make_box(const Vec3& half_extents, const std::string& name = "box");
TriMesh make_icosphere(double radius, int subdivisions = 2, const std::string& name = "sphere");

/// Load from .stl (ascii or binary) or .obj, dispatching on extension.
TriMesh load_mesh(const std::string& path);
void save_obj(const TriMesh& mesh, const std::string& path);

/// Points on the surface: every vertex plus interior samples of each triangle
/// at roughly `spacing` resolution.
std::vector<Vec3> sample_surface(const TriMesh& mesh, double spacing);

}  // namespace crustplan
