#include "crustplan/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace crustplan {

namespace {

struct SupportPoint {
  Vec3 w;  // point on A - B
  Vec3 a;  // contributing point on A
  Vec3 b;  // contributing point on B
};

struct SupportFn {
  const std::vector<Vec3>* verts_a;
  const std::vector<Vec3>* verts_b;
  Pose pose_a, pose_b;

  SupportPoint operator()(const Vec3& dir) const {
    Vec3 da = pose_a.rotation.transpose() * dir;
    Vec3 db = pose_b.rotation.transpose() * (-dir);
    int best_a = 0, best_b = 0;
    double ba = -std::numeric_limits<double>::infinity();
    double bb = ba;
    for (size_t i = 0; i < verts_a->size(); ++i) {
      double d = (*verts_a)[i].dot(da);
      if (d > ba) { ba = d; best_a = static_cast<int>(i); }
    }
    for (size_t i = 0; i < verts_b->size(); ++i) {
      double d = (*verts_b)[i].dot(db);
      if (d > bb) { bb = d; best_b = static_cast<int>(i); }
    }
    SupportPoint s;
    s.a = pose_a.apply((*verts_a)[best_a]);
    s.b = pose_b.apply((*verts_b)[best_b]);
    s.w = s.a - s.b;
    return s;
  }
};

// Smallest-norm point in the convex hull of up to 4 points, by enumerating
// affine subsets and keeping the best one with nonnegative barycentrics.
// Returns the point; fills coefficients and the retained subset.
Vec3 closest_on_simplex(std::vector<SupportPoint>& simplex, std::vector<double>& coeffs) {
  const int n = static_cast<int>(simplex.size());
  double best_norm2 = std::numeric_limits<double>::infinity();
  Vec3 best = Vec3::Zero();
  std::vector<int> best_subset;
  std::vector<double> best_lambda;

  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    // min ||sum l_i w_i||^2 s.t. sum l_i = 1  -> KKT on the Gram matrix
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) m(i, j) = simplex[idx[i]].w.dot(simplex[idx[j]].w);
      m(i, k) = 1;
      m(k, i) = 1;
    }
    rhs(k) = 1;
    Eigen::VectorXd sol = m.fullPivLu().solve(rhs);
    if (!sol.allFinite()) continue;
    bool valid = true;
    for (int i = 0; i < k; ++i)
      if (sol(i) < -1e-12) valid = false;
    if (!valid) continue;
    Vec3 p = Vec3::Zero();
    for (int i = 0; i < k; ++i) p += sol(i) * simplex[idx[i]].w;
    double n2 = p.squaredNorm();
    if (n2 < best_norm2 - 1e-18) {
      best_norm2 = n2;
      best = p;
      best_subset = idx;
      best_lambda.assign(sol.data(), sol.data() + k);
    }
  }

  std::vector<SupportPoint> kept;
  coeffs.clear();
  for (size_t i = 0; i < best_subset.size(); ++i) {
    if (best_lambda[i] > 1e-14) {
      kept.push_back(simplex[best_subset[i]]);
      coeffs.push_back(best_lambda[i]);
    }
  }
  if (kept.empty() && !best_subset.empty()) {
    kept.push_back(simplex[best_subset[0]]);
    coeffs.push_back(1.0);
  }
  simplex = std::move(kept);
  return best;
}

// EPA: expand a tetrahedron containing the origin until the nearest face of
// the Minkowski difference boundary is found. Returns penetration depth and
// witness points.
struct EpaFace {
  int v[3];
  Vec3 normal;     // outward (away from origin)
  double dist;     // distance of face plane from origin
  bool alive = true;
};

bool epa(const SupportFn& support, std::vector<SupportPoint> polytope, ProximityResult& out) {
  if (polytope.size() != 4) return false;
  // Orient initial tetrahedron consistently.
  auto make_face = [&](int a, int b, int c) {
    EpaFace f;
    f.v[0] = a; f.v[1] = b; f.v[2] = c;
    Vec3 n = (polytope[b].w - polytope[a].w).cross(polytope[c].w - polytope[a].w);
    double len = n.norm();
    if (len < 1e-18) {
      f.normal = Vec3::Zero();
      f.dist = std::numeric_limits<double>::infinity();
      return f;
    }
    n /= len;
    double d = n.dot(polytope[a].w);
    if (d < 0) {  // flip so normal points away from origin
      std::swap(f.v[1], f.v[2]);
      n = -n;
      d = -d;
    }
    f.normal = n;
    f.dist = d;
    return f;
  };

  std::vector<EpaFace> faces = {make_face(0, 1, 2), make_face(0, 1, 3), make_face(0, 2, 3),
                                make_face(1, 2, 3)};

  for (int iter = 0; iter < 256; ++iter) {
    // nearest alive face
    int nearest = -1;
    double min_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < faces.size(); ++i) {
      if (faces[i].alive && faces[i].dist < min_d) {
        min_d = faces[i].dist;
        nearest = static_cast<int>(i);
      }
    }
    if (nearest < 0) return false;
    const EpaFace face = faces[nearest];
    SupportPoint sp = support(face.normal);
    double grow = sp.w.dot(face.normal) - face.dist;
    if (grow < 1e-10) {
      // Converged: project origin onto the face to get barycentrics.
      const SupportPoint& a = polytope[face.v[0]];
      const SupportPoint& b = polytope[face.v[1]];
      const SupportPoint& c = polytope[face.v[2]];
      Vec3 proj = face.normal * face.dist;
      Vec3 cl;
      point_triangle_distance(proj, a.w, b.w, c.w, &cl);
      // barycentrics of cl
      Vec3 e1 = b.w - a.w, e2 = c.w - a.w, ep = cl - a.w;
      double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
      double dp1 = ep.dot(e1), dp2 = ep.dot(e2);
      double den = d11 * d22 - d12 * d12;
      double v = den > 1e-18 ? (d22 * dp1 - d12 * dp2) / den : 0;
      double w = den > 1e-18 ? (d11 * dp2 - d12 * dp1) / den : 0;
      double u = 1 - v - w;
      out.distance = -face.dist;
      out.witness_a = u * a.a + v * b.a + w * c.a;
      out.witness_b = u * a.b + v * b.b + w * c.b;
      return true;
    }
    // Remove faces visible from the new point, collect horizon edges.
    int new_idx = static_cast<int>(polytope.size());
    polytope.push_back(sp);
    std::vector<std::pair<int, int>> horizon;
    auto add_edge = [&horizon](int a, int b) {
      for (auto it = horizon.begin(); it != horizon.end(); ++it) {
        if (it->first == b && it->second == a) {
          horizon.erase(it);
          return;
        }
      }
      horizon.push_back({a, b});
    };
    for (auto& f : faces) {
      if (!f.alive) continue;
      if (f.normal.dot(sp.w - polytope[f.v[0]].w) > 1e-12) {
        f.alive = false;
        add_edge(f.v[0], f.v[1]);
        add_edge(f.v[1], f.v[2]);
        add_edge(f.v[2], f.v[0]);
      }
    }
    if (horizon.empty()) {
      out.distance = -face.dist;
      const SupportPoint& a = polytope[face.v[0]];
      out.witness_a = a.a;
      out.witness_b = a.b;
      return true;
    }
    for (const auto& [ea, eb] : horizon) {
      faces.push_back(make_face(ea, eb, new_idx));
    }
  }
  return false;
}

}  // namespace

ProximityResult convex_signed_distance(const std::vector<Vec3>& verts_a, const Pose& pose_a,
                                       const std::vector<Vec3>& verts_b, const Pose& pose_b) {
  SupportFn support{&verts_a, &verts_b, pose_a, pose_b};
  ProximityResult out;

  Vec3 dir = pose_a.translation - pose_b.translation;
  if (dir.squaredNorm() < 1e-18) dir = Vec3::UnitX();
  std::vector<SupportPoint> simplex = {support(dir)};
  std::vector<double> coeffs;
  Vec3 v = simplex[0].w;

  const double tol = 1e-12;
  for (int iter = 0; iter < 128; ++iter) {
    if (v.squaredNorm() < 1e-20) break;  // origin reached: intersecting
    SupportPoint sp = support(-v);
    // No further progress toward the origin: v is the closest point.
    if (v.squaredNorm() - sp.w.dot(v) < tol * std::max(1.0, v.squaredNorm())) {
      out.distance = v.norm();
      out.witness_a = Vec3::Zero();
      out.witness_b = Vec3::Zero();
      for (size_t i = 0; i < simplex.size(); ++i) {
        out.witness_a += coeffs[i] * simplex[i].a;
        out.witness_b += coeffs[i] * simplex[i].b;
      }
      return out;
    }
    simplex.push_back(sp);
    v = closest_on_simplex(simplex, coeffs);
    if (simplex.size() == 4 && v.squaredNorm() < 1e-20) break;
  }

  // Intersecting (or touching): inflate the simplex to a tetrahedron for EPA.
  static const Vec3 axes[6] = {Vec3::UnitX(),  Vec3::UnitY(),  Vec3::UnitZ(),
                               -Vec3::UnitX(), -Vec3::UnitY(), -Vec3::UnitZ()};
  for (const Vec3& d : axes) {
    if (simplex.size() >= 4) break;
    SupportPoint sp = support(d);
    bool dup = false;
    for (const auto& s : simplex) {
      if ((s.w - sp.w).squaredNorm() < 1e-20) dup = true;
    }
    if (!dup) simplex.push_back(sp);
  }
  while (simplex.size() < 4) {
    // touching contact with a degenerate difference: depth is zero
    out.distance = 0;
    out.witness_a = simplex[0].a;
    out.witness_b = simplex[0].b;
    return out;
  }
  // Check the tetrahedron is non-degenerate; a flat one means touching.
  Vec3 e1 = simplex[1].w - simplex[0].w;
  Vec3 e2 = simplex[2].w - simplex[0].w;
  Vec3 e3 = simplex[3].w - simplex[0].w;
  if (std::abs(e1.cross(e2).dot(e3)) < 1e-18) {
    out.distance = 0;
    out.witness_a = simplex[0].a;
    out.witness_b = simplex[0].b;
    return out;
  }
  if (!epa(support, simplex, out)) {
    out.distance = 0;
    out.witness_a = simplex[0].a;
    out.witness_b = simplex[0].b;
  }
  return out;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* closest) {
  // Ericson, Real-Time Collision Detection, closest point on triangle.
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  Vec3 cl;
  if (d1 <= 0 && d2 <= 0) {
    cl = a;
  } else {
    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
      cl = b;
    } else {
      double vc = d1 * d4 - d3 * d2;
      if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double t = d1 / (d1 - d3);
        cl = a + t * ab;
      } else {
        Vec3 cp = p - c;
        double d5 = ab.dot(cp), d6 = ac.dot(cp);
        if (d6 >= 0 && d5 <= d6) {
          cl = c;
        } else {
          double vb = d5 * d2 - d1 * d6;
          if (vb <= 0 && d2 >= 0 && d6 <= 0) {
            double t = d2 / (d2 - d6);
            cl = a + t * ac;
          } else {
            double va = d3 * d6 - d5 * d4;
            if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
              double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
              cl = b + t * (c - b);
            } else {
              double denom = 1.0 / (va + vb + vc);
              double v = vb * denom, w = vc * denom;
              cl = a + ab * v + ac * w;
            }
          }
        }
      }
    }
  }
  if (closest) *closest = cl;
  return (p - cl).norm();
}

double point_mesh_distance(const Vec3& p, const TriMesh& mesh, const Pose& pose,
                           Vec3* closest) {
  Vec3 p_local = pose.inverse().apply(p);
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_cl = Vec3::Zero();
  for (const auto& t : mesh.triangles) {
    Vec3 cl;
    double d = point_triangle_distance(p_local, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                       mesh.vertices[t[2]], &cl);
    if (d < best) {
      best = d;
      best_cl = cl;
    }
  }
  if (closest) *closest = pose.apply(best_cl);
  return best;
}

TriMesh convex_hull(const std::vector<Vec3>& points, const std::string& name) {
  if (points.size() < 4) throw GeometryError("convex_hull: need at least 4 points");

  // Initial tetrahedron from extreme points.
  int i0 = 0, i1 = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].x() < points[i0].x()) i0 = static_cast<int>(i);
    if (points[i].x() > points[i1].x()) i1 = static_cast<int>(i);
  }
  if (i0 == i1) i1 = (i0 + 1) % points.size();
  int i2 = -1;
  double best = 1e-18;
  Vec3 d01 = points[i1] - points[i0];
  for (size_t i = 0; i < points.size(); ++i) {
    double a = d01.cross(points[i] - points[i0]).norm();
    if (a > best) { best = a; i2 = static_cast<int>(i); }
  }
  if (i2 < 0) throw GeometryError("convex_hull: degenerate (collinear) input");
  int i3 = -1;
  best = 1e-15;
  Vec3 n0 = d01.cross(points[i2] - points[i0]);
  for (size_t i = 0; i < points.size(); ++i) {
    double v = std::abs(n0.dot(points[i] - points[i0]));
    if (v > best) { best = v; i3 = static_cast<int>(i); }
  }
  if (i3 < 0) throw GeometryError("convex_hull: degenerate (coplanar) input");

  struct HullFace {
    int v[3];
    Vec3 normal;
    double offset;
    bool alive = true;
  };
  std::vector<HullFace> faces;
  auto centroid = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
  auto push_face = [&](int a, int b, int c) {
    HullFace f;
    f.v[0] = a; f.v[1] = b; f.v[2] = c;
    Vec3 n = (points[b] - points[a]).cross(points[c] - points[a]);
    if (n.dot(centroid - points[a]) > 0) {
      std::swap(f.v[1], f.v[2]);
      n = -n;
    }
    f.normal = n.normalized();
    f.offset = f.normal.dot(points[f.v[0]]);
    faces.push_back(f);
  };
  push_face(i0, i1, i2);
  push_face(i0, i1, i3);
  push_face(i0, i2, i3);
  push_face(i1, i2, i3);

  Vec3 lo, hi;
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& p : points) { lo = lo.cwiseMin(p); hi = hi.cwiseMax(p); }
  const double eps = 1e-10 * std::max(1.0, (hi - lo).norm());

  for (size_t pi = 0; pi < points.size(); ++pi) {
    const Vec3& p = points[pi];
    // any face that sees the point?
    bool outside = false;
    for (const auto& f : faces) {
      if (f.alive && f.normal.dot(p) - f.offset > eps) { outside = true; break; }
    }
    if (!outside) continue;
    std::vector<std::pair<int, int>> horizon;
    auto add_edge = [&horizon](int a, int b) {
      for (auto it = horizon.begin(); it != horizon.end(); ++it) {
        if (it->first == b && it->second == a) { horizon.erase(it); return; }
      }
      horizon.push_back({a, b});
    };
    for (auto& f : faces) {
      if (!f.alive) continue;
      if (f.normal.dot(p) - f.offset > eps) {
        f.alive = false;
        add_edge(f.v[0], f.v[1]);
        add_edge(f.v[1], f.v[2]);
        add_edge(f.v[2], f.v[0]);
      }
    }
    for (const auto& [a, b] : horizon) {
      HullFace f;
      f.v[0] = a; f.v[1] = b; f.v[2] = static_cast<int>(pi);
      Vec3 n = (points[b] - points[a]).cross(p - points[a]);
      double len = n.norm();
      if (len < 1e-18) continue;
      f.normal = n / len;
      f.offset = f.normal.dot(points[a]);
      faces.push_back(f);
    }
  }

  // Compact to a TriMesh, remapping used vertices.
  TriMesh out;
  out.name = name;
  std::vector<int> remap(points.size(), -1);
  for (const auto& f : faces) {
    if (!f.alive) continue;
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      int v = f.v[k];
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(points[v]);
      }
      tri[k] = remap[v];
    }
    out.triangles.push_back(tri);
  }
  out.finalize();
  if (!out.watertight) throw GeometryError("convex_hull: non-watertight result");
  return out;
}

}  // namespace crustplan
