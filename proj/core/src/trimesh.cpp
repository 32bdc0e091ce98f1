#include "crustplan/trimesh.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace crustplan {

double TriMesh::signed_volume() const {
  double v = 0;
  for (const auto& t : triangles) {
    v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]])) / 6.0;
  }
  return v;
}

double TriMesh::surface_area() const {
  double a = 0;
  for (const auto& t : triangles) {
    a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
  }
  return a;
}

void TriMesh::bounding_box(Vec3& lo, Vec3& hi) const {
  lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  hi = -lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

void TriMesh::finalize() {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int i : t) {
      if (i < 0 || i >= n) {
        throw GeometryError("mesh '" + name + "': triangle index out of range");
      }
    }
  }
  // Drop degenerate triangles (repeated indices or near-zero area).
  Vec3 lo, hi;
  bounding_box(lo, hi);
  double scale = std::max((hi - lo).norm(), 1e-12);
  double min_area = 1e-12 * scale * scale;
  std::vector<std::array<int, 3>> kept;
  kept.reserve(triangles.size());
  for (const auto& t : triangles) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    double area =
        0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
    if (area > min_area) kept.push_back(t);
  }
  triangles = std::move(kept);
  if (triangles.empty()) {
    throw GeometryError("mesh '" + name + "': no non-degenerate triangles");
  }

  // Watertight: every undirected edge used exactly twice, with opposite
  // directions, and outward orientation (positive signed volume).
  // count: undirected uses (must be 2); balance: directed orientation (must cancel)
  std::map<std::pair<int, int>, std::pair<int, int>> edges;
  for (const auto& t : triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      auto& rec = edges[{std::min(a, b), std::max(a, b)}];
      rec.first++;
      rec.second += (a < b) ? 1 : -1;
    }
  }
  bool manifold = true;
  for (const auto& [edge, rec] : edges) {
    if (rec.first != 2 || rec.second != 0) manifold = false;
  }
  watertight = manifold;
  if (watertight && signed_volume() < 0) {
    for (auto& t : triangles) std::swap(t[1], t[2]);
  }
}

TriMesh make_box(const Vec3& h, const std::string& name) {
  TriMesh m;
  m.name = name;
  for (int i = 0; i < 8; ++i) {
    m.vertices.push_back({(i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                          (i & 4) ? h.z() : -h.z()});
  }
  auto quad = [&m](int a, int b, int c, int d) {
    m.triangles.push_back({a, b, c});
    m.triangles.push_back({a, c, d});
  };
  quad(0, 2, 3, 1);  // -z
  quad(4, 5, 7, 6);  // +z
  quad(0, 1, 5, 4);  // -y
  quad(2, 6, 7, 3);  // +y
  quad(0, 4, 6, 2);  // -x
  quad(1, 3, 7, 5);  // +x
  m.finalize();
  return m;
}

TriMesh make_icosphere(double radius, int subdivisions, const std::string& name) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.name = name;
  auto add = [&m](double x, double y, double z) {
    m.vertices.push_back(Vec3(x, y, z).normalized());
  };
  add(-1, phi, 0); add(1, phi, 0); add(-1, -phi, 0); add(1, -phi, 0);
  add(0, -1, phi); add(0, 1, phi); add(0, -1, -phi); add(0, 1, -phi);
  add(phi, 0, -1); add(phi, 0, 1); add(-phi, 0, -1); add(-phi, 0, 1);
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find({key.first, key.second});
      if (it != midpoint.end()) return it->second;
      int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back(((m.vertices[a] + m.vertices[b]) / 2.0).normalized());
      midpoint[{key.first, key.second}] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    for (const auto& t : m.triangles) {
      int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  m.finalize();
  return m;
}

namespace {

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open mesh file: " + path);
  TriMesh m;
  m.name = path;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      m.vertices.push_back({x, y, z});
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "i", "i/j", "i/j/k", "i//k"; negative indices are relative
        int v = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(v > 0 ? v - 1 : static_cast<int>(m.vertices.size()) + v);
      }
      for (size_t i = 2; i < idx.size(); ++i) {
        m.triangles.push_back({idx[0], idx[i - 1], idx[i]});
      }
    }
  }
  // Merge exactly coincident vertices so watertightness is detectable.
  std::map<std::array<long long, 3>, int> seen;
  std::vector<int> remap(m.vertices.size());
  std::vector<Vec3> merged;
  for (size_t i = 0; i < m.vertices.size(); ++i) {
    const Vec3& v = m.vertices[i];
    std::array<long long, 3> key = {llround(v.x() * 1e9), llround(v.y() * 1e9),
                                    llround(v.z() * 1e9)};
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen[key] = static_cast<int>(merged.size());
      remap[i] = static_cast<int>(merged.size());
      merged.push_back(v);
    } else {
      remap[i] = it->second;
    }
  }
  m.vertices = std::move(merged);
  for (auto& t : m.triangles) {
    for (auto& i : t) {
      if (i < 0 || i >= static_cast<int>(remap.size()))
        throw GeometryError("mesh '" + path + "': face index out of range");
      i = remap[i];
    }
  }
  m.finalize();
  return m;
}

TriMesh load_stl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeometryError("cannot open mesh file: " + path);
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  TriMesh m;
  m.name = path;
  std::map<std::array<long long, 3>, int> seen;
  auto push_vertex = [&](const Vec3& v) {
    std::array<long long, 3> key = {llround(v.x() * 1e9), llround(v.y() * 1e9),
                                    llround(v.z() * 1e9)};
    auto it = seen.find(key);
    if (it != seen.end()) return it->second;
    int idx = static_cast<int>(m.vertices.size());
    m.vertices.push_back(v);
    seen[key] = idx;
    return idx;
  };

  bool ascii = data.size() >= 5 && std::strncmp(data.data(), "solid", 5) == 0;
  if (ascii) {
    // Some binary files start with "solid"; require "facet" to appear in text.
    std::string text(data.begin(), data.end());
    if (text.find("facet") == std::string::npos) ascii = false;
  }
  if (ascii) {
    std::istringstream ss(std::string(data.begin(), data.end()));
    std::string tok;
    std::vector<int> tri;
    while (ss >> tok) {
      if (tok == "vertex") {
        double x, y, z;
        ss >> x >> y >> z;
        tri.push_back(push_vertex({x, y, z}));
        if (tri.size() == 3) {
          m.triangles.push_back({tri[0], tri[1], tri[2]});
          tri.clear();
        }
      }
    }
  } else {
    if (data.size() < 84) throw GeometryError("truncated binary STL: " + path);
    uint32_t n;
    std::memcpy(&n, data.data() + 80, 4);
    if (data.size() < 84 + size_t(n) * 50) throw GeometryError("truncated binary STL: " + path);
    for (uint32_t t = 0; t < n; ++t) {
      const char* rec = data.data() + 84 + size_t(t) * 50;
      int idx[3];
      for (int v = 0; v < 3; ++v) {
        float xyz[3];
        std::memcpy(xyz, rec + 12 + v * 12, 12);
        idx[v] = push_vertex({xyz[0], xyz[1], xyz[2]});
      }
      m.triangles.push_back({idx[0], idx[1], idx[2]});
    }
  }
  m.finalize();
  return m;
}

}  // namespace

TriMesh load_mesh(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == "obj") return load_obj(path);
  if (ext == "stl") return load_stl(path);
  throw GeometryError("unsupported mesh format: " + path);
}

void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GeometryError("cannot write mesh file: " + path);
  out.precision(12);
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, double spacing) {
  std::vector<Vec3> pts = mesh.vertices;
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    double longest = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    int n = static_cast<int>(std::ceil(longest / spacing));
    // Barycentric lattice at resolution n (edges included, vertices skipped).
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n - i; ++j) {
        if ((i == 0 && j == 0) || (i == n && j == 0) || (i == 0 && j == n)) continue;
        double u = double(i) / n, v = double(j) / n;
        pts.push_back(a + u * (b - a) + v * (c - a));
      }
    }
  }
  return pts;
}

}  // namespace crustplan
