#include "cortexfit/mesh.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cortexfit/key_value.hpp"

namespace cortexfit {

namespace {

constexpr double kMinTriangleArea = 1e-12;  // mm^2

std::uint64_t directed_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

std::string edge_name(int a, int b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

void LabeledSurfaceMesh::validate() const {
  const int nv = vertex_count();
  if (labels.size() != vertices.size())
    throw Error("mesh: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(vertices.size()) + " vertices");
  for (const Vec3& v : vertices)
    if (!v.allFinite()) throw Error("mesh: vertex coordinates must be finite");

  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(triangles.size() * 3);
  std::vector<bool> referenced(nv, false);
  for (const auto& tri : triangles) {
    const auto [a, b, c] = tri;
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv)
      throw Error("mesh: triangle index out of range");
    if (a == b || b == c || a == c) throw Error("mesh: triangle with repeated vertex");
    referenced[a] = referenced[b] = referenced[c] = true;

    const double area = 0.5 * (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]).norm();
    if (!(area > kMinTriangleArea))
      throw Error("mesh: degenerate triangle " + edge_name(a, b) + "+" + std::to_string(c));

    for (const auto& [s, t] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
      if (++directed[directed_key(s, t)] > 1)
        throw Error("mesh: edge " + edge_name(s, t) +
                    " traversed twice in the same direction (non-manifold or inconsistent "
                    "orientation)");
    }
  }
  for (int v = 0; v < nv; ++v)
    if (!referenced[v]) throw Error("mesh: isolated vertex " + std::to_string(v));

  for (const auto& [key, count] : directed) {
    const int a = static_cast<int>(key >> 32);
    const int b = static_cast<int>(key & 0xffffffffu);
    if (directed.count(directed_key(b, a)) == 0)
      throw Error("mesh: boundary edge " + edge_name(a, b));
  }

  const long long euler = static_cast<long long>(nv) -
                          static_cast<long long>(directed.size()) / 2 +
                          static_cast<long long>(triangles.size());
  if (euler != 2)
    throw Error("mesh: Euler characteristic " + std::to_string(euler) + ", expected 2 (genus 0)");
}

double EdgeWeightSet::at(int i, int j) const {
  const auto it = weights_.find(key(i, j));
  if (it == weights_.end())
    throw Error("edge weights: no entry for edge " + edge_name(i, j));
  return it->second;
}

std::vector<Vec3> vertex_normals(const LabeledSurfaceMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (const auto& [a, b, c] : mesh.triangles) {
    // Cross product of two edges = 2 * area * unit normal, so summing it is
    // exactly the area-weighted average before normalization.
    const Vec3 n = (mesh.vertices[b] - mesh.vertices[a])
                       .cross(mesh.vertices[c] - mesh.vertices[a]);
    normals[a] += n;
    normals[b] += n;
    normals[c] += n;
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const double len = normals[i].norm();
    if (!(len > 0.0))
      throw Error("vertex_normals: degenerate umbrella at vertex " + std::to_string(i));
    normals[i] /= len;
  }
  return normals;
}

EdgeWeightSet cotangent_weights(const LabeledSurfaceMesh& mesh) {
  EdgeWeightSet weights;
  for (const auto& [a, b, c] : mesh.triangles) {
    const std::array<int, 3> idx = {a, b, c};
    for (int corner = 0; corner < 3; ++corner) {
      const int i = idx[corner];
      const int j = idx[(corner + 1) % 3];
      const int k = idx[(corner + 2) % 3];
      const Vec3 u = mesh.vertices[j] - mesh.vertices[i];
      const Vec3 v = mesh.vertices[k] - mesh.vertices[i];
      const double cross = u.cross(v).norm();
      if (!(cross > 0.0)) throw Error("cotangent_weights: degenerate triangle");
      weights.add(j, k, 0.5 * u.dot(v) / cross);
    }
  }
  for (auto& [key, w] : weights)
    if (w < 0.0) w = 0.0;
  return weights;
}

Eigen::SparseMatrix<double> laplacian(const LabeledSurfaceMesh& mesh, const EdgeWeightSet& w) {
  const int n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(w.size() * 4);
  for (const auto& [key, weight] : w) {
    const auto [i, j] = EdgeWeightSet::unpack(key);
    triplets.emplace_back(i, j, -weight);
    triplets.emplace_back(j, i, -weight);
    triplets.emplace_back(i, i, weight);
    triplets.emplace_back(j, j, weight);
  }
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(triplets.begin(), triplets.end());
  return L;
}

std::vector<std::vector<int>> one_rings(const LabeledSurfaceMesh& mesh) {
  std::vector<std::vector<int>> rings(mesh.vertices.size());
  EdgeWeightSet seen;
  for (const auto& [a, b, c] : mesh.triangles) {
    for (const auto& [s, t] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
      if (seen.has(s, t)) continue;
      seen.set(s, t, 1.0);
      rings[s].push_back(t);
      rings[t].push_back(s);
    }
  }
  for (auto& ring : rings) std::sort(ring.begin(), ring.end());
  return rings;
}

std::vector<int> one_ring(const LabeledSurfaceMesh& mesh, int i) {
  if (i < 0 || i >= mesh.vertex_count()) throw Error("one_ring: vertex index out of range");
  return one_rings(mesh)[i];
}

std::filesystem::path mesh_labels_path(const std::filesystem::path& geometry_path) {
  return std::filesystem::path(geometry_path.string() + ".labels");
}

LabeledSurfaceMesh read_mesh(const std::filesystem::path& geometry_path) {
  return read_mesh(geometry_path, mesh_labels_path(geometry_path));
}

LabeledSurfaceMesh read_mesh(const std::filesystem::path& geometry_path,
                             const std::filesystem::path& labels_path) {
  std::ifstream in(geometry_path);
  if (!in) throw Error("cannot open '" + geometry_path.string() + "'");

  LabeledSurfaceMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string record;
    if (!(ss >> record)) continue;
    if (record[0] == '#') continue;
    const std::string where = geometry_path.string() + ":" + std::to_string(lineno);
    if (record == "v") {
      Vec3 p;
      if (!(ss >> p.x() >> p.y() >> p.z())) throw Error(where + ": malformed vertex record");
      mesh.vertices.push_back(p);
    } else if (record == "f") {
      std::array<int, 3> tri;
      if (!(ss >> tri[0] >> tri[1] >> tri[2]))
        throw Error(where + ": malformed face record (triangles with plain indices only)");
      std::string extra;
      if (ss >> extra) throw Error(where + ": faces must be triangles");
      for (int& v : tri) v -= 1;  // 1-based on disk
      mesh.triangles.push_back(tri);
    } else {
      throw Error(where + ": unsupported record '" + record + "'");
    }
  }

  std::ifstream labels_in(labels_path);
  if (!labels_in) throw Error("cannot open label sidecar '" + labels_path.string() + "'");
  std::string token;
  while (labels_in >> token) mesh.labels.push_back(region_from_string(token));
  if (mesh.labels.size() != mesh.vertices.size())
    throw Error(labels_path.string() + ": " + std::to_string(mesh.labels.size()) +
                " labels for " + std::to_string(mesh.vertices.size()) + " vertices");

  mesh.validate();
  return mesh;
}

void write_mesh(const LabeledSurfaceMesh& mesh, const std::filesystem::path& geometry_path) {
  std::ofstream out(geometry_path);
  if (!out) throw Error("cannot write '" + geometry_path.string() + "'");
  for (const Vec3& v : mesh.vertices)
    out << "v " << format_double(v.x()) << " " << format_double(v.y()) << " "
        << format_double(v.z()) << "\n";
  for (const auto& [a, b, c] : mesh.triangles)
    out << "f " << a + 1 << " " << b + 1 << " " << c + 1 << "\n";
  if (!out.flush()) throw Error("failed writing '" + geometry_path.string() + "'");

  const std::filesystem::path labels_path = mesh_labels_path(geometry_path);
  std::ofstream labels_out(labels_path);
  if (!labels_out) throw Error("cannot write '" + labels_path.string() + "'");
  for (const RegionLabel label : mesh.labels) labels_out << to_string(label) << "\n";
  if (!labels_out.flush()) throw Error("failed writing '" + labels_path.string() + "'");
}

LabeledSurfaceMesh make_template(double radius, double height, int segments) {
  if (!(radius > 0.0) || !(height > 0.0))
    throw Error("make_template: radius and height must be > 0");
  if (segments < 8) throw Error("make_template: need at least 8 segments");

  const int nseg = segments;
  const double edge = 2.0 * std::numbers::pi * radius / nseg;
  const int rows = std::max(2, static_cast<int>(std::lround(height / edge)));
  const int cap_rings = std::max(2, static_cast<int>(std::lround(radius / edge)));

  LabeledSurfaceMesh mesh;
  const auto ring_vertex = [&](double r, double phi, double z) {
    mesh.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  };

  // Wall rings bottom to top; rims (k = 0 and k = rows) double as cap borders.
  for (int k = 0; k <= rows; ++k) {
    const double z = -0.5 * height + height * k / rows;
    for (int i = 0; i < nseg; ++i) ring_vertex(radius, 2.0 * std::numbers::pi * i / nseg, z);
    const RegionLabel label =
        (k == 0 || k == rows) ? RegionLabel::CutPedicles : RegionLabel::VerticalCortex;
    for (int i = 0; i < nseg; ++i) mesh.labels.push_back(label);
  }
  const auto wall = [&](int k, int i) { return k * nseg + (i % nseg); };

  // Interior cap rings (radius shrinking toward the axis) plus one center
  // vertex per cap.
  const int top_base = (rows + 1) * nseg;
  for (int j = cap_rings - 1; j >= 1; --j) {
    const double r = radius * j / cap_rings;
    for (int i = 0; i < nseg; ++i)
      ring_vertex(r, 2.0 * std::numbers::pi * i / nseg, 0.5 * height);
  }
  const int top_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, 0.5 * height);

  const int bottom_base = static_cast<int>(mesh.vertices.size());
  for (int j = cap_rings - 1; j >= 1; --j) {
    const double r = radius * j / cap_rings;
    for (int i = 0; i < nseg; ++i)
      ring_vertex(r, 2.0 * std::numbers::pi * i / nseg, -0.5 * height);
  }
  const int bottom_center = static_cast<int>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, -0.5 * height);
  while (mesh.labels.size() < mesh.vertices.size())
    mesh.labels.push_back(RegionLabel::Endplates);

  // Ring r = 0 is the outer rim, r = cap_rings - 1 the innermost ring.
  const auto top_ring = [&](int r, int i) {
    return r == 0 ? wall(rows, i) : top_base + (r - 1) * nseg + (i % nseg);
  };
  const auto bottom_ring = [&](int r, int i) {
    return r == 0 ? wall(0, i) : bottom_base + (r - 1) * nseg + (i % nseg);
  };

  for (int k = 0; k < rows; ++k)
    for (int i = 0; i < nseg; ++i) {
      mesh.triangles.push_back({wall(k, i), wall(k, i + 1), wall(k + 1, i + 1)});
      mesh.triangles.push_back({wall(k, i), wall(k + 1, i + 1), wall(k + 1, i)});
    }

  for (int r = 0; r + 1 < cap_rings; ++r)
    for (int i = 0; i < nseg; ++i) {
      mesh.triangles.push_back({top_ring(r, i), top_ring(r, i + 1), top_ring(r + 1, i + 1)});
      mesh.triangles.push_back({top_ring(r, i), top_ring(r + 1, i + 1), top_ring(r + 1, i)});
      mesh.triangles.push_back(
          {bottom_ring(r, i + 1), bottom_ring(r, i), bottom_ring(r + 1, i)});
      mesh.triangles.push_back(
          {bottom_ring(r, i + 1), bottom_ring(r + 1, i), bottom_ring(r + 1, i + 1)});
    }
  for (int i = 0; i < nseg; ++i) {
    mesh.triangles.push_back(
        {top_ring(cap_rings - 1, i), top_ring(cap_rings - 1, i + 1), top_center});
    mesh.triangles.push_back(
        {bottom_ring(cap_rings - 1, i + 1), bottom_ring(cap_rings - 1, i), bottom_center});
  }

  mesh.validate();
  return mesh;
}

}  // namespace cortexfit
