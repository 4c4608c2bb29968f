#pragma once

#include <Eigen/SparseCore>
#include <array>
#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "cortexfit/types.hpp"

namespace cortexfit {

/// Closed genus-0 triangle mesh with one region label per vertex. Triangles
/// wind counter-clockwise when viewed from outside. All query operations
/// leave the mesh unmodified.
struct LabeledSurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<RegionLabel> labels;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }

  /// Checks the full invariant set: closed oriented 2-manifold, Euler
  /// characteristic 2, no degenerate triangles, one label per vertex.
  void validate() const;
};

/// Symmetric per-edge weights, defined exactly on mesh edges.
class EdgeWeightSet {
 public:
  static std::uint64_t key(int i, int j) {
    const std::uint64_t a = static_cast<std::uint32_t>(std::min(i, j));
    const std::uint64_t b = static_cast<std::uint32_t>(std::max(i, j));
    return (a << 32) | b;
  }

  void add(int i, int j, double w) { weights_[key(i, j)] += w; }
  void set(int i, int j, double w) { weights_[key(i, j)] = w; }
  bool has(int i, int j) const { return weights_.count(key(i, j)) != 0; }
  double at(int i, int j) const;
  std::size_t size() const { return weights_.size(); }

  auto begin() const { return weights_.begin(); }
  auto end() const { return weights_.end(); }
  auto begin() { return weights_.begin(); }
  auto end() { return weights_.end(); }

  static std::pair<int, int> unpack(std::uint64_t k) {
    return {static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu)};
  }

 private:
  std::unordered_map<std::uint64_t, double> weights_;
};

/// Area-weighted average of incident triangle normals, unit length, oriented
/// outward by the triangle winding.
std::vector<Vec3> vertex_normals(const LabeledSurfaceMesh& mesh);

/// Cotangent edge weights 0.5*(cot a + cot b); negative results are clamped
/// to 0 so the Laplacian stays positive semi-definite.
EdgeWeightSet cotangent_weights(const LabeledSurfaceMesh& mesh);

/// Sparse symmetric Laplacian: L_ij = -w_ij on edges, L_ii = sum_j w_ij.
Eigen::SparseMatrix<double> laplacian(const LabeledSurfaceMesh& mesh, const EdgeWeightSet& w);

/// Indices of all vertices sharing an edge with vertex i, each exactly once,
/// in ascending order.
std::vector<int> one_ring(const LabeledSurfaceMesh& mesh, int i);

/// One-ring lists for every vertex (ascending order per vertex).
std::vector<std::vector<int>> one_rings(const LabeledSurfaceMesh& mesh);

/// Reads `v x y z` / `f i j k` geometry plus the label sidecar
/// (geometry path + ".labels", one token per line) and validates.
LabeledSurfaceMesh read_mesh(const std::filesystem::path& geometry_path);
LabeledSurfaceMesh read_mesh(const std::filesystem::path& geometry_path,
                             const std::filesystem::path& labels_path);

/// Writes geometry and the label sidecar (geometry path + ".labels").
void write_mesh(const LabeledSurfaceMesh& mesh, const std::filesystem::path& geometry_path);

std::filesystem::path mesh_labels_path(const std::filesystem::path& geometry_path);

/// Closed capped-cylinder template, axis z, centered at the origin: lateral
/// wall labeled VerticalCortex, caps labeled Endplates, and the cap-rim
/// transition rings labeled CutPedicles (excluded from fitting).
/// `segments` controls the angular resolution.
LabeledSurfaceMesh make_template(double radius, double height, int segments);

}  // namespace cortexfit
