#pragma once

#include <Eigen/SparseCore>
#include <vector>

#include "cortexfit/mesh.hpp"
#include "cortexfit/types.hpp"

namespace cortexfit {

/// One rotation per vertex, each orthonormal with determinant +1.
using RotationSet = std::vector<Mat3>;

RotationSet identity_rotations(int vertex_count);

/// Per-vertex fitting targets: the displaced point y_i, the plane normal n_i
/// (the profile direction, unit length) and the confidence weight gamma_i.
struct FitTargets {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::vector<double> weights;

  void validate(int vertex_count) const;
};

/// Deformation energy for fixed rotations:
/// sigma_E^-2 * sum_i gamma_i * sum_{j in N(i)} w_ij |(x'_i - x'_j) - R_i (x_i - x_j)|^2.
double arap_energy(const LabeledSurfaceMesh& mesh, const std::vector<Vec3>& deformed,
                   const EdgeWeightSet& weights, const std::vector<double>& gamma,
                   const RotationSet& rotations, double sigma_e);

struct RotationFitResult {
  RotationSet rotations;
  /// Vertices whose covariance was rank-deficient and fell back to identity.
  std::vector<int> degenerate;
};

/// Optimal per-vertex rotations for fixed positions: SVD of the weighted
/// covariance sum_j w_ij (x_i - x_j)(x'_i - x'_j)^T, with the proper-rotation
/// sign fix.
RotationFitResult fit_rotations(const LabeledSurfaceMesh& mesh,
                                const std::vector<Vec3>& deformed,
                                const EdgeWeightSet& weights,
                                const std::vector<std::vector<int>>& rings);

struct LinearSystem {
  Eigen::SparseMatrix<double> A;  // 3N x 3N, symmetric positive definite
  Eigen::VectorXd b;
};

/// Normal equations of the surface fitting energy for fixed rotations:
/// A = 2 sigma_E^-2 (L kron I3) + blockdiag(gamma_i n_i n_i^T) + eps I,
/// b_i = 2 sigma_E^-2 c_i + gamma_i n_i n_i^T y_i with
/// c_i = sum_j w_ij (R_i + R_j)/2 (x_i - x_j). The Tikhonov eps
/// (1e-9 * max diagonal) keeps A positive definite when all gamma vanish.
LinearSystem assemble_system(const LabeledSurfaceMesh& mesh, const EdgeWeightSet& weights,
                             const Eigen::SparseMatrix<double>& L, const RotationSet& rotations,
                             const FitTargets& targets, double sigma_e);

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradients with Jacobi (diagonal) preconditioning. max_iter <= 0
/// means 30N. Throws on a non-positive diagonal entry or scalar breakdown;
/// hitting the iteration cap is reported through `converged`.
PcgResult pcg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                    double tol = 1e-10, int max_iter = -1, const Eigen::VectorXd* x0 = nullptr);

struct SurfaceFitOptions {
  double sigma_e = 2.0;
  double rel_tol = 1e-6;  // relative E_shape decrease that stops the alternation
  int max_iterations = 100;
  double pcg_tol = 1e-10;
  int pcg_max_iter = -1;
};

struct SurfaceFitResult {
  std::vector<Vec3> positions;
  RotationSet rotations;  // final state, reusable as a warm start
  std::vector<double> e_shape;  // monitored energy after each local+global cycle
  int iterations = 0;
};

/// Alternating local/global minimization of the fitting energy
/// sum_i gamma_i ((x'_i - y_i)^T n_i)^2 + sigma_E^-2 sum_i sum_j w_ij
/// |(x'_i - x'_j) - R_i (x_i - x_j)|^2 (the objective whose normal equations
/// the global step solves). Stops when the monitored energy decrease falls
/// below rel_tol or after max_iterations cycles.
SurfaceFitResult fit_surface(const LabeledSurfaceMesh& mesh, const FitTargets& targets,
                             const SurfaceFitOptions& options = {},
                             const RotationSet* warm_start = nullptr);

}  // namespace cortexfit
