#include "cortexfit/arap.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace cortexfit {

RotationSet identity_rotations(int vertex_count) {
  return RotationSet(vertex_count, Mat3::Identity());
}

void FitTargets::validate(int vertex_count) const {
  const std::size_t n = static_cast<std::size_t>(vertex_count);
  if (points.size() != n || normals.size() != n || weights.size() != n)
    throw Error("fit targets: size mismatch with mesh");
  for (std::size_t i = 0; i < n; ++i) {
    if (!points[i].allFinite()) throw Error("fit targets: non-finite target point");
    if (!(weights[i] >= 0.0)) throw Error("fit targets: negative weight");
    if (weights[i] > 0.0 && std::abs(normals[i].norm() - 1.0) > 1e-9)
      throw Error("fit targets: normals must be unit length");
  }
}

double arap_energy(const LabeledSurfaceMesh& mesh, const std::vector<Vec3>& deformed,
                   const EdgeWeightSet& weights, const std::vector<double>& gamma,
                   const RotationSet& rotations, double sigma_e) {
  if (!(sigma_e > 0.0)) throw Error("arap_energy: sigma_e must be > 0");
  if (deformed.size() != mesh.vertices.size() || rotations.size() != mesh.vertices.size() ||
      gamma.size() != mesh.vertices.size())
    throw Error("arap_energy: size mismatch with mesh");

  double energy = 0.0;
  for (const auto& [key, w] : weights) {
    const auto [i, j] = EdgeWeightSet::unpack(key);
    const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
    const Vec3 def = deformed[i] - deformed[j];
    // Each undirected edge appears in both incident vertex cells.
    energy += gamma[i] * w * (def - rotations[i] * rest).squaredNorm();
    energy += gamma[j] * w * (def - rotations[j] * rest).squaredNorm();
  }
  return energy / (sigma_e * sigma_e);
}

RotationFitResult fit_rotations(const LabeledSurfaceMesh& mesh,
                                const std::vector<Vec3>& deformed,
                                const EdgeWeightSet& weights,
                                const std::vector<std::vector<int>>& rings) {
  if (deformed.size() != mesh.vertices.size() || rings.size() != mesh.vertices.size())
    throw Error("fit_rotations: size mismatch with mesh");

  RotationFitResult result;
  result.rotations.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    Mat3 covariance = Mat3::Zero();
    for (const int j : rings[i]) {
      const double w = weights.at(static_cast<int>(i), j);
      const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
      const Vec3 def = deformed[i] - deformed[j];
      covariance += w * rest * def.transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double max_sv = svd.singularValues()(0);
    if (!(max_sv > 0.0) || svd.singularValues()(1) <= max_sv * 1e-12) {
      // Collinear or collapsed umbrella: the rotation is not determined.
      result.rotations[i] = Mat3::Identity();
      result.degenerate.push_back(static_cast<int>(i));
      continue;
    }
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 rotation = v * u.transpose();
    if (rotation.determinant() < 0.0) {
      v.col(2) *= -1.0;  // flip the weakest direction to stay in SO(3)
      rotation = v * u.transpose();
    }
    result.rotations[i] = rotation;
  }
  return result;
}

LinearSystem assemble_system(const LabeledSurfaceMesh& mesh, const EdgeWeightSet& weights,
                             const Eigen::SparseMatrix<double>& L, const RotationSet& rotations,
                             const FitTargets& targets, double sigma_e) {
  if (!(sigma_e > 0.0)) throw Error("assemble_system: sigma_e must be > 0");
  targets.validate(mesh.vertex_count());
  if (static_cast<int>(rotations.size()) != mesh.vertex_count())
    throw Error("assemble_system: rotation count mismatch");

  const int n = mesh.vertex_count();
  const double arap_scale = 2.0 / (sigma_e * sigma_e);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(L.nonZeros()) * 3 + static_cast<std::size_t>(n) * 9);
  for (int col = 0; col < L.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, col); it; ++it)
      for (int axis = 0; axis < 3; ++axis)
        triplets.emplace_back(3 * it.row() + axis, 3 * col + axis, arap_scale * it.value());
  for (int i = 0; i < n; ++i) {
    if (targets.weights[i] == 0.0) continue;
    const Mat3 block = targets.weights[i] * targets.normals[i] * targets.normals[i].transpose();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) triplets.emplace_back(3 * i + r, 3 * i + c, block(r, c));
  }

  LinearSystem system;
  system.A.resize(3 * n, 3 * n);
  system.A.setFromTriplets(triplets.begin(), triplets.end());

  double max_diag = 0.0;
  for (int k = 0; k < 3 * n; ++k) max_diag = std::max(max_diag, system.A.coeff(k, k));
  const double eps = 1e-9 * max_diag;
  for (int k = 0; k < 3 * n; ++k) system.A.coeffRef(k, k) += eps;

  system.b.resize(3 * n);
  std::vector<Vec3> rhs(n, Vec3::Zero());
  for (const auto& [key, w] : weights) {
    const auto [i, j] = EdgeWeightSet::unpack(key);
    const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
    const Vec3 rotated = 0.5 * w * ((rotations[i] + rotations[j]) * rest);
    rhs[i] += rotated;
    rhs[j] -= rotated;
  }
  for (int i = 0; i < n; ++i) {
    Vec3 d = Vec3::Zero();
    if (targets.weights[i] > 0.0)
      d = targets.weights[i] * targets.normals[i] *
          (targets.normals[i].dot(targets.points[i]));
    const Vec3 bi = arap_scale * rhs[i] + d;
    system.b.segment<3>(3 * i) = bi;
  }
  return system;
}

PcgResult pcg_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, double tol,
                    int max_iter, const Eigen::VectorXd* x0) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || b.size() != n) throw Error("pcg_solve: dimension mismatch");
  if (max_iter <= 0) max_iter = static_cast<int>(30 * n);

  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double d = A.coeff(k, k);
    if (!(d > 0.0)) throw Error("pcg_solve: non-positive diagonal entry");
    inv_diag[k] = 1.0 / d;
  }

  PcgResult result;
  result.x = x0 ? *x0 : Eigen::VectorXd::Zero(n);

  const double norm_b = b.norm();
  if (norm_b == 0.0) {
    result.x.setZero();
    result.converged = true;
    return result;
  }

  Eigen::VectorXd r = b - A * result.x;
  Eigen::VectorXd z = inv_diag.asDiagonal() * r;
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  double res_norm = r.norm();

  while (res_norm > tol * norm_b && result.iterations < max_iter) {
    const Eigen::VectorXd Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(std::abs(pAp) > 0.0) || !std::isfinite(pAp))
      throw Error("pcg_solve: breakdown (p^T A p vanished)");
    const double alpha = rz / pAp;
    result.x += alpha * p;
    r -= alpha * Ap;
    z = inv_diag.asDiagonal() * r;
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
    res_norm = r.norm();
    ++result.iterations;
  }

  result.relative_residual = res_norm / norm_b;
  result.converged = res_norm <= tol * norm_b;
  return result;
}

SurfaceFitResult fit_surface(const LabeledSurfaceMesh& mesh, const FitTargets& targets,
                             const SurfaceFitOptions& options, const RotationSet* warm_start) {
  targets.validate(mesh.vertex_count());
  const EdgeWeightSet weights = cotangent_weights(mesh);
  const Eigen::SparseMatrix<double> L = laplacian(mesh, weights);
  const std::vector<std::vector<int>> rings = one_rings(mesh);
  const std::vector<double> unit_gamma(mesh.vertices.size(), 1.0);

  SurfaceFitResult result;
  result.positions = mesh.vertices;
  result.rotations = warm_start && static_cast<int>(warm_start->size()) == mesh.vertex_count()
                         ? *warm_start
                         : identity_rotations(mesh.vertex_count());

  const auto monitored_energy = [&](const std::vector<Vec3>& positions,
                                    const RotationSet& rotations) {
    double point_to_plane = 0.0;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
      const double d = targets.normals[i].dot(positions[i] - targets.points[i]);
      point_to_plane += targets.weights[i] * d * d;
    }
    return point_to_plane +
           arap_energy(mesh, positions, weights, unit_gamma, rotations, options.sigma_e);
  };

  double previous = monitored_energy(result.positions, result.rotations);
  Eigen::VectorXd x(3 * mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i) x.segment<3>(3 * i) = result.positions[i];

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const LinearSystem system =
        assemble_system(mesh, weights, L, result.rotations, targets, options.sigma_e);
    const PcgResult solve = pcg_solve(system.A, system.b, options.pcg_tol, options.pcg_max_iter, &x);
    if (!solve.converged)
      throw Error("fit_surface: PCG stopped at relative residual " +
                  std::to_string(solve.relative_residual));
    x = solve.x;
    for (int i = 0; i < mesh.vertex_count(); ++i) result.positions[i] = x.segment<3>(3 * i);

    result.rotations = fit_rotations(mesh, result.positions, weights, rings).rotations;
    ++result.iterations;

    const double current = monitored_energy(result.positions, result.rotations);
    result.e_shape.push_back(current);
    const double decrease = previous - current;
    const double scale = std::max(previous, 1e-12);
    previous = current;
    if (decrease <= options.rel_tol * scale) break;
  }
  return result;
}

}  // namespace cortexfit
