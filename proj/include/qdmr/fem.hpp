#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "qdmr/sphere_mesh.hpp"

namespace qdmr {

enum class QspacePde { LaplaceBeltrami, Biharmonic };

/// Cotangent stiffness K (positive semidefinite, rows sum to zero) and the
/// lumped mass diagonal M (one third of incident triangle area per vertex).
struct FemOperators {
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd lumped_mass;
};

FemOperators assemble_operators(const SphereMesh& mesh);

/// Dirichlet solver over one fixed known-vertex set: factorizes once, then
/// solves for any number of boundary value vectors. LH solves
/// K_ff u_f = -K_fk u_k; BH uses A = K M^-1 K with the lumped mass.
class DirichletSolver {
public:
  DirichletSolver(const FemOperators& ops, QspacePde pde,
                  std::vector<int> known_vertices);

  /// known_values[i] belongs to known_vertices[i]; returns values at all
  /// vertices with the known ones passed through.
  std::vector<double> solve(const std::vector<double>& known_values) const;

  int vertex_count() const { return total_; }

private:
  int total_ = 0;
  std::vector<int> known_vertices_;
  std::vector<int> free_vertices_;
  Eigen::SparseMatrix<double> coupling_;  // A_fk
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factorization_;
};

/// One-shot convenience wrapper around DirichletSolver.
std::vector<double> solve_dirichlet(const FemOperators& ops, QspacePde pde,
                                    const std::vector<int>& known_vertices,
                                    const std::vector<double>& known_values);

}  // namespace qdmr
