#pragma once

#include <Eigen/Dense>

#include <cstdint>

// Coupling-network construction.
//
// The K = M*N assets are organised into M clusters of N.  The block-diagonal
// Laplacian L has one N x N block per cluster with 1 - N on the diagonal and
// 1 off it, so each block has eigenvalue 0 (simple) and -N (multiplicity
// N - 1).  Conjugating by a random orthogonal matrix Q,
//
//   C = Q L Q^T,
//
// hides the cluster structure from direct inspection while preserving the
// spectrum exactly: 0 with multiplicity M and -N with multiplicity K - M.
// The M-dimensional nullspace of C is what the factor analysis recovers.

namespace cmfactor {

struct NetworkParams {
  int m = 3;                 // number of clusters
  int n = 10;                // assets per cluster
  std::uint64_t seed = 0;    // rotation seed

  int k() const noexcept { return m * n; }
  // Throws std::invalid_argument when m < 1 or n < 2.
  void validate() const;
};

struct CouplingNetwork {
  NetworkParams params;
  Eigen::MatrixXd laplacian;  // K x K block Laplacian L
  Eigen::MatrixXd rotation;   // K x K orthogonal Q
  Eigen::MatrixXd coupling;   // K x K symmetric C = Q L Q^T
};

// Eigenvalues with |lambda| below this threshold count as members of the
// nullspace.  The coupling matrices here have entries of order N <= 100, so
// 1e-9 sits far above round-off yet far below the -N eigenvalue branch.
inline constexpr double k_zero_eigenvalue_tol = 1e-9;

// Block-diagonal Laplacian described above.
Eigen::MatrixXd build_laplacian(const NetworkParams& params);

// Random K x K orthogonal matrix: QR decomposition of a matrix of iid
// standard normals, with column signs fixed so the diagonal of R is
// non-negative (this makes the draw Haar-uniform and the output unique).
Eigen::MatrixXd random_orthogonal(int k, std::uint64_t seed);

// Assembles L, Q and the conjugated coupling C = Q L Q^T.  C is explicitly
// symmetrised after the product so C == C^T holds exactly.
CouplingNetwork build_coupling(const NetworkParams& params);

// Orthogonal projector P onto the nullspace of the coupling matrix (the
// eigenvectors with |lambda| < k_zero_eigenvalue_tol).  Satisfies P^2 = P,
// P C = 0 and trace(P) = M.
Eigen::MatrixXd nullspace_projector(const CouplingNetwork& net);

}  // namespace cmfactor
