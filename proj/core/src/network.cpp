#include "cmfactor/network.hpp"

#include "cmfactor/rng.hpp"

#include <stdexcept>
#include <vector>

namespace cmfactor {

void NetworkParams::validate() const {
  if (m < 1) {
    throw std::invalid_argument("NetworkParams: need at least one cluster (m >= 1)");
  }
  if (n < 2) {
    throw std::invalid_argument("NetworkParams: need at least two assets per cluster (n >= 2)");
  }
}

Eigen::MatrixXd build_laplacian(const NetworkParams& params) {
  params.validate();
  const int k = params.k();
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(k, k);
  for (int block = 0; block < params.m; ++block) {
    const int off = block * params.n;
    for (int i = 0; i < params.n; ++i) {
      for (int j = 0; j < params.n; ++j) {
        lap(off + i, off + j) = (i == j) ? 1.0 - params.n : 1.0;
      }
    }
  }
  return lap;
}

Eigen::MatrixXd random_orthogonal(int k, std::uint64_t seed) {
  if (k < 1) {
    throw std::invalid_argument("random_orthogonal: dimension must be at least 1");
  }
  rng::Engine engine(seed);
  Eigen::MatrixXd a(k, k);
  for (int col = 0; col < k; ++col) {
    for (int row = 0; row < k; ++row) {
      a(row, col) = rng::standard_normal(engine);
    }
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix the sign convention: flip columns where R's diagonal is negative so
  // the factorisation is unique and the rotation is Haar-distributed.
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (int j = 0; j < k; ++j) {
    if (packed(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

CouplingNetwork build_coupling(const NetworkParams& params) {
  CouplingNetwork net;
  net.params = params;
  net.laplacian = build_laplacian(params);
  net.rotation = random_orthogonal(params.k(), params.seed);
  const Eigen::MatrixXd c = net.rotation * net.laplacian * net.rotation.transpose();
  net.coupling = 0.5 * (c + c.transpose());
  return net;
}

Eigen::MatrixXd nullspace_projector(const CouplingNetwork& net) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(net.coupling);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("nullspace_projector: eigensolver failed to converge");
  }
  std::vector<int> kernel;
  for (int i = 0; i < net.coupling.rows(); ++i) {
    if (std::abs(solver.eigenvalues()[i]) < k_zero_eigenvalue_tol) {
      kernel.push_back(i);
    }
  }
  if (kernel.empty()) {
    throw std::runtime_error("nullspace_projector: coupling matrix has no nullspace");
  }
  Eigen::MatrixXd basis(net.coupling.rows(), static_cast<int>(kernel.size()));
  for (std::size_t j = 0; j < kernel.size(); ++j) {
    basis.col(static_cast<int>(j)) = solver.eigenvectors().col(kernel[j]);
  }
  Eigen::MatrixXd proj = basis * basis.transpose();
  proj = 0.5 * (proj + proj.transpose());
  return proj;
}

}  // namespace cmfactor
