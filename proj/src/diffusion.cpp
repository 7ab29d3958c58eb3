#include "gradflow/diffusion.hpp"

#include <stdexcept>

namespace gradflow {

DiffusionSpec::DiffusionSpec(const Eigen::MatrixXd& a) : a_(a) {
  if (a.rows() < 1 || a.rows() != a.cols()) throw std::invalid_argument("diffusion tensor must be square");
  if (!a.isApprox(a.transpose(), 1e-14) && !(a - a.transpose()).isZero(1e-14)) {
    throw std::invalid_argument("diffusion tensor must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  lambda_min_ = eig.eigenvalues().minCoeff();
  lambda_max_ = eig.eigenvalues().maxCoeff();
  if (!(lambda_min_ > 0.0)) throw std::invalid_argument("diffusion tensor must be positive definite");
  identity_ = a.isIdentity(0.0);
  sqrt_a_ = identity_ ? a : eig.operatorSqrt();
}

}  // namespace gradflow
