#include "dsurv/linalg.hpp"

#include "dsurv/data.hpp"

#include <Eigen/Eigenvalues>

namespace dsurv {

Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a, const std::string& what, double rtol) {
  if (!a.allFinite()) throw SingularMatrixError(what + " has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
  const auto& ev = es.eigenvalues();
  double top = ev.cwiseAbs().maxCoeff();
  if (!(top > 0) || ev.minCoeff() <= rtol * top) throw SingularMatrixError(what + " is singular or not positive definite");
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd inverse_general(const Eigen::MatrixXd& a, const std::string& what, double rtol) {
  if (!a.allFinite()) throw SingularMatrixError(what + " has non-finite entries");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(rtol);
  if (!lu.isInvertible()) throw SingularMatrixError(what + " is singular");
  return lu.inverse();
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& binv, const Eigen::MatrixXd& meat) {
  return symmetrize(binv * meat * binv.transpose());
}

}  // namespace dsurv
