#pragma once

#include <Eigen/Dense>
#include <string>

namespace dsurv {

// Throw SingularMatrixError when the smallest eigenvalue is below rtol * largest.
Eigen::MatrixXd inverse_spd(const Eigen::MatrixXd& a, const std::string& what, double rtol = 1e-12);
Eigen::MatrixXd inverse_general(const Eigen::MatrixXd& a, const std::string& what, double rtol = 1e-12);

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Eigen::MatrixXd& a);  // of the symmetric part

// binv * meat * binv^T, symmetrized
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& binv, const Eigen::MatrixXd& meat);

/** Neumaier compensated accumulator. */
class CompensatedSum {
public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      c_ += (sum_ - t) + v;
    else
      c_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

private:
  double sum_ = 0;
  double c_ = 0;
};

}  // namespace dsurv
