#pragma once

// Nonlinear least squares (Levenberg-Marquardt) with parameter covariance.

#include <functional>

#include <Eigen/Dense>

namespace nvmag {

// Fills r (pre-sized to the residual count) for parameters p.
using ResidualFunction = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LeastSquaresOptions {
  int max_evaluations = 4000;
  double tolerance = 1e-12;
  // Scale the covariance by chi^2 / dof. Use false when residuals are already
  // divided by known standard deviations.
  bool scale_covariance = true;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd residuals;
  double chi2 = 0.0;
  int dof = 0;
  int evaluations = 0;
  bool converged = false;

  double sigma(int i) const;
};

// Throws FitError when the problem is underdetermined or the Jacobian at the
// solution is singular.
LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, int n_residuals,
                                       Eigen::VectorXd initial,
                                       const LeastSquaresOptions& options = {});

}  // namespace nvmag
