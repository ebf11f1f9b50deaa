#include "nvmag/least_squares.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

struct Functor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const ResidualFunction* f = nullptr;
  int n_params = 0;
  int n_residuals = 0;
  mutable int evaluations = 0;

  int inputs() const { return n_params; }
  int values() const { return n_residuals; }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    ++evaluations;
    fvec.resize(n_residuals);
    (*f)(x, fvec);
    for (int i = 0; i < n_residuals; ++i) {
      if (!std::isfinite(fvec(i))) fvec(i) = 1e150;
    }
    return 0;
  }
};

Eigen::MatrixXd central_jacobian(const ResidualFunction& f, const Eigen::VectorXd& p, int m) {
  const int n = static_cast<int>(p.size());
  Eigen::MatrixXd jac(m, n);
  Eigen::VectorXd rp(m), rm(m);
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(p(j)));
    Eigen::VectorXd pp = p, pm = p;
    pp(j) += h;
    pm(j) -= h;
    f(pp, rp);
    f(pm, rm);
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

}  // namespace

double LeastSquaresResult::sigma(int i) const { return std::sqrt(covariance(i, i)); }

LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, int n_residuals,
                                       Eigen::VectorXd initial,
                                       const LeastSquaresOptions& options) {
  const int n = static_cast<int>(initial.size());
  if (n_residuals < n) {
    throw FitError("least squares needs at least as many residuals (" +
                   std::to_string(n_residuals) + ") as parameters (" + std::to_string(n) + ")");
  }

  Functor functor;
  functor.f = &f;
  functor.n_params = n;
  functor.n_residuals = n_residuals;
  Eigen::NumericalDiff<Functor, Eigen::Central> numdiff(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor, Eigen::Central>> lm(numdiff);
  lm.parameters.maxfev = options.max_evaluations;
  lm.parameters.xtol = options.tolerance;
  lm.parameters.ftol = options.tolerance;
  const auto status = lm.minimize(initial);

  LeastSquaresResult out;
  out.params = initial;
  out.residuals.resize(n_residuals);
  f(out.params, out.residuals);
  out.chi2 = out.residuals.squaredNorm();
  out.dof = n_residuals - n;
  out.evaluations = static_cast<int>(lm.nfev);
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  if (!std::isfinite(out.chi2)) throw FitError("fit produced non-finite residuals");

  const Eigen::MatrixXd jac = central_jacobian(f, out.params, n_residuals);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (!lu.isInvertible()) {
    out.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
    return out;
  }
  out.covariance = lu.inverse();
  if (options.scale_covariance && out.dof > 0) out.covariance *= out.chi2 / out.dof;
  return out;
}

}  // namespace nvmag
