#include "nvmag/nv_depth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <boost/random/normal_distribution.hpp>

#include "nvmag/errors.hpp"
#include "nvmag/least_squares.hpp"
#include "nvmag/philox.hpp"

namespace nvmag {

namespace {
using cd = std::complex<double>;
constexpr double pi = constants::pi;

// integral_a^b exp(z (b - t)) dt, stable for small |z (b - a)|.
cd ramp(cd z, double len) {
  const cd x = z * len;
  if (std::abs(x) < 1e-4) return len * (1.0 + x / 2.0 + x * x / 6.0);
  return (std::exp(x) - 1.0) / z;
}

// 2 integral_0^L (L - u) exp(z u) du.
cd diagonal(cd z, double len) {
  const cd x = z * len;
  if (std::abs(x) < 1e-3) return len * len * (1.0 + x / 3.0 + x * x / 12.0);
  return 2.0 * (std::exp(x) - 1.0 - x) / (z * z);
}
}  // namespace

void ProtonBathModel::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("proton density must be positive");
  if (!(depth > 0.0) || !std::isfinite(depth)) throw ParameterError("NV depth must be positive");
  if (!(t2n_star > 0.0)) throw ParameterError("T2n* must be positive");
  if (diffusion < 0.0) throw ParameterError("diffusion coefficient must be >= 0");
  if (!(b0 > 0.0)) throw ParameterError("static field must be positive");
}

double ProtonBathModel::larmor_omega() const { return std::abs(gamma_n) * b0; }

double ProtonBathModel::line_width() const { return 1.0 / t2n_star + diffusion / (depth * depth); }

double b_rms_squared(const ProtonBathModel& model) {
  model.validate();
  const double c = constants::mu0 * constants::hbar * model.gamma_n / (4.0 * pi);
  const double d3 = model.depth * model.depth * model.depth;
  return model.rho * c * c * 5.0 * pi / (96.0 * d3);
}

double overlap_k(const DDSequence& seq, double larmor_omega, double width) {
  seq.validate();
  if (!(width > 0.0)) throw ParameterError("line width must be positive");
  // Correlation function of the line pair: cos(wL s) exp(-width |s|), so
  // (4/pi^2) K = Re sum_ij y_i y_j integral integral exp(z |t - t'|), z = i wL - width.
  const cd z(-width, larmor_omega);
  std::vector<double> edges{0.0};
  for (double t : seq.pulse_times()) edges.push_back(t);
  edges.push_back(seq.total_time);

  cd total = 0.0;
  cd running = 0.0;  // sum_{j<i} y_j integral_seg_j exp(z (a_i - t')) dt'
  double sign = 1.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double len = edges[i + 1] - edges[i];
    total += diagonal(z, len);
    total += 2.0 * sign * ramp(z, len) * running;
    running = std::exp(z * len) * running + sign * ramp(z, len);
    sign = -sign;
  }
  return pi * pi / 4.0 * total.real();
}

double proton_coherence(const ProtonBathModel& model, const DDSequence& seq, double gamma_e) {
  const double b2 = b_rms_squared(model);
  const double k = overlap_k(seq, model.larmor_omega(), model.line_width());
  return std::exp(-2.0 / (pi * pi) * gamma_e * gamma_e * b2 * k);
}

DDSequence DepthDataset::sequence_at(double tau) const {
  return DDSequence::make(family, n_pulses, tau * n_pulses);
}

void DepthDataset::validate() const {
  if (points.empty()) throw DataError("depth dataset is empty");
  if (!(b0 > 0.0)) throw DataError("depth dataset needs a positive b0_tesla");
  if (!(rho > 0.0)) throw DataError("depth dataset needs a positive proton density");
  DDSequence::make(family, n_pulses, 1.0);
  for (const auto& p : points) {
    if (!std::isfinite(p.tau) || !std::isfinite(p.coherence) || !std::isfinite(p.sigma))
      throw DataError("depth dataset contains non-finite values");
    if (!(p.tau > 0.0)) throw DataError("pulse spacing must be positive");
    if (p.sigma < 0.0) throw DataError("negative uncertainty");
  }
}

DepthDataset proton_signal_coherence(const ProtonBathModel& model, DDFamily family, int n_pulses,
                                     const std::vector<double>& taus, double gamma_e) {
  DepthDataset data;
  data.family = family;
  data.n_pulses = n_pulses;
  data.b0 = model.b0;
  data.rho = model.rho;
  for (double tau : taus) {
    const double c = proton_coherence(model, data.sequence_at(tau), gamma_e);
    data.points.push_back({tau, c, 0.0});
  }
  return data;
}

DepthFit fit_depth(const DepthDataset& data, const DepthFitOptions& options) {
  data.validate();
  const auto& pts = data.points;
  const int m = static_cast<int>(pts.size());
  const auto min_it = std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.coherence < b.coherence;
  });
  if (min_it->coherence >= 0.95)
    throw FitError("no proton dip visible (minimum coherence " +
                   std::to_string(min_it->coherence) + "); depth fit is degenerate");
  if (m < 3) throw DataError("depth fit needs at least 3 points");

  bool weighted = true;
  for (const auto& p : pts) weighted = weighted && p.sigma > 0.0;

  ProtonBathModel base;
  base.rho = data.rho;
  base.gamma_n = options.gamma_n;
  base.b0 = data.b0;
  base.t2n_star = options.initial_t2n_star;
  const double wl = base.larmor_omega();

  // Depth guess from the dip depth, assuming the initial line width.
  const double width0 = 1.0 / options.initial_t2n_star;
  const double k_min = overlap_k(data.sequence_at(min_it->tau), wl, width0);
  const double c_min = std::max(min_it->coherence, 1e-3);
  const double b2_0 = -std::log(c_min) * pi * pi / (2.0 * constants::gamma_e * constants::gamma_e * k_min);
  base.depth = 1e-9;
  const double b2_at_1nm = b_rms_squared(base);
  const double d0 = 1e-9 * std::cbrt(b2_at_1nm / b2_0);

  ResidualFunction residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    ProtonBathModel model = base;
    model.depth = std::exp(p(0)) * 1e-9;
    const double b2 = b_rms_squared(model);
    const double width = std::exp(p(1));
    for (int i = 0; i < m; ++i) {
      const auto& pt = pts[static_cast<std::size_t>(i)];
      const double k = overlap_k(data.sequence_at(pt.tau), wl, width);
      const double c = std::exp(-2.0 / (pi * pi) * constants::gamma_e * constants::gamma_e * b2 * k);
      r(i) = (c - pt.coherence) / (weighted ? pt.sigma : 1.0);
    }
  };

  LeastSquaresOptions opts;
  opts.scale_covariance = !weighted;
  Eigen::VectorXd init(2);
  init << std::log(d0 * 1e9), std::log(width0);
  LeastSquaresResult best = levenberg_marquardt(residuals, m, init, opts);
  // Second start with a broader line in case the first settled on the wrong side.
  init(1) = std::log(width0 * 4.0);
  LeastSquaresResult alt = levenberg_marquardt(residuals, m, init, opts);
  if (alt.chi2 < best.chi2) best = std::move(alt);
  if (!best.converged || !best.covariance.allFinite())
    throw FitError("depth fit did not converge", std::sqrt(best.chi2));

  DepthFit fit;
  fit.depth = std::exp(best.params(0)) * 1e-9;
  fit.depth_sigma = fit.depth * best.sigma(0);
  fit.line_width = std::exp(best.params(1));
  fit.line_width_sigma = fit.line_width * best.sigma(1);
  fit.residual_norm = std::sqrt(best.chi2);
  fit.n_points = m;
  return fit;
}

DepthDataset synthetic_depth_dataset(const ProtonBathModel& model,
                                     const SyntheticDepthOptions& options) {
  model.validate();
  if (options.n_points < 3) throw ParameterError("need at least 3 points");
  const double wl = model.larmor_omega();
  const double tau_dip = pi / wl;
  const double b2 = b_rms_squared(model);
  const double g2 = constants::gamma_e * constants::gamma_e;

  int best_n = 16;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int n = 16; n <= 8192; n *= 2) {
    const DDSequence seq = DDSequence::make(DDFamily::xy16, n, n * tau_dip);
    const double c = std::exp(-2.0 / (pi * pi) * g2 * b2 * overlap_k(seq, wl, model.line_width()));
    const double gap = std::abs(std::log(c) - std::log(options.target_dip));
    if (gap < best_gap) {
      best_gap = gap;
      best_n = n;
    }
  }

  // Span several dip widths in tau.
  const double total = best_n * tau_dip;
  const double half_width = model.line_width() + pi / total;
  const double span = 6.0 * half_width / wl;
  std::vector<double> taus;
  for (int i = 0; i < options.n_points; ++i) {
    const double x = -1.0 + 2.0 * i / (options.n_points - 1.0);
    taus.push_back(tau_dip * (1.0 + span * x));
  }
  DepthDataset data = proton_signal_coherence(model, DDFamily::xy16, best_n, taus);
  if (options.noise_sigma > 0.0) {
    Philox4x32 rng(options.seed, 0);
    boost::random::normal_distribution<double> noise(0.0, options.noise_sigma);
    for (auto& p : data.points) {
      p.coherence += noise(rng);
      p.sigma = options.noise_sigma;
    }
  }
  return data;
}

}  // namespace nvmag
