#include "nvmag/noise_spect.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "nvmag/errors.hpp"
#include "nvmag/least_squares.hpp"

namespace nvmag {

namespace {
constexpr double pi = constants::pi;
}

double spectrum_zeroth(double coherence, const DDSequence& seq, double gamma) {
  seq.validate();
  if (!(coherence > 0.0) || !std::isfinite(coherence))
    throw DataError("coherence must be positive to invert (got " + std::to_string(coherence) + ")");
  // Measurement noise can push C slightly above one; that carries no dephasing.
  if (coherence >= 1.0) return 0.0;
  return -2.0 * std::log(coherence) / (gamma * gamma * seq.total_time);
}

NoiseSpectrum spectrum_zeroth(const std::vector<CoherenceCurve>& curves, double gamma) {
  std::map<double, std::pair<double, int>> acc;
  for (const auto& curve : curves) {
    curve.validate();
    for (const auto& p : curve.points) {
      const DDSequence seq = curve.sequence_at(p.time);
      auto& slot = acc[seq.omega0()];
      slot.first += spectrum_zeroth(p.coherence, seq, gamma);
      slot.second += 1;
    }
  }
  if (acc.empty()) throw DataError("no coherence points to invert");
  std::vector<double> omega, s;
  for (const auto& [w, v] : acc) {
    omega.push_back(w);
    s.push_back(v.first / v.second);
  }
  return NoiseSpectrum(std::move(omega), std::move(s));
}

NoiseSpectrum spectrum_iterate_once(const NoiseSpectrum& previous, const NoiseSpectrum& zeroth,
                                    int k_max, int* clipped) {
  if (k_max < 1) throw ParameterError("k_max must be >= 1");
  std::vector<double> s(zeroth.size());
  int n_clipped = 0;
  for (std::size_t i = 0; i < zeroth.size(); ++i) {
    const double w0 = zeroth.omega()[i];
    double correction = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      const double h = 2.0 * k + 1.0;
      correction += previous(h * w0) / (h * h);
    }
    // Remainder treating S as constant beyond the last explicit harmonic.
    correction += previous((2.0 * k_max + 1.0) * w0) / (4.0 * (k_max + 1.0));
    double value = pi * pi / 8.0 * zeroth.values()[i] - correction;
    if (value < 0.0) {
      value = 0.0;
      ++n_clipped;
    }
    s[i] = value;
  }
  if (clipped) *clipped = n_clipped;
  return NoiseSpectrum(zeroth.omega(), std::move(s));
}

IterationResult spectrum_iterate(const NoiseSpectrum& zeroth, const IterationOptions& options) {
  if (zeroth.empty()) throw DataError("empty zeroth-order spectrum");
  if (options.max_iterations < 1) throw ParameterError("need at least one iteration");
  IterationResult result;
  const double grid_max = zeroth.omega().back();
  for (double w : zeroth.omega()) result.extrapolated = result.extrapolated || 3.0 * w > grid_max;

  NoiseSpectrum prev = options.start == IterationStart::zeroth
                           ? zeroth
                           : NoiseSpectrum(zeroth.omega(), std::vector<double>(zeroth.size(), 0.0));
  for (int n = 1; n <= options.max_iterations; ++n) {
    NoiseSpectrum next = spectrum_iterate_once(prev, zeroth, options.k_max, &result.clipped);
    const double scale = *std::max_element(next.values().begin(), next.values().end());
    double change = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double a = next.values()[i];
      const double b = prev.values()[i];
      const double denom = a > 0.0 ? a : (scale > 0.0 ? scale : 1.0);
      change = std::max(change, std::abs(a - b) / denom);
    }
    result.changes.push_back(change);
    result.iterations = n;
    prev = std::move(next);
    if (change <= options.tolerance) {
      result.converged = true;
      break;
    }
  }
  result.spectrum = std::move(prev);
  return result;
}

CoherenceCurve deduct_t1(const CoherenceCurve& curve, double t1, T1Envelope envelope) {
  if (!(t1 > 0.0)) throw ParameterError("T1 must be positive");
  CoherenceCurve out = curve;
  const double rate = envelope == T1Envelope::exponential ? 1.0 / t1 : 0.5 / t1;
  for (auto& p : out.points) {
    const double factor = std::exp(p.time * rate);
    p.coherence = std::clamp(p.coherence * factor, 0.0, 1.05);
    p.sigma *= factor;
  }
  return out;
}

LorentzianFit fit_lorentzian(const NoiseSpectrum& spectrum, const LorentzianFitOptions& options) {
  std::vector<double> w, log_s;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (spectrum.values()[i] > 0.0) {
      w.push_back(spectrum.omega()[i]);
      log_s.push_back(std::log(spectrum.values()[i]));
    }
  }
  const int m = static_cast<int>(w.size());
  if (m < 4) throw DataError("Lorentzian fit needs at least 4 positive grid points");

  // Shape S = off + A / (1 + v x^2), x = (w - c) / w_ref. v = 0 is the flat
  // limit, so an unbounded width is an interior point of the parameter space.
  const double w_ref = w.back();
  const bool fit_center = !options.centered;
  const bool fit_offset = options.with_offset;
  const int n = 2 + (fit_center ? 1 : 0) + (fit_offset ? 1 : 0);
  const int i_center = 2;
  const int i_offset = fit_center ? 3 : 2;

  const double s_peak = std::exp(*std::max_element(log_s.begin(), log_s.end()));
  const double s_low = std::exp(*std::min_element(log_s.begin(), log_s.end()));

  auto model = [&](const Eigen::VectorXd& p, double omega) {
    const double amp = std::exp(p(0));
    const double x = (omega - (fit_center ? p(i_center) * w_ref : 0.0)) / w_ref;
    const double denom = 1.0 + p(1) * x * x;
    if (denom <= 0.0) return -1.0;
    return (fit_offset ? p(i_offset) * s_low : 0.0) + amp / denom;
  };
  ResidualFunction residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (int i = 0; i < m; ++i) {
      const double s = model(p, w[static_cast<std::size_t>(i)]);
      r(i) = s > 0.0 ? std::log(s) - log_s[static_cast<std::size_t>(i)] : 1e3;
    }
  };

  // Initial width from the half-maximum crossing.
  double half_w = w_ref;
  for (int i = 0; i < m; ++i) {
    if (std::exp(log_s[static_cast<std::size_t>(i)]) < 0.5 * s_peak) {
      half_w = std::max(w[static_cast<std::size_t>(i)], w.front());
      break;
    }
  }
  double center0 = 0.0;
  if (fit_center) {
    const auto it = std::max_element(log_s.begin(), log_s.end());
    center0 = w[static_cast<std::size_t>(it - log_s.begin())] / w_ref;
  }
  Eigen::VectorXd init(n);
  init(0) = std::log(s_peak);
  init(1) = std::pow(w_ref / std::max(std::abs(half_w - center0 * w_ref), 1e-6 * w_ref), 2);
  if (fit_center) init(i_center) = center0;
  if (fit_offset) init(i_offset) = 0.5;

  LeastSquaresResult best;
  bool have = false;
  std::string last_error;
  for (double scale : {1.0, 0.1, 10.0}) {
    Eigen::VectorXd x0 = init;
    x0(1) *= scale;
    try {
      LeastSquaresResult r = levenberg_marquardt(residuals, m, x0);
      if (!have || r.chi2 < best.chi2) {
        best = std::move(r);
        have = true;
      }
    } catch (const FitError& e) {
      last_error = e.what();
    }
  }
  if (!have) throw FitError("Lorentzian fit failed: " + last_error);

  LorentzianFit fit;
  const auto& p = best.params;
  fit.params.amplitude = std::exp(p(0));
  fit.amplitude_sigma = fit.params.amplitude * best.sigma(0);
  fit.params.center = fit_center ? p(i_center) * w_ref : 0.0;
  fit.center_sigma = fit_center ? best.sigma(i_center) * w_ref : 0.0;
  fit.params.offset = fit_offset ? p(i_offset) * s_low : 0.0;
  fit.offset_sigma = fit_offset ? best.sigma(i_offset) * s_low : 0.0;
  fit.residual_norm = std::sqrt(best.chi2);

  const double v = p(1);
  const double v_sigma = best.sigma(1);
  // Width beyond 1e3 times the grid, or v compatible with zero.
  if (v <= 1e-6 || (std::isfinite(v_sigma) && v < v_sigma)) {
    fit.width_unbounded = true;
    fit.params.width = std::numeric_limits<double>::infinity();
    fit.width_sigma = std::numeric_limits<double>::infinity();
  } else {
    fit.params.width = w_ref / std::sqrt(v);
    fit.width_sigma = fit.params.width * 0.5 * v_sigma / v;
  }
  if (!best.converged && !fit.width_unbounded)
    throw FitError("Lorentzian fit did not converge", fit.residual_norm);
  return fit;
}

double erl_noise_line(double l_eff) {
  if (!(l_eff > 0.0)) throw ParameterError("effective length must be positive");
  return 2.0 * constants::mu0 * constants::hbar / (constants::euler_e * l_eff * l_eff * l_eff);
}

double db_below(double value, double reference) {
  if (!(value > 0.0) || !(reference > 0.0)) throw ParameterError("dB comparison needs positive values");
  return 10.0 * std::log10(reference / value);
}

ErlLineComparison compare_to_erl_line(const NoiseSpectrum& spectrum, double l_eff,
                                      double omega_min) {
  ErlLineComparison c;
  c.line = erl_noise_line(l_eff);
  double sum = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (spectrum.omega()[i] >= omega_min) {
      sum += spectrum.values()[i];
      ++c.points;
    }
  }
  if (c.points == 0) throw DataError("spectrum has no points above the comparison frequency");
  c.plateau = sum / c.points;
  c.db_below = db_below(c.plateau, c.line);
  return c;
}

}  // namespace nvmag
