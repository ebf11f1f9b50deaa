#include "nvmag/dd_filter.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

using cd = std::complex<double>;
constexpr double pi = constants::pi;

// Integral over y(t) and t y(t) for the small-omega expansion.
// Taylor series of integral y(t) e^{iwt} dt about T/2, for |wT| < 1 where the
// closed form loses digits to cancellation. Moments c_m = integral y u^m du.
cd toggling_series(const DDSequence& seq, double omega) {
  constexpr int terms = 32;
  const double half = 0.5 * seq.total_time;
  std::vector<double> edges{-half};
  for (double t : seq.pulse_times()) edges.push_back(t - half);
  edges.push_back(half);
  std::array<double, terms> c{};
  for (std::size_t j = 0; j + 1 < edges.size(); ++j) {
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    double pa = edges[j], pb = edges[j + 1];
    for (int m = 0; m < terms; ++m) {
      c[m] += sign * (pb - pa) / (m + 1);
      pa *= edges[j];
      pb *= edges[j + 1];
    }
  }
  cd sum = 0.0, factor = 1.0;
  for (int m = 0; m < terms; ++m) {
    sum += factor * c[m];
    factor *= cd(0.0, omega) / double(m + 1);
  }
  return sum;
}

// sum_{m=1}^{N} (-1)^m exp(i w t_m) with t_m = (m - 1/2) tau.
cd alternating_phase_sum(int n, double omega, double tau) {
  const cd q = -std::polar(1.0, omega * tau);
  const cd lead = std::polar(1.0, -0.5 * omega * tau);
  if (std::abs(1.0 - q) > 1e-6) return lead * q * (1.0 - std::pow(q, n)) / (1.0 - q);
  cd sum = 0.0;
  cd term = q;
  for (int m = 1; m <= n; ++m) {
    sum += term;
    term *= q;
  }
  return lead * sum;
}

// Harmonic upper limit of the explicitly integrated band.
double band_limit(const DDSequence& seq, int k_max) {
  if (seq.n_pulses == 0) return 2.0 * pi * (k_max + 1) / seq.total_time;
  return (2.0 * k_max + 2.0) * seq.omega0();
}

// integral_{w_min}^{inf} S(w) c / w^2 dw / pi with u = 1 / w.
double tail_integral(const SpectralDensity& spectrum, double w_min, double c) {
  // Divergence: S growing like w^a with a >= 1 makes the tail infinite.
  const double s3 = spectrum(w_min * 1e3);
  const double s4 = spectrum(w_min * 1e4);
  if (s3 > 0.0 && s4 > 0.0) {
    const double exponent = std::log10(s4 / s3);
    if (exponent >= 0.999) {
      std::ostringstream msg;
      msg << "phase variance integral diverges: spectrum grows as omega^" << exponent
          << " above " << w_min << " rad/s";
      throw NumericalError(msg.str());
    }
  }
  if (!std::isfinite(s4)) throw NumericalError("spectrum is not finite in the filter tail");
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double u) { return u > 0.0 ? spectrum(1.0 / u) : spectrum(w_min * 1e12); };
  const double value = integrator.integrate(f, 0.0, 1.0 / w_min);
  return c * value / pi;
}

}  // namespace

std::string to_string(DDFamily family) {
  switch (family) {
    case DDFamily::ramsey: return "Ramsey";
    case DDFamily::cpmg: return "CPMG";
    case DDFamily::xy8: return "XY8";
    case DDFamily::xy16: return "XY16";
  }
  return "unknown";
}

DDFamily parse_dd_family(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "RAMSEY" || s == "FID") return DDFamily::ramsey;
  if (s == "CPMG") return DDFamily::cpmg;
  if (s == "XY8") return DDFamily::xy8;
  if (s == "XY16") return DDFamily::xy16;
  throw DataError("unknown sequence family '" + name + "'");
}

DDSequence DDSequence::make(DDFamily family, int n_pulses, double total_time) {
  DDSequence seq{family, n_pulses, total_time};
  seq.validate();
  return seq;
}

int DDSequence::base_block() const {
  switch (family) {
    case DDFamily::ramsey: return 0;
    case DDFamily::cpmg: return 1;
    case DDFamily::xy8: return 8;
    case DDFamily::xy16: return 16;
  }
  return 1;
}

void DDSequence::validate() const {
  if (!(total_time > 0.0) || !std::isfinite(total_time))
    throw ParameterError("total time must be positive");
  if (family == DDFamily::ramsey) {
    if (n_pulses != 0) throw ParameterError("Ramsey sequence has no pi pulses");
    return;
  }
  const int block = base_block();
  if (n_pulses <= 0 || n_pulses % block != 0) {
    throw ParameterError(to_string(family) + " needs a positive multiple of " +
                         std::to_string(block) + " pulses");
  }
}

double DDSequence::spacing() const {
  return n_pulses > 0 ? total_time / n_pulses : total_time;
}

double DDSequence::omega0() const { return pi * n_pulses / total_time; }

std::vector<double> DDSequence::pulse_times() const {
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(n_pulses));
  const double tau = spacing();
  for (int j = 1; j <= n_pulses; ++j) t.push_back((j - 0.5) * tau);
  return t;
}

std::vector<double> DDSequence::pulse_phases() const {
  constexpr double x = 0.0;
  constexpr double y = pi / 2.0;
  static const double xy8[8] = {x, y, x, y, y, x, y, x};
  std::vector<double> phases;
  phases.reserve(static_cast<std::size_t>(n_pulses));
  for (int j = 0; j < n_pulses; ++j) {
    switch (family) {
      case DDFamily::ramsey: break;
      case DDFamily::cpmg: phases.push_back(y); break;
      case DDFamily::xy8: phases.push_back(xy8[j % 8]); break;
      case DDFamily::xy16: {
        const double base = xy8[j % 8];
        phases.push_back((j % 16) < 8 ? base : base + pi);
        break;
      }
    }
  }
  return phases;
}

std::string DDSequence::name() const {
  if (family == DDFamily::ramsey) return "Ramsey";
  return to_string(family) + "-" + std::to_string(n_pulses);
}

double DDSequence::toggling(double t) const {
  if (n_pulses == 0) return 1.0;
  // Number of pulses applied before t.
  const double k = std::floor(t / spacing() + 0.5);
  const long flips = std::clamp(static_cast<long>(k), 0L, static_cast<long>(n_pulses));
  return flips % 2 == 0 ? 1.0 : -1.0;
}

FilterFunction filter_delta_comb(const DDSequence& seq, int k_max) {
  seq.validate();
  if (k_max < 0) throw ParameterError("k_max must be >= 0");
  FilterFunction f;
  f.omega0 = seq.omega0();
  f.scale = pi * seq.total_time;
  for (int k = 0; k <= k_max; ++k) {
    const double h = 2.0 * k + 1.0;
    f.harmonic_omega.push_back(h * f.omega0);
    f.weights.push_back(8.0 / (pi * pi * h * h));
  }
  return f;
}

double exact_filter(const DDSequence& seq, double omega) {
  seq.validate();
  if (omega < 0.0) throw ParameterError("filter frequency must be non-negative");
  const double total = seq.total_time;
  if (omega * total < 1.0) return std::norm(toggling_series(seq, omega));
  const int n = seq.n_pulses;
  const double parity = (n % 2 == 0) ? 1.0 : -1.0;
  cd bracket = parity * std::polar(1.0, omega * total) - 1.0;
  if (n > 0) bracket -= 2.0 * alternating_phase_sum(n, omega, seq.spacing());
  return std::norm(bracket) / (omega * omega);
}

double phase_variance(const SpectralDensity& spectrum, const DDSequence& seq, double gamma,
                      const FilterIntegrationOptions& options) {
  seq.validate();
  if (options.k_max < 0) throw ParameterError("k_max must be >= 0");
  const double total = seq.total_time;
  const int n = seq.n_pulses;

  if (options.model == FilterModel::delta_comb) {
    if (n == 0) throw ParameterError("delta-comb filter needs at least one pulse");
    const FilterFunction comb = filter_delta_comb(seq, options.k_max);
    double sum = 0.0;
    for (std::size_t k = 0; k < comb.weights.size(); ++k) {
      const double s = spectrum(comb.harmonic_omega[k]);
      if (!std::isfinite(s) || s < 0.0) throw NumericalError("spectrum invalid at a comb harmonic");
      sum += comb.weights[k] * s;
    }
    const double tail = tail_integral(spectrum, band_limit(seq, options.k_max), 4.0 * n);
    return gamma * gamma * (total * sum + tail);
  }

  const double w_max = band_limit(seq, options.k_max);
  double panel = pi / total;
  if (std::isfinite(spectrum.feature_width)) panel = std::min(panel, 0.5 * spectrum.feature_width);
  const std::size_t n_panels = static_cast<std::size_t>(std::ceil(w_max / panel));
  if (n_panels > 20'000'000) throw NumericalError("spectrum feature too narrow for quadrature");
  const double h = w_max / static_cast<double>(n_panels);
  auto integrand = [&](double w) { return spectrum(w) * exact_filter(seq, w); };
  double sum = 0.0;
  for (std::size_t p = 0; p < n_panels; ++p) {
    const double a = h * static_cast<double>(p);
    sum += boost::math::quadrature::gauss<double, 15>::integrate(integrand, a, a + h);
  }
  if (!std::isfinite(sum)) throw NumericalError("phase variance quadrature is not finite");
  const double tail = tail_integral(spectrum, w_max, 4.0 * n + 2.0);
  return gamma * gamma * (sum / pi + tail);
}

double coherence_from_spectrum(const SpectralDensity& spectrum, const DDSequence& seq,
                               double gamma, const FilterIntegrationOptions& options) {
  return std::exp(-0.5 * phase_variance(spectrum, seq, gamma, options));
}

DDSequence CoherenceCurve::sequence_at(double total_time) const {
  return DDSequence::make(family, n_pulses, total_time);
}

void CoherenceCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.time) || !std::isfinite(p.coherence) || !std::isfinite(p.sigma))
      throw DataError("coherence curve contains non-finite values");
    if (!(p.time > 0.0)) throw DataError("coherence times must be positive");
    if (i > 0 && !(p.time > points[i - 1].time))
      throw DataError("coherence times must be strictly increasing");
    if (p.coherence < -0.05 || p.coherence > 1.05)
      throw DataError("coherence value outside [-0.05, 1.05]");
    if (p.sigma < 0.0) throw DataError("negative uncertainty");
  }
}

CoherenceCurve synthesize_curve(const SpectralDensity& spectrum, DDFamily family, int n_pulses,
                                const std::vector<double>& times, double gamma,
                                const FilterIntegrationOptions& options) {
  CoherenceCurve curve;
  curve.family = family;
  curve.n_pulses = n_pulses;
  for (double t : times) {
    const DDSequence seq = DDSequence::make(family, n_pulses, t);
    curve.points.push_back({t, coherence_from_spectrum(spectrum, seq, gamma, options), 0.0});
  }
  return curve;
}

StretchedExponentialFit fit_stretched_exponential(const CoherenceCurve& curve) {
  curve.validate();
  const auto& pts = curve.points;
  const int m = static_cast<int>(pts.size());
  if (m < 4) throw DataError("stretched-exponential fit needs at least 4 points");

  bool weighted = true;
  for (const auto& p : pts) weighted = weighted && p.sigma > 0.0;

  // Initial guess: amplitude from the earliest point, T2 from the 1/e crossing.
  double a0 = std::clamp(pts.front().coherence, 0.1, 1.05);
  double t2_0 = pts[static_cast<std::size_t>(m / 2)].time;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].coherence < a0 / std::exp(1.0) && pts[i - 1].coherence >= a0 / std::exp(1.0)) {
      t2_0 = 0.5 * (pts[i].time + pts[i - 1].time);
      break;
    }
  }
  if (pts.back().coherence > a0 / std::exp(1.0)) t2_0 = std::max(t2_0, pts.back().time * 2.0);

  const double t_scale = t2_0;
  ResidualFunction residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const double t2 = std::exp(p(0)) * t_scale;
    const double stretch = std::exp(p(1));
    for (int i = 0; i < m; ++i) {
      const auto& pt = pts[static_cast<std::size_t>(i)];
      const double model = p(2) * std::exp(-std::pow(pt.time / t2, stretch));
      r(i) = (model - pt.coherence) / (weighted ? pt.sigma : 1.0);
    }
  };

  LeastSquaresOptions opts;
  opts.scale_covariance = !weighted;
  LeastSquaresResult best;
  bool have = false;
  // A few stretch starting points; decays between exponential and Gaussian.
  for (double p0 : {1.0, 2.0, 0.7}) {
    Eigen::VectorXd init(3);
    init << 0.0, std::log(p0), a0;
    LeastSquaresResult r = levenberg_marquardt(residuals, m, init, opts);
    if (!have || r.chi2 < best.chi2) {
      best = std::move(r);
      have = true;
    }
  }
  if (!best.converged || !best.covariance.allFinite()) {
    throw FitError("stretched-exponential fit did not converge (residual norm " +
                       std::to_string(std::sqrt(best.chi2)) + ")",
                   std::sqrt(best.chi2));
  }

  StretchedExponentialFit fit;
  fit.t2 = std::exp(best.params(0)) * t_scale;
  fit.stretch = std::exp(best.params(1));
  fit.amplitude = best.params(2);
  // Jacobian of (ln T2 / scale, ln p, A) -> (T2, p, A).
  Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
  jac(0, 0) = fit.t2;
  jac(1, 1) = fit.stretch;
  jac(2, 2) = 1.0;
  fit.covariance = jac * best.covariance * jac.transpose();
  fit.t2_sigma = std::sqrt(fit.covariance(0, 0));
  fit.stretch_sigma = std::sqrt(fit.covariance(1, 1));
  fit.amplitude_sigma = std::sqrt(fit.covariance(2, 2));
  fit.residual_norm = std::sqrt(best.chi2);
  return fit;
}

std::vector<T2Point> t2_scaling(const std::vector<CoherenceCurve>& curves) {
  if (curves.empty()) throw DataError("t2_scaling needs at least one curve");
  std::map<int, CoherenceCurve> merged;
  for (const auto& c : curves) {
    auto [it, inserted] = merged.try_emplace(c.n_pulses, c);
    if (!inserted) {
      auto& pts = it->second.points;
      pts.insert(pts.end(), c.points.begin(), c.points.end());
      std::sort(pts.begin(), pts.end(),
                [](const CoherencePoint& a, const CoherencePoint& b) { return a.time < b.time; });
    }
  }
  std::vector<T2Point> out;
  for (const auto& [n, curve] : merged) out.push_back({n, fit_stretched_exponential(curve)});
  return out;
}

}  // namespace nvmag
