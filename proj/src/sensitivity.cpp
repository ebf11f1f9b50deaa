#include "nvmag/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nvmag/errors.hpp"
#include "nvmag/least_squares.hpp"

namespace nvmag {

namespace {
constexpr double pi = constants::pi;

bool in_unit_interval(double x) { return x > 0.0 && x <= 1.0 && std::isfinite(x); }

double wrap_phase(double phi) {
  phi = std::remainder(phi, 2.0 * pi);
  if (phi <= -pi) phi += 2.0 * pi;
  return phi;
}

struct LinearFringe {
  double chi2 = 0.0;
  Eigen::Vector3d coef;  // sin, cos, const
  Eigen::Matrix3d cov;
};

LinearFringe linear_fringe(const std::vector<FringePoint>& d, const std::vector<double>& w, double k) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::Vector3d row(std::sin(k * d[i].voltage), std::cos(k * d[i].voltage), 1.0);
    ata += w[i] * row * row.transpose();
    atb += w[i] * row * d[i].counts;
  }
  LinearFringe out;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (!lu.isInvertible()) {
    out.chi2 = std::numeric_limits<double>::infinity();
    out.coef.setZero();
    out.cov.setConstant(std::numeric_limits<double>::infinity());
    return out;
  }
  out.coef = lu.solve(atb);
  out.cov = lu.inverse();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::Vector3d row(std::sin(k * d[i].voltage), std::cos(k * d[i].voltage), 1.0);
    const double r = row.dot(out.coef) - d[i].counts;
    out.chi2 += w[i] * r * r;
  }
  return out;
}
}  // namespace

void SensitivityBudget::validate() const {
  if (!(t_c > 0.0) || !std::isfinite(t_c)) throw ParameterError("T_C must be positive");
  if (!(t_ir >= 0.0) || !std::isfinite(t_ir)) throw ParameterError("T_ir must be >= 0");
  if (!in_unit_interval(coherence)) throw ParameterError("coherence must be in (0, 1]");
  if (!in_unit_interval(f_i)) throw ParameterError("F_i must be in (0, 1]");
  if (!in_unit_interval(f_r)) throw ParameterError("F_r must be in (0, 1]");
  if (!(gamma_e > 0.0)) throw ParameterError("gamma_e must be positive");
}

double eta_from_budget(const SensitivityBudget& b) {
  b.validate();
  return 1.0 / (b.gamma_e * std::sqrt(b.t_c)) / (b.coherence * b.f_r * b.f_i) *
         std::sqrt(1.0 + b.t_ir / b.t_c);
}

double stretched_coherence(double t, double t2, double stretch) {
  if (!(t2 > 0.0) || !(stretch > 0.0)) throw ParameterError("T2 and stretch must be positive");
  return std::exp(-std::pow(t / t2, stretch));
}

BudgetOptimum optimize_budget(const BudgetModels& models, const BudgetGrid& grid) {
  if (grid.t_c.empty() || grid.n_feedback.empty() || grid.n_readout.empty())
    throw ParameterError("budget grid has an empty axis");
  if (!models.coherence || !models.f_i || !models.f_r || !models.overhead)
    throw ParameterError("budget models incomplete");

  auto eval = [&](double t_c, int n_fb, int n_ro, SensitivityBudget* out) {
    SensitivityBudget b;
    b.t_c = t_c;
    b.coherence = models.coherence(t_c);
    b.f_i = models.f_i(n_fb);
    b.f_r = models.f_r(n_ro);
    b.t_ir = models.overhead(t_c, n_fb, n_ro);
    if (out) *out = b;
    try {
      return eta_from_budget(b);
    } catch (const ParameterError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  BudgetOptimum best;
  best.eta = std::numeric_limits<double>::infinity();
  bool found = false;
  for (double t_c : grid.t_c) {
    for (int n_fb : grid.n_feedback) {
      for (int n_ro : grid.n_readout) {
        SensitivityBudget b;
        const double eta = eval(t_c, n_fb, n_ro, &b);
        if (eta < best.eta) {
          best.eta = eta;
          best.t_c = t_c;
          best.n_feedback = n_fb;
          best.n_readout = n_ro;
          best.budget = b;
          found = true;
        }
      }
    }
  }
  if (!found) throw NumericalError("no grid point gives a valid sensitivity budget");
  for (int n_ro : grid.n_readout)
    best.readout_slice.emplace_back(n_ro, eval(best.t_c, best.n_feedback, n_ro, nullptr));
  for (double t_c : grid.t_c)
    best.t_c_slice.emplace_back(t_c, eval(t_c, best.n_feedback, best.n_readout, nullptr));
  return best;
}

FringeFit fit_fringe(const std::vector<FringePoint>& data, double t, double gamma_e) {
  if (!(t > 0.0)) throw ParameterError("interrogation time must be positive");
  if (data.size() < 5) throw DataError("fringe fit needs at least 5 points");
  std::vector<FringePoint> d = data;
  std::sort(d.begin(), d.end(), [](const auto& a, const auto& b) { return a.voltage < b.voltage; });
  for (const auto& p : d) {
    if (!std::isfinite(p.voltage) || !std::isfinite(p.counts) || !(p.sigma >= 0.0))
      throw DataError("fringe data contains invalid values");
  }
  const double span = d.back().voltage - d.front().voltage;
  if (!(span > 0.0)) throw DataError("fringe data need distinct voltages");

  std::vector<double> w(d.size()), steps;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double s = d[i].sigma > 0.0 ? d[i].sigma : std::sqrt(std::max(d[i].counts, 1.0));
    w[i] = 1.0 / (s * s);
    if (i > 0 && d[i].voltage > d[i - 1].voltage) steps.push_back(d[i].voltage - d[i - 1].voltage);
  }
  std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
  const double dv = steps[steps.size() / 2];

  // Periodogram-style scan for the fringe frequency, then a full nonlinear fit.
  const double k_lo = pi / span;
  const double k_hi = pi / dv;
  const double dk = pi / (16.0 * span);
  double best_k = k_lo;
  LinearFringe best = linear_fringe(d, w, k_lo);
  for (double k = k_lo + dk; k <= k_hi; k += dk) {
    LinearFringe lf = linear_fringe(d, w, k);
    if (lf.chi2 < best.chi2) {
      best = lf;
      best_k = k;
    }
  }
  const double amp = std::hypot(best.coef(0), best.coef(1));
  const double var_amp =
      amp > 0.0 ? (best.coef(0) * best.coef(0) * best.cov(0, 0) +
                   2.0 * best.coef(0) * best.coef(1) * best.cov(0, 1) +
                   best.coef(1) * best.coef(1) * best.cov(1, 1)) / (amp * amp)
                : best.cov(0, 0);
  const double dof = static_cast<double>(d.size()) - 3.0;
  const double amp_sigma = std::sqrt(var_amp * std::max(best.chi2 / dof, 1e-300));
  // The frequency scan picks the largest of ~(k_hi - k_lo) span / pi independent
  // amplitudes; threshold at 1% false-alarm probability over all of them.
  const double trials = std::max(1.0, (k_hi - k_lo) * span / pi);
  const double threshold = std::max(3.0, std::sqrt(2.0 * std::log(100.0 * trials)));
  if (!(amp > 1e-12 * std::abs(best.coef(2))) || amp < threshold * amp_sigma)
    throw FitError("fringe amplitude not resolved (a = " + std::to_string(amp) + " +- " +
                       std::to_string(amp_sigma) + "); fit is degenerate",
                   std::sqrt(best.chi2));
  if (best_k * span < 2.0 * pi)
    throw DataError("fringe data cover less than one period; frequency is ambiguous");

  const int m = static_cast<int>(d.size());
  const double k_scale = best_k;
  ResidualFunction residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (int i = 0; i < m; ++i) {
      const auto& pt = d[static_cast<std::size_t>(i)];
      const double model = p(0) * std::sin(p(1) * k_scale * pt.voltage + p(2)) + p(3);
      r(i) = (model - pt.counts) * std::sqrt(w[static_cast<std::size_t>(i)]);
    }
  };
  Eigen::VectorXd init(4);
  init << amp, 1.0, std::atan2(best.coef(1), best.coef(0)), best.coef(2);
  const LeastSquaresResult r = levenberg_marquardt(residuals, m, init);
  if (!r.converged || !r.covariance.allFinite())
    throw FitError("fringe fit did not converge", std::sqrt(r.chi2));

  FringeFit fit;
  fit.t = t;
  double a = r.params(0);
  double k = r.params(1) * k_scale;
  double phi = r.params(2);
  if (k < 0.0) {
    k = -k;
    a = -a;
    phi = -phi;
  }
  if (a < 0.0) {
    a = -a;
    phi += pi;
  }
  fit.a = a;
  fit.phi = wrap_phase(phi);
  fit.c_offset = r.params(3);
  fit.b_v = k / (gamma_e * t);
  fit.a_sigma = r.sigma(0);
  fit.b_v_sigma = r.sigma(1) * k_scale / (gamma_e * t);
  fit.phi_sigma = r.sigma(2);
  fit.c_sigma = r.sigma(3);
  fit.residual_norm = std::sqrt(r.chi2);
  return fit;
}

SensitivityCurve sensitivity_from_timeseries(const std::vector<double>& outcomes,
                                             const std::vector<int>& signs, double amplitude,
                                             double shot_duration, int windows_per_decade) {
  if (outcomes.size() != signs.size()) throw ShapeError("outcomes and signs differ in length");
  if (outcomes.size() < 100) throw DataError("sensitivity estimate needs at least 100 shots");
  if (!(amplitude > 0.0) || !(shot_duration > 0.0))
    throw ParameterError("signal amplitude and shot duration must be positive");
  if (windows_per_decade < 1) throw ParameterError("windows_per_decade must be >= 1");

  const std::size_t n = outcomes.size();
  std::vector<std::size_t> ends;
  const double decades = std::log10(static_cast<double>(n) / 100.0);
  const int n_windows = std::max(1, static_cast<int>(std::ceil(decades * windows_per_decade)));
  for (int j = 0; j <= n_windows; ++j) {
    const double frac = n_windows > 0 ? static_cast<double>(j) / n_windows : 1.0;
    const auto e = static_cast<std::size_t>(std::llround(100.0 * std::pow(10.0, decades * frac)));
    const std::size_t end = std::min(n, std::max<std::size_t>(e, 100));
    if (ends.empty() || end > ends.back()) ends.push_back(end);
  }
  if (ends.back() != n) ends.push_back(n);

  SensitivityCurve curve;
  double sum[2] = {0, 0}, sum2[2] = {0, 0};
  double count[2] = {0, 0};
  std::size_t pos = 0;
  bool any_variance = false;
  for (std::size_t end : ends) {
    for (; pos < end; ++pos) {
      const int g = signs[pos] > 0 ? 0 : 1;
      sum[g] += outcomes[pos];
      sum2[g] += outcomes[pos] * outcomes[pos];
      count[g] += 1.0;
    }
    if (count[0] < 2 || count[1] < 2) continue;
    double diff = sum[0] / count[0] - sum[1] / count[1];
    double var = 0.0;
    for (int g = 0; g < 2; ++g) {
      const double mean = sum[g] / count[g];
      const double v = std::max(0.0, (sum2[g] - count[g] * mean * mean) / (count[g] - 1.0));
      var += v / count[g];
    }
    if (var <= 0.0) continue;
    any_variance = true;
    const double snr = std::abs(diff) / std::sqrt(var);
    const double time = static_cast<double>(end) * shot_duration;
    curve.points.push_back({time, snr, amplitude * std::sqrt(time) / snr});
  }
  if (!any_variance) throw DataError("shot outcomes have zero variance; sensitivity is degenerate");

  const double t_max = curve.points.back().time;
  double s = 0.0, s2 = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int k = 0;
  for (const auto& p : curve.points) {
    if (p.time < t_max / 10.0 * (1.0 - 1e-12) || !std::isfinite(p.eta)) continue;
    s += p.eta;
    s2 += p.eta * p.eta;
    const double x = std::log(p.time), y = std::log(p.eta);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++k;
  }
  if (k == 0) throw DataError("no finite sensitivity values in the final decade");
  curve.asymptote = s / k;
  curve.asymptote_sigma = k > 1 ? std::sqrt(std::max(0.0, s2 / k - curve.asymptote * curve.asymptote) / (k - 1)) : 0.0;
  const double denom = k * sxx - sx * sx;
  curve.final_slope = (k > 1 && denom > 0.0) ? (k * sxy - sx * sy) / denom : 0.0;
  return curve;
}

double erl_compute(double eta, double l_eff) {
  if (!(eta >= 0.0) || !(l_eff > 0.0)) throw ParameterError("ERL needs eta >= 0 and l_eff > 0");
  return eta * eta * l_eff * l_eff * l_eff / (2.0 * constants::mu0 * constants::hbar);
}

double db_below_erl(double e_r_hbar) {
  if (!(e_r_hbar > 0.0)) throw ParameterError("energy resolution must be positive");
  return 10.0 * std::log10(1.0 / e_r_hbar);
}

ErlCheckReport erl_table_check(const std::vector<MagnetometerRecord>& records, double tolerance) {
  if (records.empty()) throw DataError("magnetometer table is empty");
  ErlCheckReport report;
  report.tolerance = tolerance;
  for (const auto& rec : records) {
    ErlCheckRow row;
    row.record = rec;
    row.recomputed = erl_compute(rec.eta, rec.l_eff);
    row.relative_deviation = rec.e_r > 0.0 ? (row.recomputed - rec.e_r) / rec.e_r
                                           : std::numeric_limits<double>::infinity();
    row.within_tolerance = std::abs(row.relative_deviation) <= tolerance;
    row.db_below = row.recomputed > 0.0 ? db_below_erl(row.recomputed) : 0.0;
    if (!row.within_tolerance && rec.e_r > 0.0) {
      const double as_nt = erl_compute(rec.eta * 1e-9, rec.l_eff);
      if (std::abs(as_nt - rec.e_r) / rec.e_r <= tolerance)
        row.flag = "eta consistent with nT/sqrt(Hz), not T/sqrt(Hz)";
      else
        row.flag = "stored E_R not reproduced";
    }
    if (!row.within_tolerance) ++report.failures;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace nvmag
