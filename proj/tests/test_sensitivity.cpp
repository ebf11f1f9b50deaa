#include "doctest.h"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <cmath>

#include "nvmag/errors.hpp"
#include "nvmag/philox.hpp"
#include "nvmag/sensitivity.hpp"

using namespace nvmag;

TEST_CASE("budget formula") {
  SensitivityBudget b;
  b.t_c = 1.8e-3;
  b.coherence = 0.5;
  b.f_i = 0.9;
  b.f_r = 0.8;
  b.t_ir = 1.2e-3;
  const double expected =
      1.0 / (constants::gamma_e * std::sqrt(1.8e-3)) / (0.5 * 0.9 * 0.8) * std::sqrt(1 + 1.2 / 1.8);
  CHECK(eta_from_budget(b) == doctest::Approx(expected).epsilon(1e-14));
  b.f_r = 0.0;
  CHECK_THROWS_AS(eta_from_budget(b), ParameterError);
  CHECK(stretched_coherence(2e-3, 2e-3, 1.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(stretched_coherence(1e-3, 2e-3, 2.0) == doctest::Approx(std::exp(-0.25)));
}

TEST_CASE("budget optimizer finds the grid minimum and breaks ties early") {
  BudgetModels m;
  m.coherence = [](double t) { return std::exp(-t / 2e-3); };
  m.f_i = [](int n) { return 1.0 - std::exp(-n / 30.0); };
  m.f_r = [](int n) { return 0.9 * (1.0 - std::exp(-n / 800.0)); };
  m.overhead = [](double, int nf, int nr) { return nf * 1e-6 + nr * 0.6e-6; };
  BudgetGrid g;
  for (int i = 1; i <= 30; ++i) g.t_c.push_back(0.1e-3 * i);
  for (int n = 10; n <= 200; n += 10) g.n_feedback.push_back(n);
  for (int n = 200; n <= 4000; n += 200) g.n_readout.push_back(n);
  const BudgetOptimum o = optimize_budget(m, g);
  double best = 1e300;
  for (double t : g.t_c)
    for (int nf : g.n_feedback)
      for (int nr : g.n_readout) {
        SensitivityBudget b{t, m.coherence(t), m.f_i(nf), m.f_r(nr), m.overhead(t, nf, nr)};
        best = std::min(best, eta_from_budget(b));
      }
  CHECK(o.eta == best);
  CHECK(o.readout_slice.size() == g.n_readout.size());

  BudgetModels flat;
  flat.coherence = [](double) { return 1.0; };
  flat.f_i = [](int) { return 1.0; };
  flat.f_r = [](int) { return 1.0; };
  flat.overhead = [](double, int, int) { return 0.0; };
  BudgetGrid tie{{1e-3}, {5, 6}, {7, 8}};
  const BudgetOptimum t = optimize_budget(flat, tie);
  CHECK(t.n_feedback == 5);
  CHECK(t.n_readout == 7);
}

TEST_CASE("fringe fit recovers B_V and phase") {
  const double t = 1.8e-3, bv = 112e-9, a = 800.0, c = 5000.0, phi = 0.4;
  const double k = constants::gamma_e * t * bv;
  Philox4x32 rng(21, 0);
  std::vector<FringePoint> pts;
  for (int i = 0; i < 61; ++i) {
    const double v = -0.3 + 0.6 * i / 60.0;
    boost::random::poisson_distribution<int> pois(a * std::sin(k * v + phi) + c);
    pts.push_back({v, double(pois(rng)), 0.0});
  }
  const FringeFit f = fit_fringe(pts, t);
  CHECK(std::abs(f.b_v - bv) < 4 * f.b_v_sigma);
  CHECK(f.b_v_sigma / bv < 0.01);
  CHECK(std::abs(f.phi - phi) < 4 * f.phi_sigma);
  CHECK(f.a > 0.0);
  CHECK(f.a == doctest::Approx(a).epsilon(0.05));
}

TEST_CASE("fringe degeneracies") {
  const double t = 1.8e-3;
  std::vector<FringePoint> flat;
  for (int i = 0; i < 40; ++i) flat.push_back({-0.3 + 0.6 * i / 39.0, 1000.0, 0.0});
  CHECK_THROWS_AS(fit_fringe(flat, t), FitError);
  // Less than one period.
  std::vector<FringePoint> short_span;
  const double k = constants::gamma_e * t * 112e-9;
  for (int i = 0; i < 20; ++i) {
    const double v = 0.5 * constants::pi / k * i / 19.0;
    short_span.push_back({v, 1000 + 500 * std::sin(k * v), 0.0});
  }
  CHECK_THROWS_AS(fit_fringe(short_span, t), DataError);
}

TEST_CASE("time-series sensitivity of Gaussian shots") {
  const double mu = 0.05, sigma = 1.0, amp = 1e-9, ts = 1e-3;
  Philox4x32 rng(4, 0);
  boost::random::normal_distribution<double> g(0.0, sigma);
  std::vector<double> out;
  std::vector<int> sign;
  for (int i = 0; i < 400000; ++i) {
    const int s = i % 2 == 0 ? 1 : -1;
    sign.push_back(s);
    out.push_back(s * mu + g(rng));
  }
  const SensitivityCurve c = sensitivity_from_timeseries(out, sign, amp, ts);
  const double expected = amp * sigma * std::sqrt(ts) / mu;
  CHECK(c.asymptote == doctest::Approx(expected).epsilon(0.03));
  CHECK(std::abs(c.final_slope) < 0.05);
  CHECK(c.points.front().time == doctest::Approx(100 * ts));
  CHECK_THROWS_AS(sensitivity_from_timeseries(std::vector<double>(200, 1.0), std::vector<int>(200, 1), amp, ts),
                  DataError);
  CHECK_THROWS_AS(sensitivity_from_timeseries({1.0}, {1, -1}, amp, ts), ShapeError);
}

TEST_CASE("energy resolution and the table audit") {
  const double eta = 0.59e-9, l = 31.7e-9;
  const double e = eta * eta * l * l * l / (2 * 1.25663706212e-6 * 1.054571817e-34);
  CHECK(erl_compute(eta, l) == doctest::Approx(e).epsilon(1e-14));
  CHECK(db_below_erl(0.1) == doctest::Approx(10.0));

  std::vector<MagnetometerRecord> rows{{"NV", 4.0e-9, 5.3e-8, "1", 0.68},
                                       {"SQUID", 1.0e-6, 3.6e-11, "35", 4.89},
                                       {"X", 1.0e-6, 3.6e-11, "0", 100.0},
                                       {"Y", 1.0e-6, 3.6e-2, "0", 4.89}};
  const ErlCheckReport r = erl_table_check(rows);
  CHECK(r.rows[0].within_tolerance);
  CHECK(r.rows[1].within_tolerance);
  CHECK_FALSE(r.rows[2].within_tolerance);
  CHECK(r.failures == 2);
  CHECK(r.rows[3].flag.find("nT") != std::string::npos);
  CHECK(r.rows[2].flag.find("nT") == std::string::npos);
  CHECK_THROWS_AS(erl_table_check({}), DataError);
}
