#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "nvmag/errors.hpp"
#include "nvmag/nv_depth.hpp"

using namespace nvmag;

namespace {

// K by direct frequency-domain quadrature of the line shape times the filter.
double k_by_quadrature(const DDSequence& seq, double wl, double width) {
  auto lor = [&](double x) { return width / (width * width + x * x); };
  auto f = [&](double w) { return (lor(w - wl) + lor(w + wl)) * exact_filter(seq, w); };
  const double top = 40.0 * wl;
  const int panels = 20000;
  double sum = 0.0;
  for (int i = 0; i < panels; ++i)
    sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, top * i / panels,
                                                                         top * (i + 1) / panels, 0);
  return constants::pi * constants::pi / 4.0 * sum / constants::pi;
}

}  // namespace

TEST_CASE("B_rms^2 follows the half-space dipolar sum") {
  ProtonBathModel m;
  m.depth = 10e-9;
  const double pref = constants::mu0 * constants::hbar * constants::gamma_proton / (4 * constants::pi);
  const double expected = 66e27 * pref * pref * 5 * constants::pi / (96 * 1e-24);
  CHECK(b_rms_squared(m) == doctest::Approx(expected).epsilon(1e-12));
  ProtonBathModel d2 = m;
  d2.depth *= 2;
  CHECK(b_rms_squared(m) / b_rms_squared(d2) == doctest::Approx(8.0));
}

TEST_CASE("time-domain overlap K matches frequency-domain quadrature") {
  const double wl = constants::two_pi * 1e6;
  for (double width : {2e4, 2e5}) {
    for (double detune : {1.0, 0.97, 1.05}) {
      const double tau = constants::pi / wl * detune;
      const DDSequence s = DDSequence::make(DDFamily::xy8, 16, 16 * tau);
      CHECK(overlap_k(s, wl, width) == doctest::Approx(k_by_quadrature(s, wl, width)).epsilon(2e-4));
    }
  }
}

TEST_CASE("narrow line on resonance gives K close to T^2") {
  const double wl = constants::two_pi * 1e6;
  const DDSequence s = DDSequence::make(DDFamily::xy16, 512, 512 * constants::pi / wl);
  const double k = overlap_k(s, wl, 1.0);
  CHECK(k / (s.total_time * s.total_time) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("noise-free dataset is recovered exactly") {
  ProtonBathModel m;
  SyntheticDepthOptions o;
  o.noise_sigma = 0.0;
  const DepthDataset d = synthetic_depth_dataset(m, o);
  CHECK(d.points.size() == 61);
  const DepthFit f = fit_depth(d);
  CHECK(f.depth == doctest::Approx(31.7e-9).epsilon(1e-6));
  CHECK(f.line_width == doctest::Approx(m.line_width()).epsilon(1e-5));
}

TEST_CASE("depth and density are degenerate through rho / d^3") {
  ProtonBathModel m;
  m.rho *= 2.0;
  SyntheticDepthOptions o;
  o.noise_sigma = 0.0;
  DepthDataset d = synthetic_depth_dataset(m, o);
  d.rho = glycerine_rho_per_nm3 * 1e27;
  const DepthFit f = fit_depth(d);
  CHECK(f.depth == doctest::Approx(31.7e-9 * std::pow(2.0, -1.0 / 3.0)).epsilon(1e-6));
}

TEST_CASE("noisy synthetic depths land within three standard errors") {
  for (double depth : {17.3e-9, 49.0e-9}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      ProtonBathModel m;
      m.depth = depth;
      SyntheticDepthOptions o;
      o.seed = seed;
      const DepthFit f = fit_depth(synthetic_depth_dataset(m, o));
      CHECK(std::abs(f.depth - depth) < 3 * f.depth_sigma);
      CHECK(f.depth_sigma > 0.0);
    }
  }
}

TEST_CASE("generator picks the pulse number that brings the dip near one half") {
  ProtonBathModel m;
  const DepthDataset d = synthetic_depth_dataset(m);
  CHECK(d.n_pulses % 16 == 0);
  double cmin = 1.0;
  for (const auto& p : d.points) cmin = std::min(cmin, p.coherence);
  CHECK(cmin < 0.75);
  CHECK(cmin > 0.2);
}

TEST_CASE("no dip is a fit failure") {
  ProtonBathModel m;
  m.depth = 300e-9;
  std::vector<double> taus;
  for (int i = 0; i < 30; ++i) taus.push_back(constants::pi / m.larmor_omega() * (0.9 + 0.2 * i / 29.0));
  const DepthDataset d = proton_signal_coherence(m, DDFamily::xy16, 16, taus);
  CHECK_THROWS_AS(fit_depth(d), FitError);
}

TEST_CASE("dataset and model validation") {
  DepthDataset d;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.points = {{1e-6, 0.9, 0.01}};
  d.rho = 1e28;
  CHECK_THROWS_AS(d.validate(), DataError);
  ProtonBathModel m;
  m.depth = -1.0;
  CHECK_THROWS_AS(m.validate(), ParameterError);
}
