#include "doctest.h"

#include <boost/random/uniform_real_distribution.hpp>
#include <cmath>
#include <sstream>

#include "nvmag/errors.hpp"
#include "nvmag/philox.hpp"
#include "nvmag/pulse_control.hpp"

using namespace nvmag;

namespace {

GrapeProblem robust_problem(bool half_pi) {
  GrapeProblem p;
  p.target = half_pi ? half_pi_pulse_x() : pi_pulse_x();
  p.n_pieces = half_pi ? 14 : 10;
  p.ensemble = hyperfine_ensemble(p.sys);
  return p;
}

Waveform random_waveform(const GrapeProblem& p, Philox4x32& rng) {
  boost::random::uniform_real_distribution<double> u(-p.max_rabi_hz / 1.5, p.max_rabi_hz / 1.5);
  Waveform wf;
  wf.piece_duration = p.piece_duration;
  for (std::size_t k = 0; k < p.n_pieces; ++k) {
    wf.real_hz.push_back(u(rng));
    wf.imag_hz.push_back(u(rng));
  }
  return wf;
}

// Largest central-difference deviation relative to the largest gradient entry.
double fd_mismatch(const GrapeProblem& p, const Waveform& wf) {
  const GrapeGradient g = grape_gradient(p, wf);
  const double h = 10.0;
  double scale = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < wf.size(); ++k) {
    for (int part = 0; part < 2; ++part) {
      Waveform a = wf, b = wf;
      auto& xa = part == 0 ? a.real_hz[k] : a.imag_hz[k];
      auto& xb = part == 0 ? b.real_hz[k] : b.imag_hz[k];
      xa += h;
      xb -= h;
      const double fd = (fidelity(p, a) - fidelity(p, b)) / (2 * h);
      const double an = part == 0 ? g.d_real[k] : g.d_imag[k];
      scale = std::max(scale, std::abs(an));
      worst = std::max(worst, std::abs(fd - an));
    }
  }
  return worst / scale;
}

}  // namespace

TEST_CASE("hyperfine ensemble covers the doublet and the centre") {
  const auto e = hyperfine_ensemble(SpinSystem{});
  REQUIRE(e.size() == 3);
  double w = 0.0;
  for (const auto& m : e) w += m.weight;
  CHECK(w == doctest::Approx(1.0));
  CHECK(e[1].detuning_hz == doctest::Approx(1.515e6));
  CHECK(e[2].detuning_hz == doctest::Approx(-1.515e6));
}

TEST_CASE("square pi pulse gives unit fidelity without detuning") {
  GrapeProblem p;
  p.target = pi_pulse_x();
  p.n_pieces = 10;
  Waveform wf;
  wf.piece_duration = p.piece_duration;
  // Rabi frequency 1/(2 T) completes a pi rotation.
  const double rabi = 1.0 / (2.0 * p.n_pieces * p.piece_duration);
  wf.real_hz.assign(p.n_pieces, rabi);
  wf.imag_hz.assign(p.n_pieces, 0.0);
  CHECK(fidelity(p, wf) == doctest::Approx(1.0).epsilon(1e-12));
  // Detuned members lose fidelity on a square pulse.
  p.ensemble = hyperfine_ensemble(p.sys);
  CHECK(fidelity(p, wf) < 0.999);
}

TEST_CASE("fidelity is invariant under a global phase of the target") {
  GrapeProblem p = robust_problem(false);
  Philox4x32 rng(11, 0);
  const Waveform wf = random_waveform(p, rng);
  const double f = fidelity(p, wf);
  p.target = CMatrix(p.target * std::polar(1.0, 0.83));
  CHECK(fidelity(p, wf) == doctest::Approx(f).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences") {
  const GrapeProblem p = robust_problem(false);
  Philox4x32 rng(3, 0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) worst = std::max(worst, fd_mismatch(p, random_waveform(p, rng)));
  CHECK(worst < 1e-5);
}

TEST_CASE("robust pi and pi/2 pulses reach the target fidelity") {
  for (bool half : {false, true}) {
    const GrapeProblem p = robust_problem(half);
    const GrapeResult r = optimize(p);
    CHECK(r.converged);
    CHECK(fidelity(p, r.waveform) >= 0.9999);
    CHECK(r.waveform.max_amplitude() <= p.max_rabi_hz * (1 + 1e-12));
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-15);
  }
}

TEST_CASE("optimizer is deterministic for a fixed seed") {
  const GrapeProblem p = robust_problem(false);
  GrapeOptions o;
  o.seed = 42;
  const GrapeResult a = optimize(p, o), b = optimize(p, o);
  CHECK(a.waveform.real_hz == b.waveform.real_hz);
  CHECK(a.waveform.imag_hz == b.waveform.imag_hz);
}

TEST_CASE("infeasible amplitude bound returns best effort") {
  GrapeProblem p = robust_problem(false);
  p.max_rabi_hz = 1e3;
  GrapeOptions o;
  o.max_iterations = 50;
  o.restarts = 0;
  const GrapeResult r = optimize(p, o);
  CHECK_FALSE(r.converged);
  CHECK(r.fidelity < 0.5);
}

TEST_CASE("projection clips to the amplitude disc") {
  Waveform wf;
  wf.piece_duration = 1e-9;
  wf.real_hz = {3e6, 1e6};
  wf.imag_hz = {4e6, 0.0};
  project_amplitudes(wf, 2.5e6);
  CHECK(std::hypot(wf.real_hz[0], wf.imag_hz[0]) == doctest::Approx(2.5e6));
  CHECK(wf.real_hz[0] / wf.imag_hz[0] == doctest::Approx(0.75));
  CHECK(wf.real_hz[1] == 1e6);
}

TEST_CASE("waveform CSV round trip is exact") {
  GrapeProblem p = robust_problem(true);
  Philox4x32 rng(5, 0);
  const Waveform wf = random_waveform(p, rng);
  std::stringstream s;
  write_waveform_csv(s, wf);
  const Waveform back = read_waveform_csv(s);
  CHECK(back.real_hz == wf.real_hz);
  CHECK(back.imag_hz == wf.imag_hz);
  CHECK(back.piece_duration == wf.piece_duration);
  std::stringstream bad("piece_index,real_rabi_hz,imag_rabi_hz\n0,1,2\n");
  CHECK_THROWS_AS(read_waveform_csv(bad), DataError);
}

TEST_CASE("shape mismatches are rejected") {
  const GrapeProblem p = robust_problem(false);
  Waveform wf;
  wf.piece_duration = p.piece_duration;
  wf.real_hz.assign(3, 0.0);
  wf.imag_hz.assign(3, 0.0);
  CHECK_THROWS_AS(fidelity(p, wf), ShapeError);
}
