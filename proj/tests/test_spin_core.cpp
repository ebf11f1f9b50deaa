#include "doctest.h"

#include <cmath>
#include <complex>

#include "nvmag/errors.hpp"
#include "nvmag/spin_core.hpp"

using namespace nvmag;
using cd = std::complex<double>;

namespace {

// Classical RK4 on i dpsi/dt = H(t) psi over [t0, t1].
template <class H>
CVector rk4(H h_of_t, CVector psi, double t0, double t1, double dt) {
  const int steps = static_cast<int>(std::ceil((t1 - t0) / dt));
  dt = (t1 - t0) / steps;
  const cd mi(0.0, -1.0);
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * dt;
    const CMatrix h0 = h_of_t(t), h1 = h_of_t(t + dt / 2), h2 = h_of_t(t + dt);
    const CVector k1 = mi * (h0 * psi);
    const CVector k2 = mi * (h1 * (psi + dt / 2 * k1));
    const CVector k3 = mi * (h1 * (psi + dt / 2 * k2));
    const CVector k4 = mi * (h2 * (psi + dt * k3));
    psi += dt / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return psi;
}

double line_centre_hz(const SpinSystem& sys) {
  return 0.5 * (electron_transition_hz(sys, -1.0, 0.5) + electron_transition_hz(sys, -1.0, -0.5));
}

}  // namespace

TEST_CASE("spin operators obey the angular momentum algebra") {
  for (double j : {0.5, 1.0, 1.5}) {
    const CMatrix x = spin_x(j), y = spin_y(j), z = spin_z(j);
    const CMatrix comm = x * y - y * x;
    CHECK((comm - cd(0, 1) * z).norm() < 1e-12);
    const CMatrix casimir = x * x + y * y + z * z;
    const int n = static_cast<int>(2 * j + 1);
    CHECK((casimir - j * (j + 1) * identity(n)).norm() < 1e-12);
  }
}

TEST_CASE("static Hamiltonian is diagonal with the expected level energies") {
  const SpinSystem sys;
  const CMatrix h = build_static_hamiltonian(sys);
  REQUIRE(h.rows() == 6);
  CHECK(is_hermitian(h, 1e-9));
  CHECK((h - CMatrix(h.diagonal().asDiagonal())).norm() < 1e-6);
  for (double ms : {1.0, 0.0, -1.0}) {
    for (double mi : {0.5, -0.5}) {
      const double e = sys.zfs * ms * ms + sys.gamma_e * sys.b0 * ms + sys.gamma_n * sys.b0 * mi +
                       sys.hyperfine * ms * mi;
      CHECK(h(sys.index(ms, mi), sys.index(ms, mi)).real() == doctest::Approx(e).epsilon(1e-12));
    }
  }
  // ms=0 -> ms=-1 at |D - gamma_e B| (D - gamma_e B < 0 at 0.77 T), split by the hyperfine coupling.
  const double f0 = line_centre_hz(sys);
  CHECK(f0 == doctest::Approx(28.024e9 * 0.7662 - 2.870e9).epsilon(1e-9));
  CHECK(electron_transition_hz(sys, -1.0, 0.5) - electron_transition_hz(sys, -1.0, -0.5) ==
        doctest::Approx(3.03e6).epsilon(1e-9));
}

TEST_CASE("invalid projections and parameters are rejected") {
  const SpinSystem sys;
  CHECK_THROWS_AS(sys.index(2.0, 0.5), ParameterError);
  CHECK_THROWS_AS(sys.index(0.0, 0.25), ParameterError);
  SpinSystem bad;
  bad.b0 = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("piecewise propagation matches RK4 and stays unitary") {
  PiecewiseHamiltonian h;
  h.piece_duration = 20e-9;
  for (int k = 0; k < 8; ++k) {
    CMatrix p(2, 2);
    p << 2e7 * std::cos(k), cd(1e7, 3e6 * k), cd(1e7, -3e6 * k), -2e7 * std::cos(k);
    h.pieces.push_back(p);
  }
  CVector psi0(2);
  psi0 << 1.0, 0.0;
  const CVector exact = propagate(h, psi0);
  CVector ref = psi0;
  for (std::size_t k = 0; k < h.pieces.size(); ++k)
    ref = rk4([&](double) { return h.pieces[k]; }, ref, 0.0, h.piece_duration, 1e-11);
  CHECK((exact - ref).norm() < 1e-6);
  CHECK(unitarity_error(propagator(h)) < 1e-12);
  CHECK_THROWS_AS(propagate(h, CVector(CVector::Ones(3))), ShapeError);
}

TEST_CASE("rotating-frame model reproduces the lab-frame dynamics") {
  const SpinSystem sys;
  const double carrier = std::abs(line_centre_hz(sys));
  DriveTerm d;
  d.channel = DriveChannel::mw;
  d.carrier_hz = carrier;
  d.piece_duration = 25e-9;
  d.rabi_hz = {8e6, 8e6, 5e6, 8e6};
  d.phase_rad = {0.0, 0.7, -1.2, 0.3};
  const DriveTerm drives[] = {d};
  const RotatingFrameModel m = build_rotating_frame_hamiltonian(sys, drives, LevelPair{0.0, -1.0});
  REQUIRE(m.subspace.size() == 4);

  const int i0 = sys.index(0.0, 0.5);
  CVector psi_rot = CVector::Zero(4);
  for (int i = 0; i < 4; ++i)
    if (m.subspace[i] == i0) psi_rot(i) = 1.0;
  const CVector rot = propagate(m.hamiltonian, psi_rot);

  const CMatrix h0 = build_static_hamiltonian(sys);
  const CMatrix sx = kron(spin_x(1.0), identity(2));
  const double w = constants::two_pi * carrier;
  CVector psi_lab = CVector::Zero(6);
  psi_lab(i0) = 1.0;
  for (std::size_t k = 0; k < 4; ++k) {
    auto lab = [&](double t) {
      return CMatrix(h0 + constants::two_pi * d.rabi_hz[k] * std::cos(w * t + d.phase_rad[k]) * sx);
    };
    psi_lab = rk4(lab, psi_lab, k * d.piece_duration, (k + 1) * d.piece_duration, 1.0 / (carrier * 240.0));
  }
  const double t_end = 4 * d.piece_duration;

  // Back to the lab frame: psi_lab = exp(-i F t) psi_rot on the subspace.
  double err = 0.0;
  for (int i = 0; i < 4; ++i) {
    const cd expected = std::polar(1.0, -m.frame(i) * t_end) * rot(i);
    err = std::max(err, std::abs(expected - psi_lab(m.subspace[i])));
  }
  // Counter-rotating terms at twice the carrier set the residual (~ Rabi / carrier).
  CHECK(err < 2e-3);
  CHECK(std::abs(psi_lab(sys.index(1.0, 0.5))) < 1e-3);
}

TEST_CASE("a drive off every transition is a configuration error") {
  const SpinSystem sys;
  DriveTerm d;
  d.carrier_hz = 1.0e9;
  d.piece_duration = 10e-9;
  d.rabi_hz = {1e6};
  d.phase_rad = {0.0};
  const DriveTerm drives[] = {d};
  CHECK_THROWS_AS(build_rotating_frame_hamiltonian(sys, drives, LevelPair{0.0, -1.0}), ConfigError);
}
