#include "nvmag/spin_core.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

using cd = std::complex<double>;

bool is_half_integer_or_integer(double j) {
  const double twice = 2.0 * j;
  return j >= 0.0 && std::abs(twice - std::round(twice)) < 1e-12;
}

int multiplicity(double j) { return static_cast<int>(std::lround(2.0 * j)) + 1; }

// Index of projection m in a spin-j ladder ordered +j ... -j.
int ladder_index(double j, double m) {
  const double k = j - m;
  const long idx = std::lround(k);
  if (std::abs(k - static_cast<double>(idx)) > 1e-9 || idx < 0 || idx >= multiplicity(j)) {
    throw ParameterError("projection " + std::to_string(m) + " invalid for spin " +
                         std::to_string(j));
  }
  return static_cast<int>(idx);
}

double projection(double j, int idx) { return j - static_cast<double>(idx); }

CMatrix spin_plus(double j) {
  const int n = multiplicity(j);
  CMatrix jp = CMatrix::Zero(n, n);
  // <m+1| J+ |m> = sqrt(j(j+1) - m(m+1))
  for (int col = 1; col < n; ++col) {
    const double m = projection(j, col);
    jp(col - 1, col) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
  }
  return jp;
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw ParameterError(std::string(name) + " is not finite");
}

}  // namespace

SpinSystem SpinSystem::from_hz(double zfs_hz, double hyperfine_hz, double b0_t,
                               double i_nuclear) {
  SpinSystem sys;
  sys.zfs = hz_to_rad(zfs_hz);
  sys.hyperfine = hz_to_rad(hyperfine_hz);
  sys.b0 = b0_t;
  sys.i_nuclear = i_nuclear;
  if (std::abs(i_nuclear - 1.0) < 1e-12) sys.gamma_n = constants::gamma_n14;
  return sys;
}

int SpinSystem::electron_dim() const { return multiplicity(s_electron); }
int SpinSystem::nuclear_dim() const { return multiplicity(i_nuclear); }

int SpinSystem::index(double m_s, double m_i) const {
  return ladder_index(s_electron, m_s) * nuclear_dim() + ladder_index(i_nuclear, m_i);
}

void SpinSystem::validate() const {
  require_finite(s_electron, "s_electron");
  require_finite(i_nuclear, "i_nuclear");
  require_finite(gamma_e, "gamma_e");
  require_finite(gamma_n, "gamma_n");
  require_finite(zfs, "zfs");
  require_finite(hyperfine, "hyperfine");
  require_finite(b0, "b0");
  if (!is_half_integer_or_integer(s_electron) || s_electron <= 0.0)
    throw ParameterError("s_electron must be a positive (half-)integer");
  if (!is_half_integer_or_integer(i_nuclear))
    throw ParameterError("i_nuclear must be a non-negative (half-)integer");
  if (b0 < 0.0) throw ParameterError("b0 must be non-negative");
}

CMatrix spin_z(double j) {
  const int n = multiplicity(j);
  CMatrix jz = CMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) jz(i, i) = projection(j, i);
  return jz;
}

CMatrix spin_x(double j) {
  const CMatrix jp = spin_plus(j);
  return 0.5 * (jp + jp.adjoint());
}

CMatrix spin_y(double j) {
  const CMatrix jp = spin_plus(j);
  return cd(0.0, -0.5) * (jp - jp.adjoint());
}

CMatrix identity(int n) { return CMatrix::Identity(n, n); }

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

CMatrix build_static_hamiltonian(const SpinSystem& sys) {
  sys.validate();
  const CMatrix sz = spin_z(sys.s_electron);
  const CMatrix iz = spin_z(sys.i_nuclear);
  const CMatrix ie = identity(sys.electron_dim());
  const CMatrix in = identity(sys.nuclear_dim());
  CMatrix h = kron(sys.zfs * sz * sz + sys.gamma_e * sys.b0 * sz, in) +
              kron(ie, sys.gamma_n * sys.b0 * iz) + sys.hyperfine * kron(sz, iz);
  return h;
}

double electron_transition_hz(const SpinSystem& sys, double m_s, double m_i) {
  const CMatrix h = build_static_hamiltonian(sys);
  const double upper = h(sys.index(m_s, m_i), sys.index(m_s, m_i)).real();
  const double ground = h(sys.index(0.0, m_i), sys.index(0.0, m_i)).real();
  return std::abs(rad_to_hz(upper - ground));
}

void DriveTerm::validate() const {
  if (rabi_hz.size() != phase_rad.size())
    throw ShapeError("drive amplitude and phase lengths differ");
  if (rabi_hz.empty()) throw ShapeError("drive has no pieces");
  if (!(piece_duration > 0.0) || !std::isfinite(piece_duration))
    throw ParameterError("piece duration must be positive");
  if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
    throw ParameterError("carrier must be positive");
  for (std::size_t k = 0; k < rabi_hz.size(); ++k) {
    if (!std::isfinite(rabi_hz[k]) || !std::isfinite(phase_rad[k]))
      throw ParameterError("drive piece is not finite");
  }
}

RotatingFrameModel build_rotating_frame_hamiltonian(const SpinSystem& sys,
                                                    std::span<const DriveTerm> drives,
                                                    LevelPair pair,
                                                    double detuning_window) {
  sys.validate();
  if (drives.empty()) throw ConfigError("no drives given");
  if (!(detuning_window > 0.0)) throw ParameterError("detuning window must be positive");

  const std::size_t n_pieces = drives.front().pieces();
  const double dt = drives.front().piece_duration;
  for (const auto& d : drives) {
    d.validate();
    if (d.pieces() != n_pieces || std::abs(d.piece_duration - dt) > 1e-15 * dt)
      throw ShapeError("drives must share piece count and duration");
  }

  const CMatrix h0 = build_static_hamiltonian(sys);
  const int nn = sys.nuclear_dim();
  const double electrons[2] = {pair.m_first, pair.m_second};
  if (pair.m_first == pair.m_second) throw ConfigError("level pair must be distinct");

  RotatingFrameModel model;
  for (double ms : electrons) {
    for (int k = 0; k < nn; ++k) model.subspace.push_back(sys.index(ms, projection(sys.i_nuclear, k)));
  }
  const int dim = static_cast<int>(model.subspace.size());
  auto energy = [&](int e, int k) { return h0(model.subspace[e * nn + k], model.subspace[e * nn + k]).real(); };

  // Frame: F(e, k) = offset + electron_frame[e] + nuclear_frame[k].
  double electron_frame[2] = {0.0, 0.0};
  std::vector<double> nuclear_frame(nn, 0.0);
  bool have_mw = false;
  bool have_rf = false;
  double mw_carrier = 0.0;
  double rf_carrier = 0.0;

  const CMatrix sx = spin_x(sys.s_electron);
  const CMatrix ix = spin_x(sys.i_nuclear);
  const int e_first = ladder_index(sys.s_electron, pair.m_first);
  const int e_second = ladder_index(sys.s_electron, pair.m_second);
  const double sx_pair = sx(e_first, e_second).real();

  for (const auto& d : drives) {
    const double omega = hz_to_rad(d.carrier_hz);
    const double tol = detuning_window * omega;
    if (d.channel == DriveChannel::mw) {
      if (have_mw && std::abs(omega - mw_carrier) > 1e-12 * omega)
        throw ConfigError("MW drives with different carriers need separate frames");
      bool matched = false;
      double sign = 1.0;
      if (std::abs(sx_pair) > 0.0) {
        for (int k = 0; k < nn && !matched; ++k) {
          const double gap = energy(1, k) - energy(0, k);
          if (std::abs(std::abs(gap) - omega) <= tol) {
            matched = true;
            sign = gap >= 0.0 ? 1.0 : -1.0;
          }
        }
      }
      if (!matched) throw ConfigError("MW carrier resonant with no transition in the level pair");
      electron_frame[1] = sign * omega;
      mw_carrier = omega;
      have_mw = true;
    } else {
      if (have_rf && std::abs(omega - rf_carrier) > 1e-12 * omega)
        throw ConfigError("RF drives with different carriers need separate frames");
      bool matched = false;
      double sign = 1.0;
      for (int e = 0; e < 2 && !matched; ++e) {
        for (int k = 0; k + 1 < nn && !matched; ++k) {
          const double gap = energy(e, k) - energy(e, k + 1);
          if (std::abs(std::abs(gap) - omega) <= tol) {
            matched = true;
            sign = gap >= 0.0 ? 1.0 : -1.0;
          }
        }
      }
      if (!matched) throw ConfigError("RF carrier resonant with no nuclear transition");
      for (int k = 0; k < nn; ++k) nuclear_frame[k] = sign * omega * projection(sys.i_nuclear, k);
      rf_carrier = omega;
      have_rf = true;
    }
  }

  double offset = 0.0;
  for (int k = 0; k < nn; ++k) offset += energy(0, k) - nuclear_frame[k];
  offset /= nn;

  model.frame.resize(dim);
  Eigen::VectorXd diag(dim);
  for (int e = 0; e < 2; ++e) {
    for (int k = 0; k < nn; ++k) {
      const int i = e * nn + k;
      model.frame(i) = offset + electron_frame[e] + nuclear_frame[k];
      diag(i) = energy(e, k) - model.frame(i);
    }
  }

  model.hamiltonian.piece_duration = dt;
  model.hamiltonian.pieces.reserve(n_pieces);
  for (std::size_t p = 0; p < n_pieces; ++p) {
    CMatrix h = CMatrix::Zero(dim, dim);
    h.diagonal() = diag.cast<cd>();
    for (const auto& d : drives) {
      const double amp = hz_to_rad(d.rabi_hz[p]);
      const double phi = d.phase_rad[p];
      auto couple = [&](int i, int j, double element) {
        // Keep the co-rotating half of cos(omega t + phi).
        const double s = model.frame(i) - model.frame(j) > 0.0 ? -1.0 : 1.0;
        const cd c = 0.5 * amp * element * std::polar(1.0, s * phi);
        h(i, j) += c;
        h(j, i) += std::conj(c);
      };
      if (d.channel == DriveChannel::mw) {
        for (int k = 0; k < nn; ++k) couple(k, nn + k, sx_pair);
      } else {
        for (int e = 0; e < 2; ++e) {
          for (int k = 0; k + 1 < nn; ++k) couple(e * nn + k, e * nn + k + 1, ix(k, k + 1).real());
        }
      }
    }
    model.hamiltonian.pieces.push_back(std::move(h));
  }
  return model;
}

CMatrix step_propagator(const CMatrix& h, double dt) {
  const CMatrix a = cd(0.0, -dt) * h;
  return a.exp();
}

CMatrix propagator(const PiecewiseHamiltonian& h) {
  const int n = h.dim();
  CMatrix u = CMatrix::Identity(n, n);
  for (const auto& piece : h.pieces) {
    if (piece.rows() != n || piece.cols() != n) throw ShapeError("piece dimensions differ");
    u = step_propagator(piece, h.piece_duration) * u;
  }
  return u;
}

CVector propagate(const PiecewiseHamiltonian& h, const CVector& initial) {
  if (!h.pieces.empty() && initial.size() != h.dim())
    throw ShapeError("state dimension does not match Hamiltonian");
  CVector psi = initial;
  for (const auto& piece : h.pieces) {
    if (piece.rows() != psi.size()) throw ShapeError("piece dimensions differ");
    psi = step_propagator(piece, h.piece_duration) * psi;
  }
  return psi;
}

CMatrix propagate(const PiecewiseHamiltonian& h, const CMatrix& initial) {
  if (!h.pieces.empty() && initial.rows() != h.dim())
    throw ShapeError("operator dimension does not match Hamiltonian");
  return propagator(h) * initial;
}

double unitarity_error(const CMatrix& u) {
  return (u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols())).norm();
}

bool is_hermitian(const CMatrix& h, double tol) {
  if (h.rows() != h.cols()) return false;
  return (h - h.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace nvmag
