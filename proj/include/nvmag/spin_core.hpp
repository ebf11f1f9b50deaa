#pragma once

// NV electron spin + nitrogen nuclear spin: Hamiltonians and piecewise-constant
// propagation.
//
// All frequencies are stored in rad/s. Basis ordering is the product basis
// |m_s> (x) |m_I>, each factor ordered from +j down to -j.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nvmag/constants.hpp"

namespace nvmag {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct SpinSystem {
  double s_electron = 1.0;
  double i_nuclear = 0.5;  // 15N; set 1.0 for 14N
  double gamma_e = constants::gamma_e;
  double gamma_n = constants::gamma_n15;
  double zfs = hz_to_rad(constants::zfs_hz);
  double hyperfine = hz_to_rad(constants::hyperfine_15n_hz);
  double b0 = constants::sensing_field_t;

  // Frequency arguments in Hz, field in T.
  static SpinSystem from_hz(double zfs_hz, double hyperfine_hz, double b0_t,
                            double i_nuclear = 0.5);

  int electron_dim() const;
  int nuclear_dim() const;
  int dim() const { return electron_dim() * nuclear_dim(); }

  // Product-basis index of |m_s, m_I>. Throws ParameterError for invalid m.
  int index(double m_s, double m_i) const;

  void validate() const;
};

// Spin-j operators, basis ordered m = +j ... -j.
CMatrix spin_z(double j);
CMatrix spin_x(double j);
CMatrix spin_y(double j);
CMatrix identity(int n);
CMatrix kron(const CMatrix& a, const CMatrix& b);

// D Sz^2 + gamma_e B0 Sz + gamma_n B0 Iz + A Sz Iz, in rad/s.
CMatrix build_static_hamiltonian(const SpinSystem& sys);

// Electron transition frequency |0> -> |m_s> (Hz) with the hyperfine term
// evaluated for nuclear projection m_i.
double electron_transition_hz(const SpinSystem& sys, double m_s, double m_i = 0.0);

enum class DriveChannel { mw, rf };

// Piecewise-constant drive: Omega(t) cos(omega t + phi(t)) on S_x (MW) or I_x (RF).
struct DriveTerm {
  DriveChannel channel = DriveChannel::mw;
  std::vector<double> rabi_hz;    // per piece, real
  std::vector<double> phase_rad;  // per piece
  double carrier_hz = 0.0;
  double piece_duration = 0.0;    // s

  std::size_t pieces() const { return rabi_hz.size(); }
  void validate() const;
};

// Pair of electron projections spanning the driven subspace, e.g. {0, -1}.
struct LevelPair {
  double m_first = 0.0;
  double m_second = -1.0;
};

struct PiecewiseHamiltonian {
  std::vector<CMatrix> pieces;  // rad/s, each Hermitian
  double piece_duration = 0.0;  // s

  int dim() const { return pieces.empty() ? 0 : static_cast<int>(pieces.front().rows()); }
  double duration() const { return piece_duration * static_cast<double>(pieces.size()); }
};

struct RotatingFrameModel {
  PiecewiseHamiltonian hamiltonian;
  std::vector<int> subspace;    // indices into the full product basis
  Eigen::VectorXd frame;        // frame energies (rad/s) per subspace level
};

// RWA Hamiltonian on LevelPair (x) nuclear subspace. Each drive must lie within
// detuning_window * carrier of a transition inside the subspace, otherwise
// ConfigError. All drives must have the same piece count and duration.
RotatingFrameModel build_rotating_frame_hamiltonian(const SpinSystem& sys,
                                                    std::span<const DriveTerm> drives,
                                                    LevelPair pair,
                                                    double detuning_window = 0.01);

// exp(-i h dt) for Hermitian h (Pade scaling and squaring).
CMatrix step_propagator(const CMatrix& h, double dt);

CMatrix propagator(const PiecewiseHamiltonian& h);
CVector propagate(const PiecewiseHamiltonian& h, const CVector& initial);
CMatrix propagate(const PiecewiseHamiltonian& h, const CMatrix& initial);

// ||U^dagger U - 1|| (Frobenius).
double unitarity_error(const CMatrix& u);
bool is_hermitian(const CMatrix& h, double tol = 0.0);

}  // namespace nvmag
