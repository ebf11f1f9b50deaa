#pragma once

// GRAPE optimisation of piecewise-constant shaped pulses on an electron
// two-level subspace.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nvmag/spin_core.hpp"

namespace nvmag {

// One robustness-ensemble member: the pulse should act as the target for a
// transition detuned by detuning_hz with drive amplitude scaled by amplitude_scale.
struct EnsembleMember {
  double detuning_hz = 0.0;
  double amplitude_scale = 1.0;
  double weight = 1.0;
};

// Detunings {0, +A/2, -A/2} with equal weights: the two nuclear-spin subspaces
// of the 15N hyperfine doublet plus the line centre.
std::vector<EnsembleMember> hyperfine_ensemble(const SpinSystem& sys);

struct GrapeProblem {
  SpinSystem sys;
  CMatrix target;  // 2x2 unitary
  std::size_t n_pieces = 10;
  double piece_duration = 25e-9;
  double max_rabi_hz = 10e6;
  std::vector<EnsembleMember> ensemble{EnsembleMember{}};

  void validate() const;
};

// Targets used by the DD sequences, defined up to a global phase.
CMatrix pi_pulse_x();
CMatrix half_pi_pulse_x();

struct Waveform {
  std::vector<double> real_hz;
  std::vector<double> imag_hz;
  double piece_duration = 0.0;

  std::size_t size() const { return real_hz.size(); }
  double max_amplitude() const;
};

// Rotating-frame Hamiltonian for one ensemble member:
// 2 pi [ s (Re sx + Im sy) / 2 + delta sz / 2 ], sx, sy, sz Pauli matrices.
PiecewiseHamiltonian grape_hamiltonian(const Waveform& wf, const EnsembleMember& member);

double fidelity(const GrapeProblem& problem, const Waveform& wf);

struct GrapeGradient {
  double fidelity = 0.0;
  std::vector<double> d_real;  // dF / d Re(Omega_k), per Hz
  std::vector<double> d_imag;
};

// Exact gradient (Frechet derivative of each piece propagator).
GrapeGradient grape_gradient(const GrapeProblem& problem, const Waveform& wf);

// Radial projection of each piece onto |Omega| <= max_rabi.
void project_amplitudes(Waveform& wf, double max_rabi_hz);

struct GrapeOptions {
  std::size_t max_iterations = 2000;
  double target_infidelity = 1e-6;
  double gradient_tolerance = 1e-12;
  double armijo_c = 1e-4;
  std::uint64_t seed = 1;
  double initial_scale = 0.5;  // random start amplitude, fraction of max_rabi
  std::size_t restarts = 8;    // extra random starts while not converged
};

struct GrapeResult {
  Waveform waveform;
  std::vector<double> trace;  // fidelity after every accepted step
  double fidelity = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Projected gradient ascent with Armijo backtracking. Never throws on
// non-convergence; returns the best waveform and converged = false.
GrapeResult optimize(const GrapeProblem& problem, const GrapeOptions& options = {});
GrapeResult optimize(const GrapeProblem& problem, Waveform seed_waveform,
                     const GrapeOptions& options = {});

// Waveform CSV: '# piece_duration_s=<value>' comment, header row, one row per piece.
void write_waveform_csv(std::ostream& out, const Waveform& wf);
Waveform read_waveform_csv(std::istream& in);

}  // namespace nvmag
