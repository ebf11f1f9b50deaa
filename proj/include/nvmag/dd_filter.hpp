#pragma once

// Dynamical-decoupling sequences, their filter functions and the forward map
// from a noise spectrum to coherence.

#include <string>
#include <vector>

#include "nvmag/constants.hpp"
#include "nvmag/least_squares.hpp"
#include "nvmag/spectrum.hpp"

namespace nvmag {

enum class DDFamily { ramsey, cpmg, xy8, xy16 };

std::string to_string(DDFamily family);
DDFamily parse_dd_family(const std::string& name);

// N ideal instantaneous pi pulses at t_j = (j - 1/2) T / N, j = 1..N.
// Pulse phases (rad) follow the standard block patterns:
//   CPMG  Y Y Y ...
//   XY8   X Y X Y Y X Y X
//   XY16  XY8 followed by XY8 with every phase shifted by pi
// Phases do not enter the filter function of ideal pulses.
struct DDSequence {
  DDFamily family = DDFamily::xy16;
  int n_pulses = 16;
  double total_time = 0.0;  // s

  static DDSequence make(DDFamily family, int n_pulses, double total_time);

  int base_block() const;
  double spacing() const;  // tau = T / N
  double omega0() const;   // pi N / T, rad/s
  std::vector<double> pulse_times() const;
  std::vector<double> pulse_phases() const;
  std::string name() const;  // e.g. "XY16-512"

  // Toggling function y(t) in {+1, -1} for 0 <= t <= T.
  double toggling(double t) const;

  void validate() const;
};

struct FilterFunction {
  double omega0 = 0.0;                  // rad/s
  double scale = 0.0;                   // pi T (s); delta weight at harmonic k is scale * weights[k]
  std::vector<double> harmonic_omega;   // (2k+1) omega0
  std::vector<double> weights;          // 8 / (pi^2 (2k+1)^2), sums to 1 as k_max -> inf
};

// High-order DD approximation
//   F_T(w) ~= 2 pi T (4/pi^2) sum_k delta(w - (2k+1) w0) / (2k+1)^2.
FilterFunction filter_delta_comb(const DDSequence& seq, int k_max);

// |integral_0^T y(t) exp(i w t) dt|^2, s^2.
double exact_filter(const DDSequence& seq, double omega);

enum class FilterModel { exact, delta_comb };

struct FilterIntegrationOptions {
  FilterModel model = FilterModel::exact;
  int k_max = 25;  // harmonics integrated explicitly
};

// gamma^2 integral_0^inf S(w) F_T(w) dw / pi. Throws NumericalError when the
// integral diverges (spectrum decaying no faster than 1/w).
double phase_variance(const SpectralDensity& spectrum, const DDSequence& seq, double gamma,
                      const FilterIntegrationOptions& options = {});

// exp(-phase_variance / 2).
double coherence_from_spectrum(const SpectralDensity& spectrum, const DDSequence& seq,
                               double gamma = constants::gamma_e,
                               const FilterIntegrationOptions& options = {});

struct CoherencePoint {
  double time = 0.0;       // total evolution time T, s
  double coherence = 0.0;
  double sigma = 0.0;
};

struct CoherenceCurve {
  DDFamily family = DDFamily::xy16;
  int n_pulses = 16;
  std::vector<CoherencePoint> points;

  DDSequence sequence_at(double total_time) const;
  // Times strictly increasing, coherence within [-0.05, 1.05].
  void validate() const;
};

// Forward model sampled at the given total times.
CoherenceCurve synthesize_curve(const SpectralDensity& spectrum, DDFamily family, int n_pulses,
                                const std::vector<double>& times, double gamma = constants::gamma_e,
                                const FilterIntegrationOptions& options = {});

struct StretchedExponentialFit {
  double t2 = 0.0;          // s
  double stretch = 1.0;     // p
  double amplitude = 1.0;   // A
  double t2_sigma = 0.0;
  double stretch_sigma = 0.0;
  double amplitude_sigma = 0.0;
  Eigen::MatrixXd covariance;  // (T2, p, A)
  double residual_norm = 0.0;
};

// Least-squares fit of A exp(-(t/T2)^p). Needs >= 4 points.
StretchedExponentialFit fit_stretched_exponential(const CoherenceCurve& curve);

struct T2Point {
  int n_pulses = 0;
  StretchedExponentialFit fit;
};

// One stretched-exponential fit per distinct pulse number, ordered by N.
std::vector<T2Point> t2_scaling(const std::vector<CoherenceCurve>& curves);

}  // namespace nvmag
