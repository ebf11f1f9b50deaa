#pragma once

// Inversion of DD coherence data into a noise spectrum, Lorentzian fitting
// and comparison with the energy-resolution noise line.

#include <vector>

#include "nvmag/constants.hpp"
#include "nvmag/dd_filter.hpp"
#include "nvmag/spectrum.hpp"

namespace nvmag {

// -2 ln C / (gamma^2 T), assigned to omega0 = pi N / T. Throws DataError for C <= 0.
double spectrum_zeroth(double coherence, const DDSequence& seq, double gamma = constants::gamma_e);

// Zeroth-order spectrum from every point of every curve. Points landing on
// the same omega0 are averaged.
NoiseSpectrum spectrum_zeroth(const std::vector<CoherenceCurve>& curves,
                              double gamma = constants::gamma_e);

enum class IterationStart { zeroth, zero };

struct IterationOptions {
  int max_iterations = 10;
  double tolerance = 1e-3;  // max relative change between iterates
  int k_max = 2000;         // harmonics summed explicitly; flat remainder beyond
  IterationStart start = IterationStart::zeroth;
};

struct IterationResult {
  NoiseSpectrum spectrum;
  int iterations = 0;
  bool converged = false;
  // True when some grid point has its first odd harmonic above the grid, so
  // the correction relies entirely on the extrapolated tail.
  bool extrapolated = false;
  std::vector<double> changes;  // max relative change per iteration
  int clipped = 0;               // negative values set to zero in the last iterate
};

// One step S_n(w0) = pi^2/8 S0(w0) - sum_{k>=1} S_{n-1}((2k+1) w0) / (2k+1)^2.
NoiseSpectrum spectrum_iterate_once(const NoiseSpectrum& previous, const NoiseSpectrum& zeroth,
                                    int k_max = 2000, int* clipped = nullptr);

IterationResult spectrum_iterate(const NoiseSpectrum& zeroth, const IterationOptions& options = {});

enum class T1Envelope { exponential, half_rate };

// Coherence divided by exp(-t/T1) (or exp(-t/2T1)), clipped to [0, 1.05].
CoherenceCurve deduct_t1(const CoherenceCurve& curve, double t1,
                         T1Envelope envelope = T1Envelope::exponential);

struct LorentzianFitOptions {
  bool centered = true;     // center fixed at 0
  bool with_offset = false;
};

struct LorentzianFit {
  LorentzianParams params;
  double amplitude_sigma = 0.0;
  double center_sigma = 0.0;
  double width_sigma = 0.0;
  double offset_sigma = 0.0;
  double residual_norm = 0.0;  // log-space
  // Data consistent with an unbounded width (flat spectrum); width is +inf.
  bool width_unbounded = false;
};

// Least squares on ln S. Needs >= 4 positive grid points.
LorentzianFit fit_lorentzian(const NoiseSpectrum& spectrum, const LorentzianFitOptions& options = {});

// 2 mu0 hbar / (e l^3), T^2/Hz.
double erl_noise_line(double l_eff);

// 10 log10(reference / value).
double db_below(double value, double reference);

struct ErlLineComparison {
  double line = 0.0;     // T^2/Hz
  double plateau = 0.0;  // mean spectrum above omega_min
  double db_below = 0.0;
  int points = 0;
};

ErlLineComparison compare_to_erl_line(const NoiseSpectrum& spectrum, double l_eff,
                                      double omega_min = constants::two_pi * 100e3);

}  // namespace nvmag
