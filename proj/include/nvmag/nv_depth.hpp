#pragma once

// Proton-NMR decoherence of a shallow NV and depth extraction.

#include <cstdint>
#include <vector>

#include "nvmag/constants.hpp"
#include "nvmag/dd_filter.hpp"

namespace nvmag {

inline constexpr double glycerine_rho_per_nm3 = 66.0;
inline constexpr double immersion_oil_rho_per_nm3 = 69.5;

struct ProtonBathModel {
  double rho = glycerine_rho_per_nm3 * 1e27;  // m^-3
  double gamma_n = constants::gamma_proton;    // rad/s/T
  double t2n_star = 200e-6;                    // s
  double diffusion = 0.0;                      // m^2/s
  double depth = 31.7e-9;                      // m
  double b0 = 0.0235;                          // T, applied field of the NMR measurement

  void validate() const;
  double larmor_omega() const;  // |gamma_n| b0, rad/s
  // Proton line half width at half maximum: 1/T2n* + D/d^2, rad/s.
  double line_width() const;
};

// rho (mu0 hbar gamma_n / 4 pi)^2 (5 pi / 96 d^3), T^2.
double b_rms_squared(const ProtonBathModel& model);

// K(N tau) for a proton line of half width `width` at `larmor_omega`:
//   K = (pi^2/4) integral_0^inf s(w) |Y(w)|^2 dw / pi,
// with s(w) = L(w - wL) + L(w + wL), L(x) = width / (width^2 + x^2).
// Reduces to (N tau)^2 for a line much narrower than the filter passband.
// Evaluated exactly in the time domain.
double overlap_k(const DDSequence& seq, double larmor_omega, double width);

// exp[-(2/pi^2) gamma_e^2 B_RMS^2 K].
double proton_coherence(const ProtonBathModel& model, const DDSequence& seq,
                        double gamma_e = constants::gamma_e);

struct DepthPoint {
  double tau = 0.0;  // pulse spacing, s
  double coherence = 0.0;
  double sigma = 0.0;
};

struct DepthDataset {
  DDFamily family = DDFamily::xy16;
  int n_pulses = 16;
  double b0 = 0.0;   // T
  double rho = 0.0;  // m^-3
  std::string sample = "glycerine";
  std::vector<DepthPoint> points;

  DDSequence sequence_at(double tau) const;
  void validate() const;
};

DepthDataset proton_signal_coherence(const ProtonBathModel& model, DDFamily family, int n_pulses,
                                     const std::vector<double>& taus,
                                     double gamma_e = constants::gamma_e);

struct DepthFit {
  double depth = 0.0;  // m
  double depth_sigma = 0.0;
  double line_width = 0.0;  // HWHM, rad/s
  double line_width_sigma = 0.0;
  double residual_norm = 0.0;
  int n_points = 0;
};

struct DepthFitOptions {
  double gamma_n = constants::gamma_proton;
  double initial_t2n_star = 200e-6;
};

// Least squares over (ln d, ln width) with rho, gamma_n and the sequence fixed
// by the dataset. Throws FitError when no dip is visible (min C >= 0.95).
DepthFit fit_depth(const DepthDataset& data, const DepthFitOptions& options = {});

struct SyntheticDepthOptions {
  double noise_sigma = 0.01;
  int n_points = 61;
  double target_dip = 0.5;  // pulse number chosen to bring the minimum near this
  std::uint64_t seed = 1;
};

// XY16-N dataset around the first dip. N is chosen from multiples of 16 up
// to 8192.
DepthDataset synthetic_depth_dataset(const ProtonBathModel& model,
                                     const SyntheticDepthOptions& options = {});

}  // namespace nvmag
