#pragma once

// Synthetic coherence bundles for noise-spectroscopy round trips.

#include <cstdint>
#include <vector>

#include "nvmag/dd_filter.hpp"
#include "nvmag/spectrum.hpp"

namespace nvmag {

struct NoiseBundleOptions {
  LorentzianParams spectrum;
  DDFamily family = DDFamily::xy16;
  std::vector<int> n_pulses{16, 64, 128, 512};
  int points_per_curve = 12;
  // Each curve spans coherence c_high ... c_low, log-spaced in time.
  double c_high = 0.95;
  double c_low = 0.1;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

std::vector<CoherenceCurve> noise_bundle(const NoiseBundleOptions& options,
                                         double gamma = constants::gamma_e);

// Near-white Lorentzian placed db below the ERL noise line of l_eff.
LorentzianParams erl_calibrated_spectrum(double db, double l_eff,
                                         double width = constants::two_pi * 1e9);

}  // namespace nvmag
