#pragma once

// Magnetic noise spectral density S(omega).
//
// Convention: S is the angular-frequency power spectral density of the field
// such that <B^2> = integral_0^inf S(omega) d omega / pi, so that
// dphi^2 = gamma_e^2 integral_0^inf S(omega) F_T(omega) d omega / pi.
// Units T^2 s (equivalently T^2/Hz). An Ornstein-Uhlenbeck field with
// <B(0)B(t)> = b^2 exp(-|t|/tau) has S(omega) = 2 b^2 tau / (1 + omega^2 tau^2).

#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace nvmag {

// offset + amplitude * width^2 / (width^2 + (omega - center)^2)
struct LorentzianParams {
  double amplitude = 0.0;  // T^2/Hz
  double center = 0.0;     // rad/s
  double width = 1.0;      // rad/s, half width at half maximum
  double offset = 0.0;     // T^2/Hz

  double operator()(double omega) const;
};

// Ornstein-Uhlenbeck (centred Lorentzian) spectrum of rms b and correlation time tau.
LorentzianParams ornstein_uhlenbeck(double b_rms, double tau);

class NoiseSpectrum {
 public:
  NoiseSpectrum() = default;
  // omega strictly increasing, s >= 0 and finite. Throws DataError otherwise.
  NoiseSpectrum(std::vector<double> omega, std::vector<double> s);

  const std::vector<double>& omega() const { return omega_; }
  const std::vector<double>& values() const { return s_; }
  std::size_t size() const { return omega_.size(); }
  bool empty() const { return omega_.empty(); }

  // Log-log interpolation inside the grid; held flat below it; power-law
  // tail fitted to the top decade above it.
  double operator()(double omega) const;

  double tail_exponent() const { return tail_exponent_; }
  // True when the grid was too narrow to fit a tail and a flat one is used.
  bool tail_is_flat_fallback() const { return tail_flat_; }

  std::optional<LorentzianParams> lorentzian;

 private:
  void fit_tail();

  std::vector<double> omega_;
  std::vector<double> s_;
  double tail_exponent_ = 0.0;
  double tail_ref_omega_ = 0.0;
  double tail_ref_s_ = 0.0;
  bool tail_flat_ = true;
};

// Anything evaluable as S(omega), with the narrowest feature width (rad/s)
// used to refine quadrature panels.
struct SpectralDensity {
  std::function<double(double)> density;
  double feature_width = std::numeric_limits<double>::infinity();

  double operator()(double omega) const { return density(omega); }

  static SpectralDensity of(const NoiseSpectrum& spectrum);
  static SpectralDensity of(const LorentzianParams& lorentzian);
  static SpectralDensity flat(double level);
};

}  // namespace nvmag
