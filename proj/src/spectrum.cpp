#include "nvmag/spectrum.hpp"

#include <algorithm>
#include <cmath>

#include "nvmag/errors.hpp"

namespace nvmag {

double LorentzianParams::operator()(double omega) const {
  const double x = omega - center;
  return offset + amplitude * width * width / (width * width + x * x);
}

LorentzianParams ornstein_uhlenbeck(double b_rms, double tau) {
  if (!(tau > 0.0)) throw ParameterError("correlation time must be positive");
  return LorentzianParams{2.0 * b_rms * b_rms * tau, 0.0, 1.0 / tau, 0.0};
}

NoiseSpectrum::NoiseSpectrum(std::vector<double> omega, std::vector<double> s)
    : omega_(std::move(omega)), s_(std::move(s)) {
  if (omega_.size() != s_.size()) throw DataError("spectrum grid and values differ in length");
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    if (!std::isfinite(omega_[i]) || !std::isfinite(s_[i]))
      throw DataError("spectrum contains non-finite values");
    if (s_[i] < 0.0) throw DataError("spectrum must be non-negative");
    if (omega_[i] < 0.0) throw DataError("spectrum frequencies must be non-negative");
    if (i > 0 && !(omega_[i] > omega_[i - 1]))
      throw DataError("spectrum grid must be strictly increasing");
  }
  fit_tail();
}

void NoiseSpectrum::fit_tail() {
  tail_flat_ = true;
  tail_exponent_ = 0.0;
  if (omega_.empty()) return;
  tail_ref_omega_ = omega_.back();
  tail_ref_s_ = s_.back();

  const double cutoff = omega_.back() / 10.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    if (omega_[i] < cutoff || omega_[i] <= 0.0 || s_[i] <= 0.0) continue;
    const double x = std::log(omega_[i]);
    const double y = std::log(s_[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return;
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) return;
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  // Noise spectra are non-increasing in the far tail.
  tail_exponent_ = std::min(slope, 0.0);
  // Anchor at the last grid point so the tail joins the grid continuously.
  tail_ref_s_ = s_.back() > 0.0 ? s_.back() : std::exp(intercept + slope * std::log(tail_ref_omega_));
  tail_flat_ = false;
}

double NoiseSpectrum::operator()(double omega) const {
  if (omega_.empty()) return 0.0;
  if (omega <= omega_.front()) return s_.front();
  if (omega >= omega_.back()) {
    if (tail_flat_) return s_.back();
    return tail_ref_s_ * std::pow(omega / tail_ref_omega_, tail_exponent_);
  }
  const auto it = std::upper_bound(omega_.begin(), omega_.end(), omega);
  const std::size_t hi = static_cast<std::size_t>(it - omega_.begin());
  const std::size_t lo = hi - 1;
  const double w0 = omega_[lo], w1 = omega_[hi];
  const double s0 = s_[lo], s1 = s_[hi];
  if (w0 > 0.0 && s0 > 0.0 && s1 > 0.0) {
    const double t = std::log(omega / w0) / std::log(w1 / w0);
    return std::exp(std::log(s0) + t * (std::log(s1) - std::log(s0)));
  }
  const double t = (omega - w0) / (w1 - w0);
  return s0 + t * (s1 - s0);
}

SpectralDensity SpectralDensity::of(const NoiseSpectrum& spectrum) {
  SpectralDensity d;
  d.density = [spectrum](double w) { return spectrum(w); };
  return d;
}

SpectralDensity SpectralDensity::of(const LorentzianParams& lorentzian) {
  SpectralDensity d;
  d.density = [lorentzian](double w) { return lorentzian(w); };
  d.feature_width = lorentzian.amplitude > 0.0 ? lorentzian.width
                                              : std::numeric_limits<double>::infinity();
  return d;
}

SpectralDensity SpectralDensity::flat(double level) {
  SpectralDensity d;
  d.density = [level](double) { return level; };
  return d;
}

}  // namespace nvmag
