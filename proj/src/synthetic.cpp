#include "nvmag/synthetic.hpp"

#include <boost/random/normal_distribution.hpp>
#include <cmath>

#include "nvmag/errors.hpp"
#include "nvmag/noise_spect.hpp"
#include "nvmag/philox.hpp"

namespace nvmag {

namespace {

constexpr std::uint64_t bundle_stream = 5ull << 56;

// Total time at which the coherence of an N-pulse sequence falls to c.
double time_at_coherence(const SpectralDensity& s, DDFamily family, int n, double c, double gamma) {
  auto coh = [&](double t) { return coherence_from_spectrum(s, DDSequence::make(family, n, t), gamma); };
  double lo = 1e-8 * n, hi = lo;
  if (coh(lo) < c) throw DataError("noise too strong: coherence below target at the shortest time");
  while (coh(hi) > c) {
    lo = hi;
    hi *= 4.0;
    if (hi > 10.0) throw DataError("noise too weak: coherence never decays to target");
  }
  while (hi / lo > 1.001) {
    const double mid = std::sqrt(lo * hi);
    (coh(mid) > c ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

std::vector<CoherenceCurve> noise_bundle(const NoiseBundleOptions& o, double gamma) {
  if (o.points_per_curve < 2) throw ParameterError("need at least 2 points per curve");
  if (!(o.c_high < 1.0 && o.c_low > 0.0 && o.c_low < o.c_high))
    throw ParameterError("coherence span must satisfy 0 < c_low < c_high < 1");
  if (!(o.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  const SpectralDensity s = SpectralDensity::of(o.spectrum);
  std::vector<CoherenceCurve> out;
  for (std::size_t ci = 0; ci < o.n_pulses.size(); ++ci) {
    const int n = o.n_pulses[ci];
    const double t0 = time_at_coherence(s, o.family, n, o.c_high, gamma);
    const double t1 = time_at_coherence(s, o.family, n, o.c_low, gamma);
    std::vector<double> times;
    for (int i = 0; i < o.points_per_curve; ++i)
      times.push_back(t0 * std::pow(t1 / t0, double(i) / (o.points_per_curve - 1)));
    CoherenceCurve c = synthesize_curve(s, o.family, n, times, gamma);
    if (o.noise_sigma > 0.0) {
      Philox4x32 rng(o.seed, bundle_stream | ci);
      boost::random::normal_distribution<double> noise(0.0, o.noise_sigma);
      for (auto& p : c.points) {
        p.coherence += noise(rng);
        p.sigma = o.noise_sigma;
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

LorentzianParams erl_calibrated_spectrum(double db, double l_eff, double width) {
  if (!(width > 0.0)) throw ParameterError("width must be positive");
  LorentzianParams p;
  p.amplitude = erl_noise_line(l_eff) * std::pow(10.0, -db / 10.0);
  p.width = width;
  return p;
}

}  // namespace nvmag
