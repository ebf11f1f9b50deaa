#include "nvmag/protocol_sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <thread>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/geometric_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "nvmag/errors.hpp"
#include "nvmag/philox.hpp"

namespace nvmag {

namespace {

constexpr double pi = constants::pi;

// Stream tags keep the different simulations on disjoint Philox streams.
constexpr std::uint64_t kChargeTag = 1ull << 56;
constexpr std::uint64_t kReadoutTag = 2ull << 56;
constexpr std::uint64_t kExperimentTag = 3ull << 56;
constexpr std::uint64_t kFringeTag = 4ull << 56;

int poisson(Philox4x32& rng, double mean) {
  if (mean <= 0.0) return 0;
  boost::random::poisson_distribution<int, double> d(mean);
  return d(rng);
}

bool bernoulli(Philox4x32& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return boost::random::bernoulli_distribution<double>(p)(rng);
}

// Runs body(i) for i in [0, n) on up to `threads` workers, in contiguous chunks.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i, 0);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi, w] {
      for (std::size_t i = lo; i < hi; ++i) body(i, w);
    });
  }
  for (auto& t : pool) t.join();
}

std::size_t worker_count(std::size_t n, int threads) {
  return std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
}

struct ChargeOutcome {
  int cycles = 0;
  bool accepted = false;
  bool nv_minus = false;
  bool first_nv_minus = false;
};

template <class PhotonSink>
ChargeOutcome run_charge_loop(const ChargeReadoutModel& m, Philox4x32& rng, PhotonSink&& sink) {
  ChargeOutcome out;
  for (int c = 1; c <= m.max_cycles; ++c) {
    out.nv_minus = bernoulli(rng, m.equilibrium);
    if (c == 1) out.first_nv_minus = out.nv_minus;
    const int n = poisson(rng, out.nv_minus ? m.mean_minus : m.mean_zero);
    sink(n);
    out.cycles = c;
    if (n >= m.threshold) {
      out.accepted = true;
      break;
    }
  }
  return out;
}

// Summed photons over the readout chain starting in `bright`.
int run_readout_chain(const ReadoutChainModel& m, bool bright, Philox4x32& rng) {
  long remaining = m.n_cycles;
  double mean_total = 0.0;
  bool state = bright;
  while (remaining > 0) {
    long run = remaining;
    if (m.flip_probability > 0.0) {
      boost::random::geometric_distribution<long, double> g(m.flip_probability);
      run = std::min<long>(g(rng), remaining);
    }
    mean_total += run * (state ? m.mean_bright : m.mean_dark);
    remaining -= run;
    if (remaining == 0) break;
    // The flip happens at the start of this cycle, which then counts in the new state.
    state = !state;
    mean_total += state ? m.mean_bright : m.mean_dark;
    remaining -= 1;
  }
  return poisson(rng, mean_total);
}

struct DistributionPair {
  std::vector<double> dark, bright;
};

void fill_metrics(const DistributionPair& d, ReadoutStatistics* stats, ReadoutCurvePoint* point) {
  const std::size_t k_len = d.dark.size();
  double cum0 = 0.0, cum1 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (std::size_t t = 0; t <= k_len; ++t) {
    const double pc = 0.5 * (cum0 + 1.0 - cum1);
    if (pc > best + 1e-15) {
      best = pc;
      best_t = static_cast<int>(t);
    }
    if (t < k_len) {
      cum0 += d.dark[t];
      cum1 += d.bright[t];
    }
  }
  double info = 0.0;
  for (std::size_t k = 0; k < k_len; ++k) {
    const double s = d.dark[k] + d.bright[k];
    if (s > 1e-300) info += (d.bright[k] - d.dark[k]) * (d.bright[k] - d.dark[k]) / (0.5 * s);
  }
  const double contrast = std::sqrt(info / 4.0);
  if (point) {
    point->fidelity = best;
    point->fisher_contrast = contrast;
  }
  if (stats) {
    stats->threshold = best_t;
    stats->fidelity = best;
    stats->fisher_contrast = contrast;
    stats->dist_dark = d.dark;
    stats->dist_bright = d.bright;
    stats->score.resize(k_len);
    for (std::size_t k = 0; k < k_len; ++k) {
      const double s = d.dark[k] + d.bright[k];
      stats->score[k] = s > 1e-300 ? (d.bright[k] - d.dark[k]) / s : 0.0;
    }
  }
}

// Forward recursion over cycles: flip with probability p, then emit Poisson
// counts of the current state. Calls visit(n, distributions) after n cycles
// for every requested n.
template <class Visit>
void propagate_distributions(const ReadoutChainModel& m, const std::vector<int>& checkpoints,
                             Visit&& visit) {
  const int n_max = checkpoints.empty() ? 0 : checkpoints.back();
  const double mu_max = std::max(m.mean_bright, m.mean_dark);
  const std::size_t k_len =
      static_cast<std::size_t>(n_max * mu_max + 12.0 * std::sqrt(n_max * mu_max) + 30.0);

  std::vector<double> pmf_dark, pmf_bright;
  for (auto [mu, pmf] : {std::pair{m.mean_dark, &pmf_dark}, std::pair{m.mean_bright, &pmf_bright}}) {
    double term = std::exp(-mu);
    for (int j = 0; j < 64; ++j) {
      pmf->push_back(term);
      term *= mu / (j + 1);
      if (term < 1e-18) break;
    }
  }

  // P[start][state][k]
  std::vector<double> p[2][2];
  for (int s0 = 0; s0 < 2; ++s0) {
    for (int s = 0; s < 2; ++s) p[s0][s].assign(k_len, 0.0);
    p[s0][s0][0] = 1.0;
  }
  std::vector<double> q0(k_len), q1(k_len);
  std::size_t next = 0;
  const double flip = m.flip_probability;
  auto report = [&](int n) {
    while (next < checkpoints.size() && checkpoints[next] == n) {
      DistributionPair d;
      d.dark.resize(k_len);
      d.bright.resize(k_len);
      for (std::size_t k = 0; k < k_len; ++k) {
        d.dark[k] = p[0][0][k] + p[0][1][k];
        d.bright[k] = p[1][0][k] + p[1][1][k];
      }
      visit(n, d);
      ++next;
    }
  };
  report(0);
  // Counts never exceed j_max per cycle, so only the first (n + 1) j_max bins can be occupied.
  const std::size_t j_max = std::max(pmf_dark.size(), pmf_bright.size());
  for (int n = 1; n <= n_max; ++n) {
    const std::size_t live = std::min(k_len, static_cast<std::size_t>(n) * j_max + 1);
    for (int s0 = 0; s0 < 2; ++s0) {
      for (std::size_t k = 0; k < live; ++k) {
        q0[k] = (1.0 - flip) * p[s0][0][k] + flip * p[s0][1][k];
        q1[k] = (1.0 - flip) * p[s0][1][k] + flip * p[s0][0][k];
      }
      for (int s = 0; s < 2; ++s) {
        const std::vector<double>& q = s == 0 ? q0 : q1;
        const std::vector<double>& pmf = s == 0 ? pmf_dark : pmf_bright;
        auto& out = p[s0][s];
        for (std::size_t k = live; k-- > 0;) {
          double acc = 0.0;
          const std::size_t jm = std::min(pmf.size(), k + 1);
          for (std::size_t j = 0; j < jm; ++j) acc += q[k - j] * pmf[j];
          out[k] = acc;
        }
      }
    }
    report(n);
  }
}

}  // namespace

void ChargeReadoutModel::validate() const {
  if (!(mean_minus >= 0.0) || !(mean_zero >= 0.0) || !std::isfinite(mean_minus) ||
      !std::isfinite(mean_zero))
    throw ParameterError("photon means must be finite and >= 0");
  if (!(window > 0.0) || !(mixing >= 0.0)) throw ParameterError("window durations invalid");
  if (!(equilibrium >= 0.0 && equilibrium <= 1.0))
    throw ParameterError("equilibrium fraction must be in [0, 1]");
  if (max_cycles < 1 || max_cycles > 65535) throw ParameterError("max_cycles must be in [1, 65535]");
  if (threshold < 0) throw ParameterError("threshold must be >= 0");
}

double ChargeReadoutModel::acceptance_probability() const {
  // P(count >= threshold) for each state, mixed by the equilibrium fraction.
  auto tail = [&](double mu) {
    double term = std::exp(-mu), below = 0.0;
    for (int j = 0; j < threshold; ++j) {
      below += term;
      term *= mu / (j + 1);
    }
    return 1.0 - below;
  };
  return equilibrium * tail(mean_minus) + (1.0 - equilibrium) * tail(mean_zero);
}

double ChargeReadoutModel::purity() const {
  auto tail = [&](double mu) {
    double term = std::exp(-mu), below = 0.0;
    for (int j = 0; j < threshold; ++j) {
      below += term;
      term *= mu / (j + 1);
    }
    return 1.0 - below;
  };
  const double a = acceptance_probability();
  return a > 0.0 ? equilibrium * tail(mean_minus) / a : equilibrium;
}

double ChargeReadoutModel::success_probability() const {
  return 1.0 - std::pow(1.0 - acceptance_probability(), max_cycles);
}

double ChargeReadoutModel::init_fidelity() const {
  const double s = success_probability();
  return s * purity() + (1.0 - s) * equilibrium;
}

double ChargeReadoutModel::expected_cycles() const {
  const double a = acceptance_probability();
  if (a <= 0.0) return max_cycles;
  return (1.0 - std::pow(1.0 - a, max_cycles)) / a;
}

ChargeInitResult simulate_charge_init(const ChargeReadoutModel& model, std::size_t n_trials,
                                      std::uint64_t seed, int threads) {
  model.validate();
  if (n_trials == 0) throw ParameterError("need at least one trial");
  const std::size_t workers = worker_count(n_trials, threads);
  std::vector<ChargeOutcome> outcomes(n_trials);
  std::vector<std::vector<std::uint64_t>> photons(workers);
  parallel_for(n_trials, threads, [&](std::size_t i, std::size_t w) {
    Philox4x32 rng(seed, kChargeTag | i);
    auto& hist = photons[w];
    outcomes[i] = run_charge_loop(model, rng, [&](int n) {
      if (hist.size() <= static_cast<std::size_t>(n)) hist.resize(static_cast<std::size_t>(n) + 1, 0);
      ++hist[static_cast<std::size_t>(n)];
    });
  });

  ChargeInitResult r;
  r.n_trials = n_trials;
  r.cycles_histogram.assign(static_cast<std::size_t>(model.max_cycles) + 1, 0);
  std::size_t accepted = 0, accepted_minus = 0, final_minus = 0, first_minus = 0;
  double cycles = 0.0;
  for (const auto& o : outcomes) {
    ++r.cycles_histogram[static_cast<std::size_t>(o.cycles)];
    cycles += o.cycles;
    if (o.accepted) {
      ++accepted;
      if (o.nv_minus) ++accepted_minus;
    }
    if (o.nv_minus) ++final_minus;
    if (o.first_nv_minus) ++first_minus;
  }
  for (const auto& h : photons) {
    if (r.photon_histogram.size() < h.size()) r.photon_histogram.resize(h.size(), 0);
    for (std::size_t k = 0; k < h.size(); ++k) r.photon_histogram[k] += h[k];
  }
  const double n = static_cast<double>(n_trials);
  r.success_fraction = accepted / n;
  r.purity = accepted > 0 ? static_cast<double>(accepted_minus) / accepted : 0.0;
  r.purity_without_feedback = first_minus / n;
  r.init_fidelity = final_minus / n;
  r.mean_cycles = cycles / n;
  return r;
}

void ReadoutChainModel::validate() const {
  if (!(mean_bright >= 0.0) || !(mean_dark >= 0.0) || !std::isfinite(mean_bright) ||
      !std::isfinite(mean_dark))
    throw ParameterError("readout photon means must be finite and >= 0");
  if (!(flip_probability >= 0.0 && flip_probability < 1.0))
    throw ParameterError("flip probability must be in [0, 1)");
  if (!(cycle_duration > 0.0)) throw ParameterError("cycle duration must be positive");
  if (n_cycles < 0) throw ParameterError("n_cycles must be >= 0");
}

double ReadoutStatistics::score_of(int k) const {
  if (score.empty()) return 0.0;
  const std::size_t i = std::min(score.size() - 1, static_cast<std::size_t>(std::max(k, 0)));
  return score[i];
}

ReadoutStatistics readout_statistics(const ReadoutChainModel& model) {
  model.validate();
  ReadoutStatistics stats;
  stats.n_cycles = model.n_cycles;
  propagate_distributions(model, {model.n_cycles},
                          [&](int, const DistributionPair& d) { fill_metrics(d, &stats, nullptr); });
  return stats;
}

std::vector<ReadoutCurvePoint> readout_curve(const ReadoutChainModel& model,
                                             std::vector<int> n_cycles) {
  model.validate();
  std::sort(n_cycles.begin(), n_cycles.end());
  n_cycles.erase(std::unique(n_cycles.begin(), n_cycles.end()), n_cycles.end());
  if (!n_cycles.empty() && n_cycles.front() < 0) throw ParameterError("cycle counts must be >= 0");
  std::vector<ReadoutCurvePoint> out;
  propagate_distributions(model, n_cycles, [&](int n, const DistributionPair& d) {
    ReadoutCurvePoint p;
    p.n_cycles = n;
    fill_metrics(d, nullptr, &p);
    out.push_back(p);
  });
  return out;
}

RepetitiveReadoutResult simulate_repetitive_readout(const ReadoutChainModel& model,
                                                    NuclearState state, std::size_t n_shots,
                                                    std::uint64_t seed, int threads) {
  model.validate();
  if (n_shots == 0) throw ParameterError("need at least one shot");
  const ReadoutStatistics stats = readout_statistics(model);
  RepetitiveReadoutResult r;
  r.threshold = stats.threshold;
  r.photons.resize(n_shots);
  r.truth.resize(n_shots);
  parallel_for(n_shots, threads, [&](std::size_t i, std::size_t) {
    Philox4x32 rng(seed, kReadoutTag | i);
    const bool bright = state == NuclearState::bright ||
                        (state == NuclearState::alternating && i % 2 == 0);
    r.truth[i] = bright ? 1 : 0;
    r.photons[i] = run_readout_chain(model, bright, rng);
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n_shots; ++i) {
    const bool assigned = r.photons[i] >= r.threshold;
    if (assigned == (r.truth[i] == 1)) ++correct;
  }
  r.fidelity = static_cast<double>(correct) / n_shots;
  return r;
}

void ProtocolConfig::validate() const {
  sequence.validate();
  charge.validate();
  readout.validate();
  if (!(t2 > 0.0) || !(stretch > 0.0)) throw ConfigError("T2 and stretch must be positive");
  if (!(b_v >= 0.0) || !std::isfinite(b_v)) throw ConfigError("B_V must be non-negative");
  if (!(shot_duration > 0.0)) throw ConfigError("shot duration must be positive");
  const double used =
      charge.max_cycles * charge.cycle_duration() + sequence.total_time + readout.duration();
  if (used > shot_duration * (1.0 + 1e-9)) {
    throw ConfigError("shot duration " + std::to_string(shot_duration) +
                      " s is shorter than feedback + interrogation + readout (" +
                      std::to_string(used) + " s)");
  }
}

double ProtocolConfig::coherence() const {
  return stretched_coherence(sequence.total_time, t2, stretch);
}

double ProtocolConfig::fixed_overhead() const {
  return std::max(0.0, shot_duration - charge.max_cycles * charge.cycle_duration() -
                           sequence.total_time - readout.duration());
}

double ProtocolConfig::phase_per_tesla(double gamma_e) const {
  // Square signal locked to the toggling function adds up fully; a sine at
  // the filter centre frequency keeps its fundamental overlap 2/pi.
  const double overlap = shape == SignalShape::square ? 1.0 : 2.0 / pi;
  return gamma_e * sequence.total_time * overlap;
}

ProtocolConfig nv3_config() {
  ProtocolConfig c;
  c.sequence = DDSequence::make(DDFamily::xy16, 512, 1.8e-3);
  c.t2 = 2.0e-3;
  c.stretch = 1.0;
  c.readout.n_cycles = 2500;
  c.charge.max_cycles = 90;
  c.shot_duration = 3.336e-3;
  return c;
}

std::vector<double> ExperimentRun::outcomes(const ReadoutStatistics& stats) const {
  std::vector<double> out;
  out.reserve(shots.size());
  for (const auto& s : shots) out.push_back(stats.score_of(s.photons));
  return out;
}

std::vector<int> ExperimentRun::signs() const {
  std::vector<int> out;
  out.reserve(shots.size());
  for (const auto& s : shots) out.push_back(s.sign);
  return out;
}

namespace {

ShotRecord simulate_shot(const ProtocolConfig& config, double coherence, double phase,
                         int sign, Philox4x32& rng) {
  ShotRecord shot;
  shot.sign = static_cast<std::int8_t>(sign);
  shot.phase = phase;
  const ChargeOutcome charge = run_charge_loop(config.charge, rng, [](int) {});
  shot.cycles = static_cast<std::uint16_t>(charge.cycles);
  shot.nv_minus = charge.nv_minus;
  const double contrast = charge.nv_minus ? coherence : 0.0;
  const double p_bright = 0.5 * (1.0 + contrast * std::sin(phase));
  shot.bright = bernoulli(rng, p_bright);
  shot.photons = run_readout_chain(config.readout, shot.bright, rng);
  return shot;
}

}  // namespace

ExperimentRun run_experiment(const ProtocolConfig& config, double voltage, std::size_t n_shots,
                             std::uint64_t seed, int threads, bool alternate) {
  config.validate();
  if (n_shots == 0) throw ParameterError("need at least one shot");
  ExperimentRun run;
  run.seed = seed;
  run.voltage = voltage;
  run.amplitude = config.b_v * voltage;
  run.alternate = alternate;
  run.shots.resize(n_shots);
  const double coherence = config.coherence();
  const double phase_per_t = config.phase_per_tesla();
  parallel_for(n_shots, threads, [&](std::size_t i, std::size_t) {
    Philox4x32 rng(seed, kExperimentTag | i);
    const int sign = (alternate && i % 2 == 1) ? -1 : 1;
    const double phase = sign * phase_per_t * run.amplitude + config.phase_offset;
    run.shots[i] = simulate_shot(config, coherence, phase, sign, rng);
  });
  return run;
}

std::vector<FringePoint> fringe_sweep(const ProtocolConfig& config,
                                      const std::vector<double>& voltages,
                                      std::size_t shots_per_point, std::uint64_t seed,
                                      int threads) {
  config.validate();
  if (voltages.empty() || shots_per_point == 0) throw ParameterError("empty fringe sweep");
  const double coherence = config.coherence();
  const double phase_per_t = config.phase_per_tesla();
  const std::size_t total = voltages.size() * shots_per_point;
  std::vector<int> photons(total);
  parallel_for(total, threads, [&](std::size_t i, std::size_t) {
    const std::size_t v = i / shots_per_point;
    Philox4x32 rng(seed, kFringeTag | i);
    const double phase = phase_per_t * config.b_v * voltages[v] + config.phase_offset;
    photons[i] = simulate_shot(config, coherence, phase, 1, rng).photons;
  });
  std::vector<FringePoint> out;
  for (std::size_t v = 0; v < voltages.size(); ++v) {
    double sum = 0.0;
    for (std::size_t s = 0; s < shots_per_point; ++s) sum += photons[v * shots_per_point + s];
    out.push_back({voltages[v], sum, 0.0});
  }
  return out;
}

BudgetModels budget_models(const ProtocolConfig& config, const std::vector<int>& n_readout_grid) {
  config.validate();
  BudgetModels m;
  const double t2 = config.t2, stretch = config.stretch;
  m.coherence = [t2, stretch](double t_c) { return stretched_coherence(t_c, t2, stretch); };
  const ChargeReadoutModel charge = config.charge;
  m.f_i = [charge](int n_fb) {
    ChargeReadoutModel c = charge;
    c.max_cycles = std::max(n_fb, 1);
    return c.init_fidelity();
  };
  auto curve = std::make_shared<std::vector<ReadoutCurvePoint>>(readout_curve(config.readout, n_readout_grid));
  m.f_r = [curve](int n_ro) {
    for (const auto& p : *curve)
      if (p.n_cycles == n_ro) return p.fisher_contrast;
    throw ParameterError("readout cycle count " + std::to_string(n_ro) + " not on the grid");
  };
  const double fixed = config.fixed_overhead();
  const double cycle_fb = charge.cycle_duration();
  const double cycle_ro = config.readout.cycle_duration;
  m.overhead = [=](double, int n_fb, int n_ro) { return fixed + n_fb * cycle_fb + n_ro * cycle_ro; };
  return m;
}

}  // namespace nvmag
