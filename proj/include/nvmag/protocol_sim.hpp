#pragma once

// Monte Carlo simulation of the measurement protocol: charge-state feedback
// initialization, DD phase accumulation and repetitive nuclear-spin readout.

#include <cstdint>
#include <vector>

#include "nvmag/dd_filter.hpp"
#include "nvmag/sensitivity.hpp"

namespace nvmag {

struct ChargeReadoutModel {
  double mean_minus = 0.03;   // photons per readout window for NV-
  double mean_zero = 0.005;   // photons per readout window for NV0
  double window = 970e-9;     // s
  double mixing = 95e-9;      // s
  double equilibrium = 0.74;  // NV- fraction after a mixing pulse
  int max_cycles = 100;
  int threshold = 1;          // accept when count >= threshold

  void validate() const;
  double cycle_duration() const { return window + mixing; }
  double acceptance_probability() const;
  // Analytic expectations of the feedback loop.
  double purity() const;               // P(NV- | accepted)
  double success_probability() const;  // accepted within max_cycles
  double init_fidelity() const;        // P(NV-) at the end, accepted or not
  double expected_cycles() const;
};

struct ChargeInitResult {
  std::size_t n_trials = 0;
  double success_fraction = 0.0;
  double purity = 0.0;                   // NV- fraction among accepted trials
  double purity_without_feedback = 0.0;  // NV- fraction after the first mixing pulse
  double init_fidelity = 0.0;            // NV- fraction over all trials
  double mean_cycles = 0.0;
  std::vector<std::uint64_t> cycles_histogram;  // index = cycles used
  std::vector<std::uint64_t> photon_histogram;  // counts per readout window
};

ChargeInitResult simulate_charge_init(const ChargeReadoutModel& model, std::size_t n_trials,
                                      std::uint64_t seed, int threads = 1);

struct ReadoutChainModel {
  double mean_bright = 0.0198107;  // photons per cycle, nuclear spin in the bright state
  double mean_dark = 0.0138675;    // photons per cycle, dark state
  double flip_probability = 4e-5;  // per cycle
  double cycle_duration = 0.576e-6;
  int n_cycles = 2500;

  void validate() const;
  double duration() const { return n_cycles * cycle_duration; }
};

// Exact summed-count distributions and derived figures of merit.
struct ReadoutStatistics {
  int n_cycles = 0;
  std::vector<double> dist_dark;    // P(K = k | initially dark)
  std::vector<double> dist_bright;  // P(K = k | initially bright)
  int threshold = 0;                // assign bright when K >= threshold
  double fidelity = 0.5;            // optimal-threshold assignment fidelity
  // sqrt(I / 4), I the Fisher information on the bright probability at 1/2;
  // the effective contrast of the readout, 1 for a perfect readout.
  double fisher_contrast = 0.0;
  // Per-count estimator (f1 - f0) / (f1 + f0) of 2 P_bright - 1.
  std::vector<double> score;

  double score_of(int k) const;
};

ReadoutStatistics readout_statistics(const ReadoutChainModel& model);

struct ReadoutCurvePoint {
  int n_cycles = 0;
  double fidelity = 0.0;
  double fisher_contrast = 0.0;
};

// Fidelity and contrast at several cycle counts in one pass.
std::vector<ReadoutCurvePoint> readout_curve(const ReadoutChainModel& model,
                                             std::vector<int> n_cycles);

enum class NuclearState { dark, bright, alternating };

struct RepetitiveReadoutResult {
  double fidelity = 0.0;  // fraction assigned correctly
  int threshold = 0;
  std::vector<int> photons;  // per shot
  std::vector<int> truth;    // per shot, 1 = bright
};

RepetitiveReadoutResult simulate_repetitive_readout(const ReadoutChainModel& model,
                                                    NuclearState state, std::size_t n_shots,
                                                    std::uint64_t seed, int threads = 1);

enum class SignalShape { square, sine };

struct ProtocolConfig {
  DDSequence sequence = DDSequence::make(DDFamily::xy16, 512, 1.8e-3);
  double t2 = 2.0e-3;   // coherence time for C(T_C) = exp(-(T/T2)^p)
  double stretch = 1.0;
  // 90 feedback cycles fit the time left after interrogation and readout.
  ChargeReadoutModel charge{.max_cycles = 90};
  ReadoutChainModel readout;
  double shot_duration = 3.336e-3;  // s, one complete experiment
  double b_v = 112e-9;              // T/V of the signal coil
  SignalShape shape = SignalShape::square;
  double phase_offset = 0.0;        // rad, added to the accumulated phase

  void validate() const;
  double coherence() const;
  // Overhead not spent in feedback cycles, readout or phase accumulation.
  double fixed_overhead() const;
  // Phase per tesla of signal amplitude, rad/T.
  double phase_per_tesla(double gamma_e = constants::gamma_e) const;
};

// Settings of the 31.7 nm NV: XY16-512, T_C = 1.8 ms, 2500 readout cycles,
// 3.336 ms per experiment. Same as the ProtocolConfig defaults.
ProtocolConfig nv3_config();

struct ShotRecord {
  double phase = 0.0;       // rad
  std::int32_t photons = 0;
  std::uint16_t cycles = 0;  // charge feedback cycles used
  std::int8_t sign = 1;      // signal polarity
  bool nv_minus = false;
  bool bright = false;       // nuclear state entering readout
};

struct ExperimentRun {
  std::uint64_t seed = 0;
  double voltage = 0.0;
  double amplitude = 0.0;  // T
  bool alternate = true;
  std::vector<ShotRecord> shots;

  std::vector<double> outcomes(const ReadoutStatistics& stats) const;
  std::vector<int> signs() const;
};

// Shots alternate +V / -V when alternate is set. Shot i draws only from
// stream i of the seed, so the result does not depend on thread count.
ExperimentRun run_experiment(const ProtocolConfig& config, double voltage, std::size_t n_shots,
                             std::uint64_t seed, int threads = 1, bool alternate = true);

// Summed photons per voltage over shots_per_point shots.
std::vector<FringePoint> fringe_sweep(const ProtocolConfig& config,
                                      const std::vector<double>& voltages,
                                      std::size_t shots_per_point, std::uint64_t seed,
                                      int threads = 1);

// Budget trade-off curves derived from the models: C from T2 and stretch,
// F_i from the feedback loop, F_r as the Fisher contrast of the readout.
BudgetModels budget_models(const ProtocolConfig& config, const std::vector<int>& n_readout_grid);

}  // namespace nvmag
