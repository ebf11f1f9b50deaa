// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <boost/random/uniform_real_distribution.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "nvmag/constants.hpp"
#include "nvmag/io.hpp"
#include "nvmag/manifest.hpp"
#include "nvmag/noise_spect.hpp"
#include "nvmag/nv_depth.hpp"
#include "nvmag/philox.hpp"
#include "nvmag/protocol_sim.hpp"
#include "nvmag/pulse_control.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/synthetic.hpp"

using namespace nvmag;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int n, const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %d %s: %s (%.2f s)%s\n", n, name.c_str(), o.pass ? "PASS" : "FAIL",
              seconds_since(t0), o.detail.str().c_str());
  std::fflush(stdout);
}

double rel(double a, double b) { return std::abs(a / b - 1.0); }

// Hashes of every stochastic product, recomputed under criterion 9.
struct Digests {
  std::string bundle, depth, grape, charge, readout, shots, fringe;
};

std::string digest(const std::vector<CoherenceCurve>& curves) {
  std::ostringstream s;
  for (const auto& c : curves) write_coherence_csv(s, c);
  return sha256_hex(s.str());
}

std::string digest(const DepthDataset& d) {
  std::ostringstream s;
  write_depth_csv(s, d);
  return sha256_hex(s.str());
}

std::string digest(const Waveform& w) {
  std::ostringstream s;
  write_waveform_csv(s, w);
  return sha256_hex(s.str());
}

std::string digest(const ChargeInitResult& r) {
  std::ostringstream s;
  s << r.n_trials << ' ' << format_double(r.success_fraction) << ' ' << format_double(r.purity) << ' '
    << format_double(r.purity_without_feedback) << ' ' << format_double(r.init_fidelity) << ' '
    << format_double(r.mean_cycles);
  for (auto v : r.cycles_histogram) s << ' ' << v;
  for (auto v : r.photon_histogram) s << ' ' << v;
  return sha256_hex(s.str());
}

std::string digest(const RepetitiveReadoutResult& r) {
  std::ostringstream s;
  s << format_double(r.fidelity) << ' ' << r.threshold;
  for (auto v : r.photons) s << ' ' << v;
  for (auto v : r.truth) s << ' ' << v;
  return sha256_hex(s.str());
}

std::string digest(const ExperimentRun& r) {
  std::ostringstream s;
  write_shots_csv(s, r);
  return sha256_hex(s.str());
}

std::string digest(const std::vector<FringePoint>& f) {
  std::ostringstream s;
  for (const auto& p : f) s << format_double(p.voltage) << ',' << format_double(p.counts) << '\n';
  return sha256_hex(s.str());
}

NoiseBundleOptions noisy_bundle_options() {
  NoiseBundleOptions o;
  o.spectrum = {1e-19, 0.0, constants::two_pi * 1e6, 0.0};
  o.noise_sigma = 0.005;
  o.seed = kSeed;
  return o;
}

ProtonBathModel bath_at(double depth_nm) {
  ProtonBathModel m;
  m.depth = depth_nm * 1e-9;
  return m;
}

SyntheticDepthOptions depth_options(std::size_t i) {
  SyntheticDepthOptions o;
  o.seed = kSeed + i;
  return o;
}

GrapeProblem grape_problem(bool half_pi) {
  GrapeProblem p;
  p.target = half_pi ? half_pi_pulse_x() : pi_pulse_x();
  p.n_pieces = half_pi ? 14 : 10;
  p.piece_duration = 25e-9;
  p.ensemble = hyperfine_ensemble(p.sys);
  return p;
}

GrapeOptions grape_options() {
  GrapeOptions o;
  o.seed = kSeed;
  return o;
}

// Central differences relative to the largest analytic gradient entry.
double fd_mismatch(const GrapeProblem& p, const Waveform& wf) {
  const GrapeGradient g = grape_gradient(p, wf);
  const double h = 10.0;
  double scale = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < wf.size(); ++k) {
    for (int part = 0; part < 2; ++part) {
      Waveform a = wf, b = wf;
      (part == 0 ? a.real_hz[k] : a.imag_hz[k]) += h;
      (part == 0 ? b.real_hz[k] : b.imag_hz[k]) -= h;
      const double fd = (fidelity(p, a) - fidelity(p, b)) / (2 * h);
      const double an = part == 0 ? g.d_real[k] : g.d_imag[k];
      scale = std::max(scale, std::abs(an));
      worst = std::max(worst, std::abs(fd - an));
    }
  }
  return worst / scale;
}

// 0.5 nT square signal, 6e6 shots (about 5.6 h of averaging).
constexpr double kSignal = 0.5e-9;
constexpr std::size_t kLongShots = 6000000;
constexpr std::size_t kChargeTrials = 400000;
constexpr std::size_t kReadoutShots = 200000;

std::vector<double> fringe_voltages(const ProtocolConfig& c) {
  const double v_max = 2.0 * constants::pi / std::abs(c.phase_per_tesla() * c.b_v);
  std::vector<double> v;
  for (int i = 0; i < 41; ++i) v.push_back(-v_max + 2.0 * v_max * i / 40.0);
  return v;
}

std::vector<std::string> cli_output_hashes(const fs::path& dir) {
  std::vector<std::string> h;
  for (const auto& o : manifest_from_json(read_json_file(dir / "manifest.json")).outputs)
    h.push_back(o.path + ":" + o.sha256);
  return h;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NVMAG_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

}  // namespace

int main() {
  Digests first;

  report(1, "ERL reproduction", [](Outcome& o) {
    const double e = erl_compute(0.59e-9, 31.7e-9);
    const double db = db_below_erl(e);
    o.detail << " E_R = " << e << " hbar, " << db << " dB below ERL";
    o.require(rel(e, 0.042) <= 0.02, "E_R within 2% of 0.042");
    o.require(std::abs(db - 13.8) <= 0.15, "13.8 +- 0.15 dB");
  });

  report(2, "magnetometer table audit", [](Outcome& o) {
    const auto records = read_magnetometer_table(read_csv_file(fs::path(NVMAG_DATA) / "table_s1.csv"));
    const ErlCheckReport r = erl_table_check(records, 0.1);
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, row.relative_deviation);
    o.detail << " rows " << r.rows.size() << ", failures " << r.failures << ", worst deviation "
             << worst;
    if (r.rows.size() >= 2)
      o.detail << ", row 1 " << r.rows[0].recomputed << " hbar, row 2 " << r.rows[1].recomputed << " hbar";
    o.require(r.rows.size() == 24, "24 rows");
    o.require(r.failures == 0, "all rows within 10%");
  });

  report(3, "sensitivity budget", [](Outcome& o) {
    SensitivityBudget b;
    b.t_c = 1.8e-3;
    b.t_ir = 3.336e-3 - 1.8e-3;
    b.f_i = 0.92;
    b.f_r = 0.84;
    b.coherence = stretched_coherence(b.t_c, 2.0e-3, 1.0);
    const double eta = eta_from_budget(b);
    o.detail << " C = " << b.coherence << ", eta = " << eta * 1e9 << " nT/sqrt(Hz)";
    o.require(rel(eta, 0.59e-9) <= 0.10, "within 10% of 0.59 nT/sqrt(Hz)");
  });

  report(4, "noise-spectroscopy round trip", [&](Outcome& o) {
    for (double width_mhz : {0.05, 0.3, 1.0, 3.0}) {
      const auto t0 = Clock::now();
      NoiseBundleOptions opt;
      opt.spectrum = {1e-19, 0.0, constants::two_pi * width_mhz * 1e6, 0.0};
      const auto curves = noise_bundle(opt);
      const NoiseSpectrum z = spectrum_zeroth(curves);
      IterationOptions io;
      io.max_iterations = 1;
      const NoiseSpectrum s = spectrum_iterate(z, io).spectrum;
      const double dt = seconds_since(t0);
      double worst = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        worst = std::max(worst, rel(s.values()[i], opt.spectrum(s.omega()[i])));
      o.detail << " width " << width_mhz << " MHz: " << s.size() << " points, max error "
               << worst * 100 << "%, " << dt << " s;";
      o.require(worst <= 0.10, "within 10% at " + std::to_string(width_mhz) + " MHz");
      o.require(dt < 10.0, "under 10 s");
    }
    first.bundle = digest(noise_bundle(noisy_bundle_options()));
  });

  report(5, "ERL noise line", [](Outcome& o) {
    const double l = 31.7e-9;
    const double line = erl_noise_line(l);
    const double oracle = 2.0 * 1.25663706212e-6 * 1.054571817e-34 / (std::exp(1.0) * l * l * l);
    NoiseBundleOptions opt;
    opt.spectrum = erl_calibrated_spectrum(21.6, l);
    const NoiseSpectrum z = spectrum_zeroth(noise_bundle(opt));
    IterationOptions io;
    io.max_iterations = 1;
    const ErlLineComparison c = compare_to_erl_line(spectrum_iterate(z, io).spectrum, l);
    o.detail << " line = " << line << " T^2/Hz, calibrated spectrum " << c.db_below << " dB below ("
             << c.points << " points)";
    o.require(rel(line, oracle) <= 1e-14, "line equals 2 mu0 hbar / (e l^3)");
    o.require(std::abs(c.db_below - 21.6) <= 0.2, "21.6 +- 0.2 dB");
  });

  report(6, "depth-fit round trip", [&](Outcome& o) {
    const auto t0 = Clock::now();
    const auto table = read_measured_nv_table(read_csv_file(fs::path(NVMAG_DATA) / "table_s2.csv"));
    o.require(table.size() == 6, "six NVs");
    std::string all;
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double d = table[i].depth * 1e9, sigma = table[i].depth_sigma * 1e9;
      const DepthDataset data = synthetic_depth_dataset(bath_at(d), depth_options(i));
      const DepthFit fit = fit_depth(data);
      const double got = fit.depth * 1e9;
      o.detail << " " << d << "->" << got << "(+-" << fit.depth_sigma * 1e9 << ")";
      o.require(std::abs(got - d) <= sigma, std::to_string(d) + " nm within " + std::to_string(sigma));
      all += digest(data);
    }
    const double dt = seconds_since(t0);
    o.detail << "; " << dt << " s";
    o.require(dt < 30.0, "under 30 s");
    first.depth = sha256_hex(all);
  });

  report(7, "GRAPE", [&](Outcome& o) {
    const auto t0 = Clock::now();
    std::string all;
    for (bool half : {false, true}) {
      const GrapeProblem p = grape_problem(half);
      const GrapeResult r = optimize(p, grape_options());
      const double f = fidelity(p, r.waveform);
      o.detail << (half ? " pi/2 " : " pi ") << f << " (" << r.iterations << " it);";
      o.require(f >= 0.9999, half ? "pi/2 fidelity" : "pi fidelity");
      o.require(r.waveform.max_amplitude() <= p.max_rabi_hz * (1 + 1e-12), "amplitude bound");
      all += digest(r.waveform);
    }
    Philox4x32 rng(kSeed, 7);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const GrapeProblem p = grape_problem(i % 2 == 1);
      boost::random::uniform_real_distribution<double> u(-p.max_rabi_hz / 1.5, p.max_rabi_hz / 1.5);
      Waveform wf;
      wf.piece_duration = p.piece_duration;
      for (std::size_t k = 0; k < p.n_pieces; ++k) {
        wf.real_hz.push_back(u(rng));
        wf.imag_hz.push_back(u(rng));
      }
      worst = std::max(worst, fd_mismatch(p, wf));
    }
    const double dt = seconds_since(t0);
    o.detail << " gradient vs finite differences " << worst << " over 100 waveforms; " << dt << " s";
    o.require(worst <= 1e-5, "gradient within 1e-5");
    o.require(dt < 60.0, "under 60 s");
    first.grape = sha256_hex(all);
  });

  report(8, "protocol simulator", [&](Outcome& o) {
    const auto t0 = Clock::now();
    const ProtocolConfig c = nv3_config();
    const ChargeInitResult ci = simulate_charge_init(c.charge, kChargeTrials, kSeed, 1);
    o.detail << " purity " << ci.purity_without_feedback << " -> " << ci.purity << ";";
    o.require(std::abs(ci.purity_without_feedback - 0.74) <= 0.01, "74% without feedback");
    o.require(ci.purity >= 0.94, "purity >= 94% with feedback");

    const ReadoutStatistics stats = readout_statistics(c.readout);
    const RepetitiveReadoutResult rr =
        simulate_repetitive_readout(c.readout, NuclearState::alternating, kReadoutShots, kSeed, 1);
    o.detail << " readout fidelity " << stats.fidelity << " (MC " << rr.fidelity << ");";
    o.require(std::abs(stats.fidelity - 0.84) <= 0.02, "readout 0.84 +- 0.02");
    o.require(std::abs(rr.fidelity - 0.84) <= 0.02, "simulated readout 0.84 +- 0.02");

    const ExperimentRun run = run_experiment(c, kSignal / c.b_v, kLongShots, kSeed, 1);
    const SensitivityCurve curve =
        sensitivity_from_timeseries(run.outcomes(stats), run.signs(), run.amplitude, c.shot_duration);
    const double t_avg = static_cast<double>(kLongShots) * c.shot_duration;
    double eta_600 = 0.0;
    for (const auto& p : curve.points)
      if (p.time <= 600.0) eta_600 = p.eta;
    o.detail << " eta asymptote " << curve.asymptote * 1e9 << " +- " << curve.asymptote_sigma * 1e9
             << " nT/sqrt(Hz) over " << t_avg << " s (" << eta_600 * 1e9 << " at 600 s), final slope "
             << curve.final_slope << ";";
    o.require(rel(curve.asymptote, 0.59e-9) <= 0.15, "eta within 15% of 0.59 nT/sqrt(Hz)");
    o.require(std::abs(curve.final_slope) <= 0.05, "final-decade slope 0 +- 0.05");

    const auto fringe = fringe_sweep(c, fringe_voltages(c), 2000, kSeed, 1);
    const double dt = seconds_since(t0);
    o.detail << " " << dt << " s";
    o.require(dt < 300.0, "under 5 min");
    first.charge = digest(ci);
    first.readout = digest(rr);
    first.shots = digest(run);
    first.fringe = digest(fringe);
  });

  report(9, "determinism", [&](Outcome& o) {
    const int threads = 4;
    o.require(digest(noise_bundle(noisy_bundle_options())) == first.bundle, "noisy coherence bundle");

    const auto table = read_measured_nv_table(read_csv_file(fs::path(NVMAG_DATA) / "table_s2.csv"));
    std::string all;
    for (std::size_t i = 0; i < table.size(); ++i)
      all += digest(synthetic_depth_dataset(bath_at(table[i].depth * 1e9), depth_options(i)));
    o.require(sha256_hex(all) == first.depth, "depth datasets");

    all.clear();
    for (bool half : {false, true}) all += digest(optimize(grape_problem(half), grape_options()).waveform);
    o.require(sha256_hex(all) == first.grape, "GRAPE waveforms");

    const ProtocolConfig c = nv3_config();
    o.require(digest(simulate_charge_init(c.charge, kChargeTrials, kSeed, threads)) == first.charge,
              "charge initialization");
    o.require(digest(simulate_repetitive_readout(c.readout, NuclearState::alternating, kReadoutShots,
                                                 kSeed, threads)) == first.readout,
              "repetitive readout");
    o.require(digest(run_experiment(c, kSignal / c.b_v, kLongShots, kSeed, threads)) == first.shots,
              "long sensitivity run");
    o.require(digest(fringe_sweep(c, fringe_voltages(c), 2000, kSeed, threads)) == first.fringe,
              "fringe sweep");

    const fs::path root = fs::temp_directory_path() / "nvmag_acceptance";
    fs::remove_all(root);
    const std::string common = "--seed 11 sense --shots 100000 --fringe-shots 500 --write-shots --out ";
    const int a = run_cli("--threads 1 " + common + "\"" + (root / "t1").string() + "\"");
    const int b = run_cli("--threads " + std::to_string(threads) + " " + common + "\"" +
                          (root / "tn").string() + "\"");
    const int d = run_cli("--threads 1 " + common + "\"" + (root / "t1b").string() + "\"");
    o.require(a == 0 && b == 0 && d == 0, "CLI sense runs");
    if (a == 0 && b == 0 && d == 0) {
      const auto h1 = cli_output_hashes(root / "t1");
      o.detail << " CLI sense outputs " << h1.size() << " files;";
      o.require(h1 == cli_output_hashes(root / "tn"), "CLI outputs with 1 vs 4 threads");
      o.require(h1 == cli_output_hashes(root / "t1b"), "CLI outputs on repeat");
    }
    fs::remove_all(root);
    o.detail << " stochastic runs repeated with " << threads << " threads";
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
