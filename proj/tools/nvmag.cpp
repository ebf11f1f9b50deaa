// nvmag: command-line front end.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "nvmag/errors.hpp"
#include "nvmag/io.hpp"
#include "nvmag/manifest.hpp"
#include "nvmag/noise_spect.hpp"
#include "nvmag/nv_depth.hpp"
#include "nvmag/protocol_sim.hpp"
#include "nvmag/pulse_control.hpp"
#include "nvmag/sensitivity.hpp"
#include "nvmag/synthetic.hpp"

namespace fs = std::filesystem;
using namespace nvmag;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string out = ".";
  int threads = 1;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Collects outputs of one command and writes them with the manifest.
class Run {
 public:
  Run(const Globals& g, std::string command, std::vector<std::string> argv) : dir_(g.out) {
    fs::create_directories(dir_);
    m_.command = std::move(command);
    m_.argv = std::move(argv);
    m_.config_path = g.config;
    m_.seed = g.seed;
    m_.threads = g.threads;
    if (!g.config.empty()) m_.add_input(g.config);
  }

  json& parameters() { return m_.parameters; }
  void input(const fs::path& p) { m_.add_input(p); }

  void text(const std::string& name, const std::string& body) {
    write_text_file(dir_ / name, body);
    m_.add_output(dir_ / name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  // Plot data: the CSV itself plus an entry in figures.json.
  void figure(const std::string& name, const std::string& body, const std::string& title,
              json axes) {
    text(name, body);
    figures_.push_back({{"file", name}, {"title", title}, {"axes", std::move(axes)}});
  }

  void finish() {
    if (!figures_.empty()) json_file("figures.json", figures_);
    m_.write(dir_);
  }

 private:
  fs::path dir_;
  RunManifest m_;
  json figures_ = json::array();
};

json axis(const std::string& column, const std::string& unit, const std::string& scale = "linear") {
  return {{"column", column}, {"unit", unit}, {"scale", scale}};
}

json read_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  if (!fs::exists(g.config)) throw UsageError("config file not found: " + g.config);
  return read_json_file(g.config);
}

fs::path sidecar_of(const fs::path& csv) {
  fs::path s = csv;
  s.replace_extension(".json");
  if (!fs::exists(s)) throw UsageError("missing sidecar " + s.string());
  return s;
}

// depth -----------------------------------------------------------------

struct DepthArgs {
  std::string input;
};

void cmd_depth(const Globals& g, const DepthArgs& a, const std::vector<std::string>& argv) {
  if (!fs::exists(a.input)) throw UsageError("input not found: " + a.input);
  const fs::path side = sidecar_of(a.input);
  const DepthDataset data = read_depth_dataset(read_csv_file(a.input), read_json_file(side));
  const DepthFit fit = fit_depth(data);

  Run run(g, "depth", argv);
  run.input(a.input);
  run.input(side);

  ProtonBathModel model;
  model.rho = data.rho;
  model.b0 = data.b0;
  model.depth = fit.depth;
  model.t2n_star = 1.0 / fit.line_width;
  std::ostringstream csv;
  csv << "tau_s,coherence,sigma,model\n";
  for (const auto& p : data.points)
    csv << format_double(p.tau) << ',' << format_double(p.coherence) << ',' << format_double(p.sigma)
        << ',' << format_double(proton_coherence(model, data.sequence_at(p.tau))) << '\n';

  json report = to_json(fit);
  report["sequence"] = to_string(data.family) + "-" + std::to_string(data.n_pulses);
  report["b0_tesla"] = data.b0;
  report["rho_per_nm3"] = data.rho * 1e-27;
  report["sample"] = data.sample;
  run.json_file("depth_report.json", report);
  run.figure("depth_fit.csv", csv.str(), "proton NMR dip and fitted model",
             {{"x", axis("tau_s", "s")}, {"y", {axis("coherence", "1"), axis("model", "1")}}});
  run.finish();
  std::cout << "depth " << fit.depth * 1e9 << " +- " << fit.depth_sigma * 1e9 << " nm\n";
}

// noise -----------------------------------------------------------------

struct NoiseArgs {
  std::string dir;
  int iterations = 1;
  double l_eff_nm = 31.7;
  double t1 = 0.0;
  bool half_rate = false;
  bool offset = false;
};

void cmd_noise(const Globals& g, const NoiseArgs& a, const std::vector<std::string>& argv) {
  if (!fs::is_directory(a.dir)) throw UsageError("not a directory: " + a.dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no coherence CSV files in " + a.dir);

  Run run(g, "noise", argv);
  std::vector<CoherenceCurve> curves;
  for (const auto& f : files) {
    CoherenceCurve c = load_coherence_curve(f);
    if (a.t1 > 0.0) c = deduct_t1(c, a.t1, a.half_rate ? T1Envelope::half_rate : T1Envelope::exponential);
    curves.push_back(std::move(c));
    run.input(f);
    run.input(sidecar_of(f));
  }

  const NoiseSpectrum zeroth = spectrum_zeroth(curves);
  IterationOptions io;
  io.max_iterations = std::max(a.iterations, 0);
  IterationResult it;
  it.spectrum = zeroth;
  if (a.iterations > 0) it = spectrum_iterate(zeroth, io);

  std::ostringstream zcsv, scsv;
  write_spectrum_csv(zcsv, zeroth);
  write_spectrum_csv(scsv, it.spectrum);
  const json spectrum_axes = {{"x", axis("omega_rad_s", "rad/s", "log")},
                              {"y", {axis("s_t2_per_hz", "T^2/Hz", "log")}}};
  run.figure("spectrum_zeroth.csv", zcsv.str(), "zeroth-order noise spectrum", spectrum_axes);
  run.figure("spectrum.csv", scsv.str(), "iterated noise spectrum", spectrum_axes);

  json lor;
  try {
    LorentzianFitOptions lo;
    lo.with_offset = a.offset;
    lor = to_json(fit_lorentzian(it.spectrum, lo));
  } catch (const Error& e) {
    lor = {{"error", e.what()}};
  }
  run.json_file("lorentzian.json", lor);

  json cmp;
  try {
    const ErlLineComparison c = compare_to_erl_line(it.spectrum, a.l_eff_nm * 1e-9);
    cmp = {{"l_eff_m", a.l_eff_nm * 1e-9}, {"erl_line_t2_per_hz", c.line}, {"plateau_t2_per_hz", c.plateau},
           {"db_below", c.db_below}, {"points", c.points}};
  } catch (const Error& e) {
    cmp = {{"l_eff_m", a.l_eff_nm * 1e-9}, {"erl_line_t2_per_hz", erl_noise_line(a.l_eff_nm * 1e-9)},
           {"error", e.what()}};
  }
  cmp["iterations"] = it.iterations;
  cmp["converged"] = it.converged;
  cmp["extrapolated"] = it.extrapolated;
  cmp["clipped"] = it.clipped;
  cmp["changes"] = it.changes;
  run.json_file("erl_comparison.json", cmp);
  run.parameters() = {{"iterations", a.iterations}, {"t1_s", a.t1}, {"l_eff_nm", a.l_eff_nm}};
  run.finish();
  std::cout << "spectrum points " << it.spectrum.size() << ", iterations " << it.iterations << '\n';
  if (cmp.contains("db_below")) std::cout << "plateau " << cmp["db_below"].get<double>() << " dB below ERL line\n";
}

// grape -----------------------------------------------------------------

struct GrapeArgs {
  std::string target;
  int pieces = 0;
  double piece_ns = 0.0;
  double max_rabi_mhz = 0.0;
  std::size_t max_iterations = 2000;
};

void cmd_grape(const Globals& g, const GrapeArgs& a, const std::vector<std::string>& argv) {
  json cfg = read_config(g);
  if (!a.target.empty()) cfg["target"] = a.target;
  if (a.pieces > 0) cfg["n_pieces"] = a.pieces;
  if (a.piece_ns > 0.0) cfg["piece_duration_s"] = a.piece_ns * 1e-9;
  if (a.max_rabi_mhz > 0.0) cfg["max_rabi_hz"] = a.max_rabi_mhz * 1e6;
  const GrapeProblem problem = grape_problem_from_json(cfg);
  GrapeOptions opt;
  opt.seed = g.seed;
  opt.max_iterations = a.max_iterations;
  const GrapeResult r = optimize(problem, opt);
  const double verified = fidelity(problem, r.waveform);

  Run run(g, "grape", argv);
  std::ostringstream wf, tr;
  write_waveform_csv(wf, r.waveform);
  tr << "step,fidelity\n";
  for (std::size_t i = 0; i < r.trace.size(); ++i) tr << i << ',' << format_double(r.trace[i]) << '\n';
  run.text("waveform.csv", wf.str());
  run.figure("fidelity_trace.csv", tr.str(), "GRAPE fidelity per accepted step",
             {{"x", axis("step", "1")}, {"y", {axis("fidelity", "1")}}});
  json report = {{"problem", to_json(problem)},
                 {"target", cfg.value("target", std::string("pi"))},
                 {"fidelity", r.fidelity},
                 {"verified_fidelity", verified},
                 {"iterations", r.iterations},
                 {"converged", r.converged},
                 {"best_effort", !r.converged},
                 {"max_amplitude_hz", r.waveform.max_amplitude()}};
  run.json_file("grape_report.json", report);
  run.finish();
  std::cout << "fidelity " << verified << (r.converged ? "" : " (best effort, not converged)") << '\n';
}

// sense -----------------------------------------------------------------

struct SenseArgs {
  std::size_t shots = 200000;
  double amplitude_nt = 0.5;
  int fringe_points = 41;
  std::size_t fringe_shots = 2000;
  double fringe_periods = 2.0;
  bool write_shots = false;
};

void cmd_sense(const Globals& g, const SenseArgs& a, const std::vector<std::string>& argv) {
  const json cfg = read_config(g);
  const ProtocolConfig config = g.config.empty() ? nv3_config() : protocol_config_from_json(cfg);
  if (a.shots < 100) throw UsageError("--shots must be at least 100");
  if (a.fringe_points < 4) throw UsageError("--fringe-points must be at least 4");
  Run run(g, "sense", argv);
  run.parameters() = {{"shots", a.shots},
                      {"amplitude_nt", a.amplitude_nt},
                      {"fringe_points", a.fringe_points},
                      {"fringe_shots", a.fringe_shots},
                      {"protocol", to_json(config)}};

  const double t_c = config.sequence.total_time;
  const double k_per_volt = std::abs(config.phase_per_tesla() * config.b_v);
  const double v_max = k_per_volt > 0.0 ? a.fringe_periods * constants::pi / k_per_volt : 1.0;
  std::vector<double> volts;
  for (int i = 0; i < a.fringe_points; ++i) volts.push_back(-v_max + 2.0 * v_max * i / (a.fringe_points - 1));
  const auto fringe = fringe_sweep(config, volts, a.fringe_shots, g.seed, g.threads);

  json fringe_fit;
  FringeFit ff;
  bool have_fit = false;
  try {
    ff = fit_fringe(fringe, t_c);
    fringe_fit = to_json(ff);
    have_fit = true;
  } catch (const Error& e) {
    fringe_fit = {{"error", e.what()}, {"flat", true}};
  }
  std::ostringstream fcsv;
  fcsv << "voltage_v,counts,sigma,fit\n";
  for (const auto& p : fringe) {
    const double model = have_fit ? ff.a * std::sin(constants::gamma_e * t_c * ff.b_v * p.voltage + ff.phi) + ff.c_offset
                                  : std::nan("");
    fcsv << format_double(p.voltage) << ',' << format_double(p.counts) << ','
         << format_double(std::sqrt(std::max(p.counts, 1.0))) << ',' << (have_fit ? format_double(model) : "") << '\n';
  }
  run.figure("fringe.csv", fcsv.str(), "Ramsey-type fringe versus coil voltage",
             {{"x", axis("voltage_v", "V")}, {"y", {axis("counts", "photons"), axis("fit", "photons")}}});

  const ReadoutStatistics stats = readout_statistics(config.readout);
  SensitivityBudget budget;
  budget.t_c = t_c;
  budget.coherence = config.coherence();
  budget.f_i = config.charge.init_fidelity();
  budget.f_r = stats.fisher_contrast;
  budget.t_ir = config.shot_duration - t_c;
  json bj = to_json(budget);
  bj["eta_t_per_sqrt_hz"] = eta_from_budget(budget);
  bj["readout_fidelity"] = stats.fidelity;
  bj["charge_purity"] = config.charge.purity();

  std::vector<int> n_ro;
  for (int n = 250; n <= 5000; n += 250) n_ro.push_back(n);
  const BudgetModels models = budget_models(config, n_ro);
  BudgetGrid grid;
  for (int i = 1; i <= 40; ++i) grid.t_c.push_back(0.1e-3 * i);
  for (int n = 10; n <= 200; n += 10) grid.n_feedback.push_back(n);
  grid.n_readout = n_ro;
  const BudgetOptimum opt = optimize_budget(models, grid);
  bj["optimum"] = {{"t_c_s", opt.t_c}, {"n_feedback", opt.n_feedback}, {"n_readout", opt.n_readout},
                   {"eta_t_per_sqrt_hz", opt.eta}};

  json sens;
  if (config.b_v != 0.0 && a.amplitude_nt > 0.0) {
    const double voltage = a.amplitude_nt * 1e-9 / config.b_v;
    const ExperimentRun er = run_experiment(config, voltage, a.shots, g.seed, g.threads);
    if (a.write_shots) {
      std::ostringstream s;
      write_shots_csv(s, er);
      run.text("shots.csv", s.str());
    }
    try {
      const SensitivityCurve curve =
          sensitivity_from_timeseries(er.outcomes(stats), er.signs(), er.amplitude, config.shot_duration);
      std::ostringstream e;
      e << "time_s,snr,eta_t_per_sqrt_hz\n";
      for (const auto& p : curve.points)
        e << format_double(p.time) << ',' << format_double(p.snr) << ',' << format_double(p.eta) << '\n';
      run.figure("eta_vs_time.csv", e.str(), "sensitivity versus averaging time",
                 {{"x", axis("time_s", "s", "log")}, {"y", {axis("eta_t_per_sqrt_hz", "T/sqrt(Hz)", "log")}}});
      sens = {{"asymptote_t_per_sqrt_hz", curve.asymptote},
              {"asymptote_sigma", curve.asymptote_sigma},
              {"final_slope", curve.final_slope},
              {"averaging_time_s", a.shots * config.shot_duration}};
    } catch (const Error& e) {
      sens = {{"error", e.what()}};
    }
  } else {
    sens = {{"error", "no signal: b_v or amplitude is zero"}};
  }

  run.json_file("budget.json", bj);
  run.json_file("sense_report.json", {{"fringe_fit", fringe_fit},
                                      {"configured_b_v_t_per_v", config.b_v},
                                      {"sensitivity", sens},
                                      {"budget_eta_t_per_sqrt_hz", bj["eta_t_per_sqrt_hz"]}});
  run.finish();
  std::cout << "budget eta " << bj["eta_t_per_sqrt_hz"].get<double>() * 1e9 << " nT/sqrt(Hz)\n";
  if (sens.contains("asymptote_t_per_sqrt_hz"))
    std::cout << "simulated eta " << sens["asymptote_t_per_sqrt_hz"].get<double>() * 1e9 << " nT/sqrt(Hz)\n";
  if (have_fit) std::cout << "fringe B_V " << ff.b_v * 1e9 << " nT/V\n";
}

// erl -------------------------------------------------------------------

struct ErlArgs {
  std::string table;
  double eta_nt = 0.59;
  double l_eff_nm = 31.7;
  double tolerance = 0.1;
};

int cmd_erl(const Globals& g, const ErlArgs& a, const std::vector<std::string>& argv) {
  if (!fs::exists(a.table)) throw UsageError("table not found: " + a.table);
  const auto records = read_magnetometer_table(read_csv_file(a.table));
  const ErlCheckReport rep = erl_table_check(records, a.tolerance);
  Run run(g, "erl", argv);
  run.input(a.table);

  json rows = json::array();
  std::ostringstream sc;
  sc << "l_eff_m,e_r_hbar,kind\n";
  for (const auto& r : rep.rows) {
    rows.push_back({{"kind", r.record.kind},
                    {"ref", r.record.reference},
                    {"l_eff_m", r.record.l_eff},
                    {"eta_t_per_sqrt_hz", r.record.eta},
                    {"stored_e_r_hbar", r.record.e_r},
                    {"recomputed_e_r_hbar", r.recomputed},
                    {"relative_deviation", r.relative_deviation},
                    {"db_below_erl", num(r.db_below)},
                    {"within_tolerance", r.within_tolerance},
                    {"flag", r.flag}});
    sc << format_double(r.record.l_eff) << ',' << format_double(r.recomputed) << ',' << r.record.kind << '\n';
  }
  const double e_nv = erl_compute(a.eta_nt * 1e-9, a.l_eff_nm * 1e-9);
  sc << format_double(a.l_eff_nm * 1e-9) << ',' << format_double(e_nv) << ",NV measured\n";
  run.figure("erl_scatter.csv", sc.str(), "energy resolution per bandwidth versus effective length",
             {{"x", axis("l_eff_m", "m", "log")}, {"y", {axis("e_r_hbar", "hbar", "log")}}});
  run.json_file("erl_report.json", {{"tolerance", rep.tolerance},
                                    {"failures", rep.failures},
                                    {"rows", rows},
                                    {"measured_nv",
                                     {{"eta_t_per_sqrt_hz", a.eta_nt * 1e-9},
                                      {"l_eff_m", a.l_eff_nm * 1e-9},
                                      {"e_r_hbar", e_nv},
                                      {"db_below_erl", db_below_erl(e_nv)}}}});
  run.parameters() = {{"tolerance", a.tolerance}, {"eta_nt", a.eta_nt}, {"l_eff_nm", a.l_eff_nm}};
  run.finish();
  std::cout << rep.rows.size() - rep.failures << "/" << rep.rows.size() << " rows within "
            << a.tolerance * 100 << "%; measured NV " << e_nv << " hbar, " << db_below_erl(e_nv)
            << " dB below\n";
  return rep.failures > 0 ? static_cast<int>(ExitCode::data) : 0;
}

// gen -------------------------------------------------------------------

struct GenDepthArgs {
  double depth_nm = 31.7;
  std::string sample = "glycerine";
  double b0 = 0.0235;
  double noise = 0.01;
  int points = 61;
  double t2n_us = 200.0;
  std::string name = "depth";
};

void cmd_gen_depth(const Globals& g, const GenDepthArgs& a, const std::vector<std::string>& argv) {
  ProtonBathModel m;
  if (a.sample == "glycerine") m.rho = glycerine_rho_per_nm3 * 1e27;
  else if (a.sample == "oil") m.rho = immersion_oil_rho_per_nm3 * 1e27;
  else throw UsageError("--sample must be glycerine or oil");
  m.depth = a.depth_nm * 1e-9;
  m.b0 = a.b0;
  m.t2n_star = a.t2n_us * 1e-6;
  SyntheticDepthOptions o;
  o.noise_sigma = a.noise;
  o.n_points = a.points;
  o.seed = g.seed;
  DepthDataset d = synthetic_depth_dataset(m, o);
  d.sample = a.sample;
  Run run(g, "gen depth", argv);
  std::ostringstream csv;
  write_depth_csv(csv, d);
  run.figure(a.name + ".csv", csv.str(), "synthetic proton NMR dip",
             {{"x", axis("tau_s", "s")}, {"y", {axis("coherence", "1")}}});
  run.json_file(a.name + ".json", depth_sidecar(d));
  run.parameters() = {{"depth_nm", a.depth_nm}, {"sample", a.sample}, {"b0_tesla", a.b0},
                      {"noise_sigma", a.noise}, {"points", a.points}, {"t2n_star_s", m.t2n_star}};
  run.finish();
  std::cout << "wrote " << d.points.size() << " points, " << to_string(d.family) << "-" << d.n_pulses << '\n';
}

struct GenNoiseArgs {
  std::string kind = "lorentzian";
  double amplitude = 1e-19;
  double width_mhz = 1.0;
  double db = 21.6;
  double l_eff_nm = 31.7;
  std::vector<int> n_pulses{16, 64, 128, 512};
  int points = 12;
  double noise = 0.0;
};

void cmd_gen_noise(const Globals& g, const GenNoiseArgs& a, const std::vector<std::string>& argv) {
  NoiseBundleOptions o;
  if (a.kind == "lorentzian") o.spectrum = {a.amplitude, 0.0, constants::two_pi * a.width_mhz * 1e6, 0.0};
  else if (a.kind == "erl") o.spectrum = erl_calibrated_spectrum(a.db, a.l_eff_nm * 1e-9);
  else throw UsageError("--kind must be lorentzian or erl");
  o.n_pulses = a.n_pulses;
  o.points_per_curve = a.points;
  o.noise_sigma = a.noise;
  o.seed = g.seed;
  const auto curves = noise_bundle(o);
  Run run(g, "gen noise", argv);
  for (const auto& c : curves) {
    const std::string stem = to_string(c.family) + "_" + std::to_string(c.n_pulses);
    std::ostringstream csv;
    write_coherence_csv(csv, c);
    run.text(stem + ".csv", csv.str());
    run.json_file(stem + ".json", coherence_sidecar(c));
  }
  const json truth = {{"amplitude_t2_per_hz", o.spectrum.amplitude},
                      {"center_rad_s", o.spectrum.center},
                      {"width_hwhm_rad_s", o.spectrum.width},
                      {"offset_t2_per_hz", o.spectrum.offset}};
  run.parameters() = {{"kind", a.kind}, {"spectrum", truth}, {"n_pulses", a.n_pulses},
                      {"points", a.points}, {"noise_sigma", a.noise}};
  run.finish();
  std::cout << "wrote " << curves.size() << " curves\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App app{"nvmag: NV-centre magnetometry toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 1024));

  DepthArgs da;
  auto* depth = app.add_subcommand("depth", "fit NV depth to a proton NMR dataset");
  depth->add_option("input", da.input, "dataset CSV (sidecar: same name, .json)")->required();

  NoiseArgs na;
  auto* noise = app.add_subcommand("noise", "noise spectrum from DD coherence curves");
  noise->add_option("dir", na.dir, "directory of coherence CSVs with sidecars")->required();
  noise->add_option("--iterations", na.iterations, "spectrum iterations")->check(CLI::Range(0, 100));
  noise->add_option("--l-eff-nm", na.l_eff_nm, "effective length for the ERL line");
  noise->add_option("--t1", na.t1, "T1 (s) to divide out; 0 disables");
  noise->add_flag("--t1-half-rate", na.half_rate, "use exp(-t/2T1)");
  noise->add_flag("--offset", na.offset, "fit a constant offset");

  GrapeArgs ga;
  auto* grape = app.add_subcommand("grape", "optimal-control pulse (problem from --config)");
  grape->add_option("--target", ga.target, "pi or half_pi");
  grape->add_option("--pieces", ga.pieces, "number of pieces");
  grape->add_option("--piece-ns", ga.piece_ns, "piece duration, ns");
  grape->add_option("--max-rabi-mhz", ga.max_rabi_mhz, "amplitude bound, MHz");
  grape->add_option("--max-iterations", ga.max_iterations, "iterations per start");

  SenseArgs sa;
  auto* sense = app.add_subcommand("sense", "simulate the protocol (config from --config)");
  sense->add_option("--shots", sa.shots, "shots in the time series");
  sense->add_option("--amplitude-nt", sa.amplitude_nt, "signal amplitude, nT");
  sense->add_option("--fringe-points", sa.fringe_points, "voltages in the fringe sweep");
  sense->add_option("--fringe-shots", sa.fringe_shots, "shots per fringe voltage");
  sense->add_option("--fringe-periods", sa.fringe_periods, "fringe periods covered");
  sense->add_flag("--write-shots", sa.write_shots, "also write every shot");

  ErlArgs ea;
  auto* erl = app.add_subcommand("erl", "energy-resolution benchmark of a magnetometer table");
  erl->add_option("table", ea.table, "table CSV")->required();
  erl->add_option("--eta-nt", ea.eta_nt, "measured NV sensitivity, nT/sqrt(Hz)");
  erl->add_option("--l-eff-nm", ea.l_eff_nm, "measured NV effective length, nm");
  erl->add_option("--tolerance", ea.tolerance, "relative tolerance");

  auto* gen = app.add_subcommand("gen", "synthetic datasets");
  gen->require_subcommand(1);
  GenDepthArgs gd;
  auto* gdepth = gen->add_subcommand("depth", "proton NMR dataset with sidecar");
  gdepth->add_option("--depth-nm", gd.depth_nm);
  gdepth->add_option("--sample", gd.sample, "glycerine or oil");
  gdepth->add_option("--b0", gd.b0, "applied field, T");
  gdepth->add_option("--noise", gd.noise, "Gaussian noise sigma");
  gdepth->add_option("--points", gd.points);
  gdepth->add_option("--t2n-us", gd.t2n_us, "proton T2*, us");
  gdepth->add_option("--name", gd.name, "file stem");
  GenNoiseArgs gn;
  auto* gnoise = gen->add_subcommand("noise", "coherence-curve bundle from a Lorentzian spectrum");
  gnoise->add_option("--kind", gn.kind, "lorentzian or erl");
  gnoise->add_option("--amplitude", gn.amplitude, "T^2/Hz");
  gnoise->add_option("--width-mhz", gn.width_mhz, "HWHM, MHz");
  gnoise->add_option("--db", gn.db, "dB below the ERL line (kind erl)");
  gnoise->add_option("--l-eff-nm", gn.l_eff_nm);
  gnoise->add_option("--n", gn.n_pulses, "pulse numbers")->delimiter(',');
  gnoise->add_option("--points", gn.points, "points per curve");
  gnoise->add_option("--noise", gn.noise, "Gaussian noise sigma");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (*depth) cmd_depth(g, da, args);
    else if (*noise) cmd_noise(g, na, args);
    else if (*grape) cmd_grape(g, ga, args);
    else if (*sense) cmd_sense(g, sa, args);
    else if (*erl) return cmd_erl(g, ea, args);
    else if (*gdepth) cmd_gen_depth(g, gd, args);
    else if (*gnoise) cmd_gen_noise(g, gn, args);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numerical);
  }
}
