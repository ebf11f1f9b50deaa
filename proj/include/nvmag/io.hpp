#pragma once

// File formats: CSV tables with a mandatory header row, JSON sidecars and
// configuration documents.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "nvmag/dd_filter.hpp"
#include "nvmag/noise_spect.hpp"
#include "nvmag/nv_depth.hpp"
#include "nvmag/protocol_sim.hpp"
#include "nvmag/pulse_control.hpp"
#include "nvmag/sensitivity.hpp"

namespace nvmag {

using json = nlohmann::json;

// Shortest representation that parses back to the same double.
std::string format_double(double v);
// Whole-string parse; throws DataError otherwise.
double parse_double(const std::string& s);
int parse_int(const std::string& s);

struct CsvTable {
  std::vector<std::string> comments;  // '#' lines without the marker
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DataError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

// Plain comma-separated values, no quoting. Blank lines are skipped.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Coherence curves: CSV time_s, coherence, sigma; sidecar {family, N}.
void write_coherence_csv(std::ostream& out, const CoherenceCurve& curve);
json coherence_sidecar(const CoherenceCurve& curve);
CoherenceCurve read_coherence_curve(const CsvTable& table, const json& sidecar);
// Loads name.csv with its name.json sidecar. A missing sidecar is a usage error.
CoherenceCurve load_coherence_curve(const std::filesystem::path& csv_path);

// Spectrum: CSV omega_rad_s, s_t2_per_hz.
void write_spectrum_csv(std::ostream& out, const NoiseSpectrum& spectrum);
NoiseSpectrum read_spectrum_csv(const CsvTable& table);
json to_json(const LorentzianFit& fit);

// Magnetometer table: kind, l_eff_m, eta_t_per_sqrt_hz, ref, e_r_hbar.
std::vector<MagnetometerRecord> read_magnetometer_table(const CsvTable& table);
void write_magnetometer_table(std::ostream& out, const std::vector<MagnetometerRecord>& records);

struct MeasuredNV {
  int number = 0;
  std::string sequence;  // e.g. "XY16-512"
  double t_c = 0.0;      // s
  int readout_cycles = 0;
  double total_time = 0.0;  // s
  double depth = 0.0;       // m
  double depth_sigma = 0.0;
  double eta = 0.0;  // T/sqrt(Hz)
  double e_r = 0.0;  // hbar
};

// Per-NV parameters: no, sequence, t_c_s, readout_cycles, total_time_s,
// depth_nm, depth_sigma_nm, eta_nt_per_sqrt_hz, e_r_hbar.
std::vector<MeasuredNV> read_measured_nv_table(const CsvTable& table);

// Depth datasets: CSV tau_s, coherence, sigma; sidecar
// {sequence, N, b0_tesla, sample, rho_per_nm3}.
void write_depth_csv(std::ostream& out, const DepthDataset& data);
json depth_sidecar(const DepthDataset& data);
DepthDataset read_depth_dataset(const CsvTable& table, const json& sidecar);
json to_json(const DepthFit& fit);

json to_json(const SensitivityBudget& budget);
SensitivityBudget budget_from_json(const json& j);
json to_json(const FringeFit& fit);

json to_json(const ProtocolConfig& config);
// Missing keys keep their defaults; wrong types raise ConfigError.
ProtocolConfig protocol_config_from_json(const json& j);

json to_json(const GrapeProblem& problem);
// {"target": "pi" | "half_pi", "n_pieces", "piece_duration_s", "max_rabi_hz",
//  "ensemble": "hyperfine" | "none" | [{"detuning_hz", "amplitude_scale", "weight"}]}
GrapeProblem grape_problem_from_json(const json& j);

// Shot-level CSV of a run.
void write_shots_csv(std::ostream& out, const ExperimentRun& run);

}  // namespace nvmag
