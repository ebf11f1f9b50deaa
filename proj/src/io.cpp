#include "nvmag/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Reads j[key] into value when present; type mismatches become ConfigError.
template <class T>
void read_opt(const json& j, const char* key, T& value) {
  if (!j.is_object() || !j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.is_object() || !j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return j.at(key);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != last) throw DataError("bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  const std::string t = trim(s);
  int v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw DataError("bad integer '" + s + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("CSV column '" + name + "' missing");
  return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  return parse_double(rows.at(row).at(column(name)));
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(trim(line.substr(1)));
      continue;
    }
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw DataError("CSV is empty (no header row)");
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_coherence_csv(std::ostream& out, const CoherenceCurve& curve) {
  out << "time_s,coherence,sigma\n";
  for (const auto& p : curve.points)
    out << format_double(p.time) << ',' << format_double(p.coherence) << ',' << format_double(p.sigma) << '\n';
}

json coherence_sidecar(const CoherenceCurve& curve) {
  return json{{"family", to_string(curve.family)}, {"N", curve.n_pulses}};
}

CoherenceCurve read_coherence_curve(const CsvTable& table, const json& sidecar) {
  CoherenceCurve curve;
  if (!sidecar.is_object() || !sidecar.contains("family") || !sidecar.contains("N"))
    throw DataError("coherence sidecar needs 'family' and 'N'");
  try {
    curve.family = parse_dd_family(sidecar.at("family").get<std::string>());
    curve.n_pulses = sidecar.at("N").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("coherence sidecar: ") + e.what());
  }
  if (table.rows.empty()) throw DataError("coherence CSV has no data rows");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    curve.points.push_back(
        {table.number(i, "time_s"), table.number(i, "coherence"), table.number(i, "sigma")});
  }
  curve.validate();
  curve.sequence_at(curve.points.front().time);
  return curve;
}

CoherenceCurve load_coherence_curve(const std::filesystem::path& csv_path) {
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  if (!std::filesystem::exists(sidecar))
    throw UsageError("missing sidecar " + sidecar.string() + " for " + csv_path.string());
  return read_coherence_curve(read_csv_file(csv_path), read_json_file(sidecar));
}

void write_spectrum_csv(std::ostream& out, const NoiseSpectrum& spectrum) {
  out << "omega_rad_s,s_t2_per_hz\n";
  for (std::size_t i = 0; i < spectrum.size(); ++i)
    out << format_double(spectrum.omega()[i]) << ',' << format_double(spectrum.values()[i]) << '\n';
}

NoiseSpectrum read_spectrum_csv(const CsvTable& table) {
  std::vector<double> w, s;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    w.push_back(table.number(i, "omega_rad_s"));
    s.push_back(table.number(i, "s_t2_per_hz"));
  }
  if (w.empty()) throw DataError("spectrum CSV has no data rows");
  return NoiseSpectrum(std::move(w), std::move(s));
}

json to_json(const LorentzianFit& fit) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"amplitude_t2_per_hz", fit.params.amplitude},
              {"amplitude_sigma", num(fit.amplitude_sigma)},
              {"center_rad_s", fit.params.center},
              {"center_sigma", num(fit.center_sigma)},
              {"width_hwhm_rad_s", num(fit.params.width)},
              {"width_sigma", num(fit.width_sigma)},
              {"offset_t2_per_hz", fit.params.offset},
              {"offset_sigma", num(fit.offset_sigma)},
              {"width_unbounded", fit.width_unbounded},
              {"log_residual_norm", fit.residual_norm}};
}

std::vector<MagnetometerRecord> read_magnetometer_table(const CsvTable& table) {
  if (table.rows.empty()) throw DataError("magnetometer table has no rows");
  std::vector<MagnetometerRecord> out;
  const std::size_t kind = table.column("kind");
  const std::size_t ref = table.column("ref");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    MagnetometerRecord r;
    r.kind = table.rows[i][kind];
    r.reference = table.rows[i][ref];
    r.l_eff = table.number(i, "l_eff_m");
    r.eta = table.number(i, "eta_t_per_sqrt_hz");
    r.e_r = table.number(i, "e_r_hbar");
    if (!(r.l_eff > 0.0) || !(r.eta >= 0.0) || !std::isfinite(r.l_eff) || !std::isfinite(r.eta))
      throw DataError("magnetometer row " + std::to_string(i + 1) + " has invalid l_eff or eta");
    out.push_back(std::move(r));
  }
  return out;
}

void write_magnetometer_table(std::ostream& out, const std::vector<MagnetometerRecord>& records) {
  out << "kind,l_eff_m,eta_t_per_sqrt_hz,ref,e_r_hbar\n";
  for (const auto& r : records)
    out << r.kind << ',' << format_double(r.l_eff) << ',' << format_double(r.eta) << ',' << r.reference
        << ',' << format_double(r.e_r) << '\n';
}

std::vector<MeasuredNV> read_measured_nv_table(const CsvTable& table) {
  if (table.rows.empty()) throw DataError("NV table has no rows");
  std::vector<MeasuredNV> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    MeasuredNV r;
    r.number = parse_int(table.rows[i][table.column("no")]);
    r.sequence = table.rows[i][table.column("sequence")];
    r.t_c = table.number(i, "t_c_s");
    r.readout_cycles = parse_int(table.rows[i][table.column("readout_cycles")]);
    r.total_time = table.number(i, "total_time_s");
    r.depth = table.number(i, "depth_nm") * 1e-9;
    r.depth_sigma = table.number(i, "depth_sigma_nm") * 1e-9;
    r.eta = table.number(i, "eta_nt_per_sqrt_hz") * 1e-9;
    r.e_r = table.number(i, "e_r_hbar");
    out.push_back(std::move(r));
  }
  return out;
}

void write_depth_csv(std::ostream& out, const DepthDataset& data) {
  out << "tau_s,coherence,sigma\n";
  for (const auto& p : data.points)
    out << format_double(p.tau) << ',' << format_double(p.coherence) << ',' << format_double(p.sigma) << '\n';
}

json depth_sidecar(const DepthDataset& data) {
  return json{{"sequence", to_string(data.family)},
              {"N", data.n_pulses},
              {"b0_tesla", data.b0},
              {"sample", data.sample},
              {"rho_per_nm3", data.rho * 1e-27}};
}

DepthDataset read_depth_dataset(const CsvTable& table, const json& sidecar) {
  DepthDataset data;
  try {
    data.family = parse_dd_family(sidecar.at("sequence").get<std::string>());
    data.n_pulses = sidecar.at("N").get<int>();
    data.b0 = sidecar.at("b0_tesla").get<double>();
    data.sample = sidecar.value("sample", std::string("glycerine"));
    if (sidecar.contains("rho_per_nm3")) {
      data.rho = sidecar.at("rho_per_nm3").get<double>() * 1e27;
    } else if (data.sample == "glycerine") {
      data.rho = glycerine_rho_per_nm3 * 1e27;
    } else if (data.sample == "oil") {
      data.rho = immersion_oil_rho_per_nm3 * 1e27;
    } else {
      throw DataError("unknown sample '" + data.sample + "' and no rho_per_nm3");
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("depth sidecar: ") + e.what());
  }
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    data.points.push_back({table.number(i, "tau_s"), table.number(i, "coherence"), table.number(i, "sigma")});
  data.validate();
  return data;
}

json to_json(const DepthFit& fit) {
  return json{{"depth_m", fit.depth},
              {"depth_sigma_m", fit.depth_sigma},
              {"depth_nm", fit.depth * 1e9},
              {"depth_sigma_nm", fit.depth_sigma * 1e9},
              {"line_width_rad_s", fit.line_width},
              {"line_width_sigma_rad_s", fit.line_width_sigma},
              {"residual_norm", fit.residual_norm},
              {"n_points", fit.n_points}};
}

json to_json(const SensitivityBudget& b) {
  return json{{"t_c_s", b.t_c},   {"coherence", b.coherence}, {"f_i", b.f_i},
              {"f_r", b.f_r},     {"t_ir_s", b.t_ir},         {"gamma_e_rad_per_s_t", b.gamma_e}};
}

SensitivityBudget budget_from_json(const json& j) {
  SensitivityBudget b;
  read_opt(j, "t_c_s", b.t_c);
  read_opt(j, "coherence", b.coherence);
  read_opt(j, "f_i", b.f_i);
  read_opt(j, "f_r", b.f_r);
  read_opt(j, "t_ir_s", b.t_ir);
  read_opt(j, "gamma_e_rad_per_s_t", b.gamma_e);
  if (j.is_object() && j.contains("t2_s") && !j.contains("coherence")) {
    double t2 = 0.0, stretch = 1.0;
    read_opt(j, "t2_s", t2);
    read_opt(j, "stretch", stretch);
    b.coherence = stretched_coherence(b.t_c, t2, stretch);
  }
  if (j.is_object() && j.contains("total_time_s") && !j.contains("t_ir_s")) {
    double total = 0.0;
    read_opt(j, "total_time_s", total);
    b.t_ir = total - b.t_c;
  }
  b.validate();
  return b;
}

json to_json(const FringeFit& f) {
  return json{{"a_counts", f.a},          {"a_sigma", f.a_sigma},         {"c_counts", f.c_offset},
              {"c_sigma", f.c_sigma},     {"b_v_t_per_v", f.b_v},         {"b_v_sigma", f.b_v_sigma},
              {"phi_rad", f.phi},         {"phi_sigma", f.phi_sigma},     {"t_s", f.t},
              {"residual_norm", f.residual_norm}};
}

json to_json(const ProtocolConfig& c) {
  return json{
      {"sequence",
       {{"family", to_string(c.sequence.family)},
        {"n_pulses", c.sequence.n_pulses},
        {"total_time_s", c.sequence.total_time}}},
      {"coherence", {{"t2_s", c.t2}, {"stretch", c.stretch}}},
      {"charge",
       {{"mean_minus", c.charge.mean_minus},
        {"mean_zero", c.charge.mean_zero},
        {"window_s", c.charge.window},
        {"mixing_s", c.charge.mixing},
        {"equilibrium", c.charge.equilibrium},
        {"max_cycles", c.charge.max_cycles},
        {"threshold", c.charge.threshold}}},
      {"readout",
       {{"mean_bright", c.readout.mean_bright},
        {"mean_dark", c.readout.mean_dark},
        {"flip_probability", c.readout.flip_probability},
        {"cycle_duration_s", c.readout.cycle_duration},
        {"n_cycles", c.readout.n_cycles}}},
      {"shot_duration_s", c.shot_duration},
      {"b_v_t_per_v", c.b_v},
      {"signal",
       {{"shape", c.shape == SignalShape::square ? "square" : "sine"},
        {"phase_offset_rad", c.phase_offset}}}};
}

ProtocolConfig protocol_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("protocol config must be a JSON object");
  ProtocolConfig c;
  const json& seq = section(j, "sequence");
  std::string family = to_string(c.sequence.family);
  int n = c.sequence.n_pulses;
  double total = c.sequence.total_time;
  read_opt(seq, "family", family);
  read_opt(seq, "n_pulses", n);
  read_opt(seq, "total_time_s", total);
  try {
    c.sequence = DDSequence::make(parse_dd_family(family), n, total);
  } catch (const Error& e) {
    throw ConfigError(std::string("sequence: ") + e.what());
  }
  const json& coh = section(j, "coherence");
  read_opt(coh, "t2_s", c.t2);
  read_opt(coh, "stretch", c.stretch);
  const json& ch = section(j, "charge");
  read_opt(ch, "mean_minus", c.charge.mean_minus);
  read_opt(ch, "mean_zero", c.charge.mean_zero);
  read_opt(ch, "window_s", c.charge.window);
  read_opt(ch, "mixing_s", c.charge.mixing);
  read_opt(ch, "equilibrium", c.charge.equilibrium);
  read_opt(ch, "max_cycles", c.charge.max_cycles);
  read_opt(ch, "threshold", c.charge.threshold);
  const json& ro = section(j, "readout");
  read_opt(ro, "mean_bright", c.readout.mean_bright);
  read_opt(ro, "mean_dark", c.readout.mean_dark);
  read_opt(ro, "flip_probability", c.readout.flip_probability);
  read_opt(ro, "cycle_duration_s", c.readout.cycle_duration);
  read_opt(ro, "n_cycles", c.readout.n_cycles);
  read_opt(j, "shot_duration_s", c.shot_duration);
  read_opt(j, "b_v_t_per_v", c.b_v);
  const json& sig = section(j, "signal");
  std::string shape = "square";
  read_opt(sig, "shape", shape);
  if (shape == "square") c.shape = SignalShape::square;
  else if (shape == "sine") c.shape = SignalShape::sine;
  else throw ConfigError("signal shape must be 'square' or 'sine'");
  read_opt(sig, "phase_offset_rad", c.phase_offset);
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const GrapeProblem& p) {
  json ens = json::array();
  for (const auto& m : p.ensemble)
    ens.push_back({{"detuning_hz", m.detuning_hz}, {"amplitude_scale", m.amplitude_scale}, {"weight", m.weight}});
  return json{{"n_pieces", p.n_pieces},
              {"piece_duration_s", p.piece_duration},
              {"max_rabi_hz", p.max_rabi_hz},
              {"ensemble", ens}};
}

GrapeProblem grape_problem_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("GRAPE problem must be a JSON object");
  GrapeProblem p;
  std::string target = "pi";
  read_opt(j, "target", target);
  if (target == "pi") p.target = pi_pulse_x();
  else if (target == "half_pi") p.target = half_pi_pulse_x();
  else throw ConfigError("target must be 'pi' or 'half_pi'");
  read_opt(j, "n_pieces", p.n_pieces);
  read_opt(j, "piece_duration_s", p.piece_duration);
  read_opt(j, "max_rabi_hz", p.max_rabi_hz);
  double hyperfine_hz = rad_to_hz(p.sys.hyperfine);
  read_opt(j, "hyperfine_hz", hyperfine_hz);
  p.sys.hyperfine = hz_to_rad(hyperfine_hz);
  p.ensemble = hyperfine_ensemble(p.sys);
  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s == "none") p.ensemble = {EnsembleMember{}};
      else if (s != "hyperfine") throw ConfigError("ensemble must be 'hyperfine', 'none' or a list");
    } else if (e.is_array()) {
      p.ensemble.clear();
      for (const auto& m : e) {
        EnsembleMember em;
        read_opt(m, "detuning_hz", em.detuning_hz);
        read_opt(m, "amplitude_scale", em.amplitude_scale);
        read_opt(m, "weight", em.weight);
        p.ensemble.push_back(em);
      }
    } else {
      throw ConfigError("ensemble must be a string or a list");
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("GRAPE problem: ") + e.what());
  }
  return p;
}

void write_shots_csv(std::ostream& out, const ExperimentRun& run) {
  out << "shot,sign,charge_cycles,nv_minus,phase_rad,bright,photons\n";
  for (std::size_t i = 0; i < run.shots.size(); ++i) {
    const auto& s = run.shots[i];
    out << i << ',' << int(s.sign) << ',' << s.cycles << ',' << int(s.nv_minus) << ','
        << format_double(s.phase) << ',' << int(s.bright) << ',' << s.photons << '\n';
  }
}

}  // namespace nvmag
