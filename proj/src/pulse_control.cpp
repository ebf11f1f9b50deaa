#include "nvmag/pulse_control.hpp"

#include <cmath>
#include <complex>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include <boost/random/uniform_real_distribution.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "nvmag/errors.hpp"
#include "nvmag/io.hpp"
#include "nvmag/philox.hpp"

namespace nvmag {

namespace {

using cd = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

const Mat2& pauli_x() {
  static const Mat2 m = (Mat2() << 0, 1, 1, 0).finished();
  return m;
}
const Mat2& pauli_y() {
  static const Mat2 m = (Mat2() << 0, cd(0, -1), cd(0, 1), 0).finished();
  return m;
}
const Mat2& pauli_z() {
  static const Mat2 m = (Mat2() << 1, 0, 0, -1).finished();
  return m;
}

Mat2 piece_hamiltonian(double re_hz, double im_hz, const EnsembleMember& m) {
  return constants::pi *
         (m.amplitude_scale * (re_hz * pauli_x() + im_hz * pauli_y()) + m.detuning_hz * pauli_z());
}

// Per-member forward pass: piece propagators and their Frechet derivatives.
struct MemberPass {
  std::vector<Mat2> u;
  std::vector<Mat2> du_re;
  std::vector<Mat2> du_im;
};

MemberPass forward_pass(const Waveform& wf, const EnsembleMember& m, bool derivatives) {
  MemberPass pass;
  const std::size_t n = wf.size();
  pass.u.resize(n);
  if (derivatives) {
    pass.du_re.resize(n);
    pass.du_im.resize(n);
  }
  const double dt = wf.piece_duration;
  const Mat2 e_re = cd(0.0, -dt) * (constants::pi * m.amplitude_scale * pauli_x());
  const Mat2 e_im = cd(0.0, -dt) * (constants::pi * m.amplitude_scale * pauli_y());
  for (std::size_t k = 0; k < n; ++k) {
    const Mat2 a = cd(0.0, -dt) * piece_hamiltonian(wf.real_hz[k], wf.imag_hz[k], m);
    if (!derivatives) {
      pass.u[k] = a.exp();
      continue;
    }
    // exp([[A, E], [0, A]]) = [[e^A, L(A, E)], [0, e^A]].
    Mat4 block = Mat4::Zero();
    block.topLeftCorner<2, 2>() = a;
    block.bottomRightCorner<2, 2>() = a;
    block.topRightCorner<2, 2>() = e_re;
    const Mat4 ex_re = block.exp();
    block.topRightCorner<2, 2>() = e_im;
    const Mat4 ex_im = block.exp();
    pass.u[k] = ex_re.topLeftCorner<2, 2>();
    pass.du_re[k] = ex_re.topRightCorner<2, 2>();
    pass.du_im[k] = ex_im.topRightCorner<2, 2>();
  }
  return pass;
}

void check_waveform(const GrapeProblem& problem, const Waveform& wf) {
  if (wf.real_hz.size() != wf.imag_hz.size()) throw ShapeError("waveform real/imag lengths differ");
  if (wf.size() != problem.n_pieces) throw ShapeError("waveform length does not match n_pieces");
  if (std::abs(wf.piece_duration - problem.piece_duration) > 1e-12 * problem.piece_duration)
    throw ShapeError("waveform piece duration does not match problem");
}

}  // namespace

std::vector<EnsembleMember> hyperfine_ensemble(const SpinSystem& sys) {
  const double half = 0.5 * rad_to_hz(sys.hyperfine);
  const double w = 1.0 / 3.0;
  return {{0.0, 1.0, w}, {half, 1.0, w}, {-half, 1.0, w}};
}

void GrapeProblem::validate() const {
  if (n_pieces < 1) throw ParameterError("n_pieces must be >= 1");
  if (!(piece_duration > 0.0)) throw ParameterError("piece_duration must be positive");
  if (!(max_rabi_hz > 0.0)) throw ParameterError("max_rabi must be positive");
  if (target.rows() != 2 || target.cols() != 2) throw ShapeError("target must be 2x2");
  if (unitarity_error(target) > 1e-9) throw ParameterError("target is not unitary");
  if (ensemble.empty()) throw ParameterError("ensemble is empty");
  double total = 0.0;
  for (const auto& m : ensemble) {
    if (!(m.weight >= 0.0)) throw ParameterError("ensemble weight must be non-negative");
    total += m.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("ensemble weights must sum to 1");
}

CMatrix pi_pulse_x() { return pauli_x(); }

CMatrix half_pi_pulse_x() {
  return ((Mat2::Identity() - cd(0.0, 1.0) * pauli_x()) / std::sqrt(2.0)).eval();
}

double Waveform::max_amplitude() const {
  double m = 0.0;
  for (std::size_t k = 0; k < size(); ++k) m = std::max(m, std::hypot(real_hz[k], imag_hz[k]));
  return m;
}

PiecewiseHamiltonian grape_hamiltonian(const Waveform& wf, const EnsembleMember& member) {
  PiecewiseHamiltonian h;
  h.piece_duration = wf.piece_duration;
  h.pieces.reserve(wf.size());
  for (std::size_t k = 0; k < wf.size(); ++k) {
    h.pieces.emplace_back(piece_hamiltonian(wf.real_hz[k], wf.imag_hz[k], member));
  }
  return h;
}

double fidelity(const GrapeProblem& problem, const Waveform& wf) {
  problem.validate();
  check_waveform(problem, wf);
  const Mat2 target_dag = problem.target.adjoint();
  double f = 0.0;
  for (const auto& m : problem.ensemble) {
    const MemberPass pass = forward_pass(wf, m, false);
    Mat2 u = Mat2::Identity();
    for (const auto& uk : pass.u) u = uk * u;
    f += m.weight * std::norm((target_dag * u).trace()) / 4.0;
  }
  return f;
}

GrapeGradient grape_gradient(const GrapeProblem& problem, const Waveform& wf) {
  problem.validate();
  check_waveform(problem, wf);
  const std::size_t n = wf.size();
  const Mat2 target_dag = problem.target.adjoint();
  GrapeGradient g;
  g.d_real.assign(n, 0.0);
  g.d_imag.assign(n, 0.0);

  for (const auto& m : problem.ensemble) {
    const MemberPass pass = forward_pass(wf, m, true);
    // forward[k] = U_{k-1} ... U_0, backward[k] = T^dag U_{n-1} ... U_{k+1}
    std::vector<Mat2> forward(n + 1);
    forward[0] = Mat2::Identity();
    for (std::size_t k = 0; k < n; ++k) forward[k + 1] = pass.u[k] * forward[k];
    std::vector<Mat2> backward(n);
    Mat2 acc = target_dag;
    for (std::size_t k = n; k-- > 0;) {
      backward[k] = acc;
      acc = acc * pass.u[k];
    }
    const cd tr = (target_dag * forward[n]).trace();
    g.fidelity += m.weight * std::norm(tr) / 4.0;
    for (std::size_t k = 0; k < n; ++k) {
      const cd d_re = (backward[k] * pass.du_re[k] * forward[k]).trace();
      const cd d_im = (backward[k] * pass.du_im[k] * forward[k]).trace();
      g.d_real[k] += m.weight * 2.0 * std::real(std::conj(tr) * d_re) / 4.0;
      g.d_imag[k] += m.weight * 2.0 * std::real(std::conj(tr) * d_im) / 4.0;
    }
  }
  return g;
}

void project_amplitudes(Waveform& wf, double max_rabi_hz) {
  for (std::size_t k = 0; k < wf.size(); ++k) {
    const double r = std::hypot(wf.real_hz[k], wf.imag_hz[k]);
    if (r > max_rabi_hz) {
      const double s = max_rabi_hz / r;
      wf.real_hz[k] *= s;
      wf.imag_hz[k] *= s;
    }
  }
}

namespace {

std::vector<double> pack(const Waveform& wf, double unit) {
  std::vector<double> x;
  x.reserve(2 * wf.size());
  for (std::size_t k = 0; k < wf.size(); ++k) {
    x.push_back(wf.real_hz[k] / unit);
    x.push_back(wf.imag_hz[k] / unit);
  }
  return x;
}

void unpack(const std::vector<double>& x, double unit, Waveform& wf) {
  for (std::size_t k = 0; k < wf.size(); ++k) {
    wf.real_hz[k] = x[2 * k] * unit;
    wf.imag_hz[k] = x[2 * k + 1] * unit;
  }
}

std::vector<double> pack_gradient(const GrapeGradient& g, double unit) {
  std::vector<double> x;
  x.reserve(2 * g.d_real.size());
  for (std::size_t k = 0; k < g.d_real.size(); ++k) {
    x.push_back(g.d_real[k] * unit);
    x.push_back(g.d_imag[k] * unit);
  }
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Single ascent run from wf; L-BFGS direction (memory 10) with Armijo
// backtracking on the projected step.
GrapeResult ascend(const GrapeProblem& problem, Waveform wf, const GrapeOptions& options) {
  project_amplitudes(wf, problem.max_rabi_hz);
  const double unit = problem.max_rabi_hz;
  constexpr std::size_t memory = 10;

  GrapeResult result;
  GrapeGradient grad = grape_gradient(problem, wf);
  std::vector<double> x = pack(wf, unit);
  std::vector<double> g = pack_gradient(grad, unit);
  result.trace.push_back(grad.fidelity);
  std::vector<std::vector<double>> s_hist, y_hist;

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    if (1.0 - grad.fidelity <= options.target_infidelity) break;
    if (std::sqrt(dot(g, g)) < options.gradient_tolerance) break;

    // Two-loop recursion on the negated objective, sign folded back in.
    std::vector<double> q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      const double rho = 1.0 / dot(y_hist[i], s_hist[i]);
      alpha[i] = rho * dot(s_hist[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] -= alpha[i] * y_hist[i][j];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
      for (auto& v : q) v *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double rho = 1.0 / dot(y_hist[i], s_hist[i]);
      const double beta = rho * dot(y_hist[i], q);
      for (std::size_t j = 0; j < q.size(); ++j) q[j] += s_hist[i][j] * (alpha[i] - beta);
    }
    std::vector<double> dir = q;
    if (dot(dir, g) <= 0.0) {
      dir = g;
      s_hist.clear();
      y_hist.clear();
    }

    Waveform trial = wf;
    std::vector<double> x_new(x.size());
    auto line_search = [&](const std::vector<double>& d) {
      for (double step = 1.0; step > 1e-14; step *= 0.5) {
        for (std::size_t j = 0; j < x.size(); ++j) x_new[j] = x[j] + step * d[j];
        unpack(x_new, unit, trial);
        project_amplitudes(trial, problem.max_rabi_hz);
        x_new = pack(trial, unit);
        double directional = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) directional += g[j] * (x_new[j] - x[j]);
        const double f_trial = fidelity(problem, trial);
        if (f_trial > grad.fidelity && f_trial >= grad.fidelity + options.armijo_c * directional)
          return true;
      }
      return false;
    };
    bool accepted = line_search(dir);
    if (!accepted && !s_hist.empty()) {
      s_hist.clear();
      y_hist.clear();
      accepted = line_search(g);
    }
    if (!accepted) break;

    const GrapeGradient grad_new = grape_gradient(problem, trial);
    const std::vector<double> g_new = pack_gradient(grad_new, unit);
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      s[j] = x_new[j] - x[j];
      y[j] = g[j] - g_new[j];  // gradient of the minimised objective -F
    }
    if (dot(s, y) > 1e-16 * std::sqrt(dot(s, s) * dot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (s_hist.size() > memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
      }
    }
    wf = std::move(trial);
    x = std::move(x_new);
    g = g_new;
    grad = grad_new;
    result.trace.push_back(grad.fidelity);
  }
  result.converged = 1.0 - grad.fidelity <= options.target_infidelity;
  result.fidelity = grad.fidelity;
  result.waveform = std::move(wf);
  return result;
}

Waveform random_waveform(const GrapeProblem& problem, Philox4x32& rng, double scale_fraction) {
  boost::random::uniform_real_distribution<double> unit(-1.0, 1.0);
  Waveform wf;
  wf.piece_duration = problem.piece_duration;
  const double scale = scale_fraction * problem.max_rabi_hz;
  for (std::size_t k = 0; k < problem.n_pieces; ++k) {
    wf.real_hz.push_back(scale * unit(rng));
    wf.imag_hz.push_back(scale * unit(rng));
  }
  return wf;
}

}  // namespace

GrapeResult optimize(const GrapeProblem& problem, Waveform wf, const GrapeOptions& options) {
  problem.validate();
  check_waveform(problem, wf);
  GrapeResult best = ascend(problem, std::move(wf), options);
  // Restarts draw from stream 1 so they never repeat the random seed waveform.
  Philox4x32 rng(options.seed, 1);
  for (std::size_t r = 0; r < options.restarts && !best.converged; ++r) {
    GrapeResult next = ascend(problem, random_waveform(problem, rng, options.initial_scale), options);
    if (next.fidelity > best.fidelity) best = std::move(next);
  }
  return best;
}

GrapeResult optimize(const GrapeProblem& problem, const GrapeOptions& options) {
  problem.validate();
  Philox4x32 rng(options.seed, 0);
  return optimize(problem, random_waveform(problem, rng, options.initial_scale), options);
}

void write_waveform_csv(std::ostream& out, const Waveform& wf) {
  out << "# piece_duration_s=" << format_double(wf.piece_duration) << '\n';
  out << "piece_index,real_rabi_hz,imag_rabi_hz\n";
  for (std::size_t k = 0; k < wf.size(); ++k) {
    out << k << ',' << format_double(wf.real_hz[k]) << ',' << format_double(wf.imag_hz[k]) << '\n';
  }
}

Waveform read_waveform_csv(std::istream& in) {
  Waveform wf;
  std::string line;
  bool have_duration = false;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("piece_duration_s=");
      if (pos != std::string::npos) {
        wf.piece_duration = parse_double(line.substr(pos + 17));
        have_duration = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != "piece_index,real_rabi_hz,imag_rabi_hz") throw DataError("unexpected waveform header");
      have_header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string idx, re, im;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, re, ',') || !std::getline(ss, im, ','))
      throw DataError("short waveform row");
    if (static_cast<std::size_t>(parse_double(idx)) != wf.size())
      throw DataError("waveform rows out of order");
    wf.real_hz.push_back(parse_double(re));
    wf.imag_hz.push_back(parse_double(im));
  }
  if (!have_duration) throw DataError("waveform CSV missing piece_duration_s comment");
  if (!have_header) throw DataError("waveform CSV missing header");
  return wf;
}

}  // namespace nvmag
