#pragma once

// Sensitivity budget, fringe calibration, sensitivity from shot records and
// the energy-resolution benchmark.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nvmag/constants.hpp"

namespace nvmag {

struct SensitivityBudget {
  double t_c = 0.0;        // phase accumulation time, s
  double coherence = 1.0;  // C at t_c
  double f_i = 1.0;        // initialization fidelity
  double f_r = 1.0;        // readout fidelity
  double t_ir = 0.0;       // initialization + readout overhead, s
  double gamma_e = constants::gamma_e;

  void validate() const;
};

// 1/(gamma sqrt(T_C)) * 1/(C F_r F_i) * sqrt(1 + T_ir / T_C), T/sqrt(Hz).
double eta_from_budget(const SensitivityBudget& b);

// exp(-(t/T2)^p)
double stretched_coherence(double t, double t2, double stretch);

// Trade-off curves for the budget optimizer.
struct BudgetModels {
  std::function<double(double t_c)> coherence;
  std::function<double(int n_feedback)> f_i;
  std::function<double(int n_readout)> f_r;
  // Initialization + readout time for the given settings, s.
  std::function<double(double t_c, int n_feedback, int n_readout)> overhead;
};

struct BudgetGrid {
  std::vector<double> t_c;
  std::vector<int> n_feedback;
  std::vector<int> n_readout;
};

struct BudgetOptimum {
  double t_c = 0.0;
  int n_feedback = 0;
  int n_readout = 0;
  double eta = 0.0;
  SensitivityBudget budget;
  // eta versus n_readout at the optimal t_c and n_feedback.
  std::vector<std::pair<int, double>> readout_slice;
  // eta versus t_c at the optimal cycle counts.
  std::vector<std::pair<double, double>> t_c_slice;
};

// Exhaustive grid search. Ties go to the earliest grid point (t_c, then
// n_feedback, then n_readout, in the order given).
BudgetOptimum optimize_budget(const BudgetModels& models, const BudgetGrid& grid);

struct FringePoint {
  double voltage = 0.0;
  double counts = 0.0;
  double sigma = 0.0;  // 0 means Poisson, sqrt(max(counts, 1))
};

struct FringeFit {
  double a = 0.0;         // counts
  double c_offset = 0.0;  // counts
  double b_v = 0.0;       // T/V
  double phi = 0.0;       // rad, in (-pi, pi]
  double t = 0.0;         // interrogation time, s
  double a_sigma = 0.0;
  double c_sigma = 0.0;
  double b_v_sigma = 0.0;
  double phi_sigma = 0.0;
  double residual_norm = 0.0;
};

// N(V) = a sin(gamma T B_V V + phi) + c. Throws DataError when the data span
// less than one period, FitError when the fringe amplitude is not resolved.
FringeFit fit_fringe(const std::vector<FringePoint>& data, double t,
                     double gamma_e = constants::gamma_e);

struct SensitivityPoint {
  double time = 0.0;  // averaging time, s
  double snr = 0.0;
  double eta = 0.0;   // T/sqrt(Hz)
};

struct SensitivityCurve {
  std::vector<SensitivityPoint> points;
  double asymptote = 0.0;       // mean eta over the final decade
  double asymptote_sigma = 0.0;  // standard error over that decade
  double final_slope = 0.0;     // d ln eta / d ln t over the final decade
};

// Shots alternate between +signal and -signal; sign[i] gives which. The
// signal estimate is the difference of means, its noise the standard error.
// eta(t) = amplitude sqrt(t) / SNR(t) over cumulative windows.
SensitivityCurve sensitivity_from_timeseries(const std::vector<double>& outcomes,
                                             const std::vector<int>& signs, double amplitude,
                                             double shot_duration, int windows_per_decade = 10);

// eta^2 l^3 / (2 mu0 hbar), units of hbar.
double erl_compute(double eta, double l_eff);

// 10 log10(1 / E_R) with E_R in hbar.
double db_below_erl(double e_r_hbar);

struct MagnetometerRecord {
  std::string kind;
  double l_eff = 0.0;  // m
  double eta = 0.0;    // T/sqrt(Hz)
  std::string reference;
  double e_r = 0.0;    // hbar
};

struct ErlCheckRow {
  MagnetometerRecord record;
  double recomputed = 0.0;
  double relative_deviation = 0.0;
  double db_below = 0.0;  // only meaningful when recomputed < 1
  bool within_tolerance = false;
  std::string flag;        // unit inconsistency note, empty if none
};

struct ErlCheckReport {
  std::vector<ErlCheckRow> rows;
  double tolerance = 0.1;
  int failures = 0;
};

ErlCheckReport erl_table_check(const std::vector<MagnetometerRecord>& records,
                               double tolerance = 0.1);

}  // namespace nvmag
