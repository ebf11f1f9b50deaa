#include "doctest.h"

#include <cmath>
#include <numeric>

#include "nvmag/errors.hpp"
#include "nvmag/philox.hpp"
#include "nvmag/protocol_sim.hpp"

using namespace nvmag;

TEST_CASE("Philox4x32-10 known answer") {
  Philox4x32 g(0, 0);
  CHECK(g() == 0x6627e8d5u);
  CHECK(g() == 0xe169c58du);
  CHECK(g() == 0xbc57ac4cu);
  CHECK(g() == 0x9b00dbd8u);
}

TEST_CASE("Philox streams are reproducible and distinct") {
  Philox4x32 a(7, 3), b(7, 3), c(7, 4);
  bool differ = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a(), z = c();
    CHECK(x == b());
    differ = differ || x != z;
  }
  CHECK(differ);
  Philox4x32 u(1, 0);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    mean += v;
  }
  CHECK(mean / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("charge feedback raises the NV- purity") {
  const ChargeReadoutModel m;
  CHECK(m.purity() >= 0.94);
  const ChargeInitResult r = simulate_charge_init(m, 200000, 5, 2);
  const double n = 200000.0;
  CHECK(std::abs(r.purity_without_feedback - 0.74) < 4 * std::sqrt(0.74 * 0.26 / n));
  CHECK(std::abs(r.success_fraction - m.success_probability()) <
        4 * std::sqrt(m.success_probability() * (1 - m.success_probability()) / n) + 1e-12);
  CHECK(std::abs(r.purity - m.purity()) < 4 * std::sqrt(m.purity() * (1 - m.purity()) / (n * r.success_fraction)));
  CHECK(std::abs(r.init_fidelity - m.init_fidelity()) < 0.005);
  CHECK(r.mean_cycles == doctest::Approx(m.expected_cycles()).epsilon(0.02));
  CHECK(std::accumulate(r.cycles_histogram.begin(), r.cycles_histogram.end(), std::uint64_t{0}) == 200000u);
}

TEST_CASE("charge model validation") {
  ChargeReadoutModel m;
  m.equilibrium = 1.5;
  CHECK_THROWS(m.validate());
  m = ChargeReadoutModel{};
  m.max_cycles = 0;
  CHECK_THROWS(m.validate());
}

TEST_CASE("readout chain distributions") {
  const ReadoutChainModel m;
  const ReadoutStatistics s = readout_statistics(m);
  CHECK(std::accumulate(s.dist_dark.begin(), s.dist_dark.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::accumulate(s.dist_bright.begin(), s.dist_bright.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(s.fidelity - 0.84) <= 0.02);
  CHECK(s.fisher_contrast > 0.0);
  CHECK(s.fisher_contrast < 1.0);
  // Without flips the counts are Poisson with mean n * rate.
  ReadoutChainModel nf = m;
  nf.flip_probability = 0.0;
  nf.n_cycles = 100;
  const ReadoutStatistics p = readout_statistics(nf);
  const double mu = 100 * nf.mean_dark;
  CHECK(p.dist_dark[2] == doctest::Approx(std::exp(-mu) * mu * mu / 2).epsilon(1e-9));
}

TEST_CASE("readout curve matches single evaluations") {
  ReadoutChainModel m;
  const auto curve = readout_curve(m, {500, 2500, 1000});
  for (const auto& p : curve) {
    m.n_cycles = p.n_cycles;
    const ReadoutStatistics s = readout_statistics(m);
    CHECK(p.fidelity == doctest::Approx(s.fidelity).epsilon(1e-12));
    CHECK(p.fisher_contrast == doctest::Approx(s.fisher_contrast).epsilon(1e-12));
  }
}

TEST_CASE("Monte Carlo readout agrees with the exact distribution") {
  const ReadoutChainModel m;
  const auto r = simulate_repetitive_readout(m, NuclearState::alternating, 100000, 8, 4);
  const double f = readout_statistics(m).fidelity;
  CHECK(std::abs(r.fidelity - f) < 4 * std::sqrt(f * (1 - f) / 100000));
}

TEST_CASE("identical rates give no information") {
  ReadoutChainModel m;
  m.mean_dark = m.mean_bright;
  const ReadoutStatistics s = readout_statistics(m);
  CHECK(s.fidelity == doctest::Approx(0.5));
  CHECK(s.fisher_contrast == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("NV3 configuration is consistent") {
  const ProtocolConfig c = nv3_config();
  CHECK_NOTHROW(c.validate());
  CHECK(c.sequence.n_pulses == 512);
  CHECK(c.readout.n_cycles == 2500);
  CHECK(c.shot_duration == doctest::Approx(3.336e-3));
  CHECK(c.coherence() == doctest::Approx(std::exp(-0.9)));
  ProtocolConfig bad = c;
  bad.shot_duration = 2e-3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("experiment runs are independent of the worker count") {
  const ProtocolConfig c = nv3_config();
  const ExperimentRun a = run_experiment(c, 0.004, 5000, 77, 1);
  const ExperimentRun b = run_experiment(c, 0.004, 5000, 77, 7);
  REQUIRE(a.shots.size() == b.shots.size());
  bool same = true;
  for (std::size_t i = 0; i < a.shots.size(); ++i) {
    same = same && a.shots[i].phase == b.shots[i].phase && a.shots[i].photons == b.shots[i].photons &&
           a.shots[i].cycles == b.shots[i].cycles && a.shots[i].sign == b.shots[i].sign &&
           a.shots[i].nv_minus == b.shots[i].nv_minus && a.shots[i].bright == b.shots[i].bright;
  }
  CHECK(same);
  const ExperimentRun d = run_experiment(c, 0.004, 5000, 78, 1);
  bool differs = false;
  for (std::size_t i = 0; i < d.shots.size(); ++i) differs = differs || d.shots[i].photons != a.shots[i].photons;
  CHECK(differs);
  CHECK(a.signs()[0] == 1);
  CHECK(a.signs()[1] == -1);
}

TEST_CASE("fringe sweep is deterministic and sinusoidal in voltage") {
  const ProtocolConfig c = nv3_config();
  std::vector<double> v;
  for (int i = 0; i < 21; ++i) v.push_back(-0.2 + 0.4 * i / 20);
  const auto a = fringe_sweep(c, v, 500, 3, 1);
  const auto b = fringe_sweep(c, v, 500, 3, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].counts == b[i].counts);
  const FringeFit f = fit_fringe(fringe_sweep(c, v, 4000, 3, 4), c.sequence.total_time);
  CHECK(f.b_v == doctest::Approx(c.b_v).epsilon(0.02));
}

TEST_CASE("budget models reproduce the protocol pieces") {
  const ProtocolConfig c = nv3_config();
  const BudgetModels m = budget_models(c, {2500});
  CHECK(m.coherence(c.sequence.total_time) == doctest::Approx(c.coherence()));
  CHECK(m.f_r(2500) == doctest::Approx(readout_statistics(c.readout).fisher_contrast));
}
