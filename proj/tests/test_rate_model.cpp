#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "coolheat/dynamics.hpp"
#include "coolheat/rate_model.hpp"
#include "coolheat/species_io.hpp"

using namespace coolheat;
using namespace coolheat::literals;

namespace {

SpeciesConfig barium() { return load_species(std::string(COOLHEAT_TEST_DATA_DIR) + "/species/ba138_plus.json"); }

// Lower and upper manifold joined by one E1 line at 488 THz.
SpeciesConfig two_level(HalfInt jl, HalfInt ju, double a) {
  SpeciesConfig c;
  c.manifolds = {{"g", jl, 2.0, 0.0, Classification::bright}, {"e", ju, 1.0, 488.0, Classification::bright}};
  c.transitions = {{"e", "g", constants::speed_of_light / 488e12 * 1e9, a, 1}};
  c.validate();
  return c;
}

SpectralDrive isotropic_thermal(double t) {
  SpectralDrive::Continuum c;
  c.psd = [t](double nu) { return planck_single_mode_psd(nu, t); };
  c.fractions = {1.0, 1.0, 1.0};
  return SpectralDrive({c}, {}, {});
}

ThermalSource sun(double eta) {
  ThermalSource s;
  s.temperature_k = 5800.0;
  s.efficiency = eta;
  s.geometry = PolarizationGeometry::unpolarized(constants::pi / 2);
  return s;
}

}  // namespace

TEST(RateMatrix, RecomputesDiagonalAndRejectsNegative) {
  Eigen::MatrixXd m(2, 2);
  m << 99.0, 3.0, 5.0, -7.0;
  RateMatrix r(m, {"a", "b"}, {"A", "B"});
  EXPECT_EQ(r.rate(0, 0), -5.0);
  EXPECT_EQ(r.rate(1, 1), -3.0);
  EXPECT_EQ(r.exit_rate(0), 5.0);
  EXPECT_TRUE(r.is_valid());
  m(0, 1) = -1.0;
  EXPECT_THROW(RateMatrix(m, {"a", "b"}, {"A", "B"}), NumericalError);
  EXPECT_THROW(RateMatrix(m, {"a"}, {"A", "B"}), ConfigError);
}

TEST(RateMatrix, CsvExport) {
  auto cfg = barium();
  auto g = assemble_generator(cfg, build_channel_table(cfg, 0.0), std::vector<SpectralDrive>{});
  std::ostringstream os;
  g.write_csv(os);
  const std::string text = os.str();
  std::string head = text.substr(0, text.find('\n'));
  EXPECT_EQ(head.rfind("to\\from [s^-1],S1/2:-1/2,S1/2:+1/2,P3/2:-3/2", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 17);
}

TEST(StimulatedRate, ZeroDrive) {
  auto cfg = barium();
  auto ch = build_channel_table(cfg, 0.0);
  ThermalSource s = sun(0.0);
  auto d = thermal_spectral_drive(s, cfg, Coupling::unit());
  for (const auto& c : ch) EXPECT_EQ(stimulated_rate(cfg, c, d), 0.0);
}

TEST(StimulatedRate, SunlightOnDeshelveChannel) {
  auto cfg = barium();
  auto d = thermal_spectral_drive(sun(1.0), cfg, Coupling::unit());
  std::size_t tr = cfg.transition_index("D5/2-P3/2");
  const double h = 6.62607015e-34, k = 1.380649e-23;
  int seen = 0;
  for (const auto& c : build_channel_table(cfg, 0.0)) {
    if (c.transition != tr || c.q == 0) continue;
    double x = h * c.frequency_hz / (k * 5800.0);
    double nbar_eff = 2.0 * 0.25 / std::expm1(x);
    EXPECT_NEAR(nbar_eff, 8.976e-3, 1e-5);
    EXPECT_NEAR(stimulated_rate(cfg, c, d) / (c.A_channel * nbar_eff), 1.0, 1e-12);
    ++seen;
  }
  EXPECT_EQ(seen, 8);
}

TEST(StimulatedRate, QuadrupoleLineIsNotDriven) {
  auto cfg = barium();
  auto d = thermal_spectral_drive(sun(1.0), cfg, Coupling::unit());
  std::size_t tr = cfg.transition_index("S1/2-D5/2");
  for (const auto& c : build_channel_table(cfg, 0.0))
    if (c.transition == tr) EXPECT_EQ(stimulated_rate(cfg, c, d), 0.0);
}

TEST(StimulatedRate, DetailedBalanceTwoLevel) {
  for (auto [jl, ju] : {std::pair{1_half, 1_half}, std::pair{1_half, 3_half}, std::pair{0_half, 2_half}}) {
    auto cfg = two_level(jl, ju, 1e7);
    for (double t : {3000.0, 5800.0, 20000.0}) {
      auto g = assemble_generator(cfg, build_channel_table(cfg, 0.0), {isotropic_thermal(t)});
      auto p = steady_state(g);
      double nbar = bose_occupation(cfg.transitions[0].frequency_hz(), t);
      double ratio = p.mass(g.manifold_mask("e")) / p.mass(g.manifold_mask("g"));
      double per_level = ratio * (jl.twice() + 1.0) / (ju.twice() + 1.0);
      EXPECT_NEAR(per_level, nbar / (nbar + 1.0), 1e-9 * nbar);
    }
  }
}

TEST(LaserRate, ZeroPowerAndDetuningScaling) {
  auto cfg = barium();
  auto ch = build_channel_table(cfg, 0.0);
  std::size_t tr = cfg.transition_index("D5/2-P3/2");
  const TransitionChannel* c = nullptr;
  for (const auto& x : ch)
    if (x.transition == tr && x.q == 1) c = &x;
  ASSERT_TRUE(c);
  LaserSource l;
  l.transition = "D5/2-P3/2";
  l.power_w = 0.0;
  l.linewidth_hz = 1e8;
  l.detuning_hz = -50e9;
  l.geometry = PolarizationGeometry::unpolarized(constants::pi / 2);
  EffectiveArea a(1e-9);
  EXPECT_EQ(laser_equivalent_rate(cfg, *c, l, a), 0.0);
  l.power_w = 1e-6;
  double r1 = laser_equivalent_rate(cfg, *c, l, a);
  l.detuning_hz = -100e9;
  double r2 = laser_equivalent_rate(cfg, *c, l, a);
  EXPECT_NEAR(r2 / r1, 0.25, 0.0025);
  l.power_w = 3e-6;
  EXPECT_NEAR(laser_equivalent_rate(cfg, *c, l, a) / r2, 3.0, 1e-12);
}

// Closed J = 0 -> J = 1 line under pi light versus the optical Bloch
// steady-state scattering rate (Gamma/2) s / (1 + s + (2 Delta / Gamma)^2).
TEST(LaserRate, AgreesWithBlochScatteringRate) {
  const double gamma = 2.0e7;
  auto cfg = two_level(HalfInt::integer(0), HalfInt::integer(1), gamma);
  const double nu = cfg.transitions[0].frequency_hz();
  const double lambda = constants::speed_of_light / nu;
  const double sigma0 = 3.0 * lambda * lambda / (2.0 * constants::pi);
  const double isat = constants::planck_h * nu * gamma / (2.0 * sigma0);
  EffectiveArea area(2.5e-9);
  const TransitionChannel* pi_ch = nullptr;
  auto table = build_channel_table(cfg, 0.0);
  for (const auto& c : table)
    if (c.q == 0) pi_ch = &c;
  ASSERT_TRUE(pi_ch);
  for (double s : {1e-5, 1e-3, 1e-2})
    for (double det : {10.0, 20.0, 100.0, 1e4}) {
      LaserSource l;
      l.transition = "g-e";
      l.power_w = s * isat * area.value_m2;
      l.detuning_hz = det * gamma / (2.0 * constants::pi);
      l.geometry = PolarizationGeometry::linear(constants::pi / 2, 0.0);
      double d = 2.0 * constants::pi * l.detuning_hz;
      double bloch = 0.5 * gamma * s / (1.0 + s + 4.0 * d * d / (gamma * gamma));
      EXPECT_NEAR(laser_equivalent_rate(cfg, *pi_ch, l, area) / bloch, 1.0, 0.05) << s << ' ' << det;
    }
}

TEST(Assemble, SpontaneousOnlyIsDownward) {
  auto cfg = barium();
  GeneratorOptions o;
  o.include_quench = false;
  auto g = assemble_generator(cfg, build_channel_table(cfg, 0.0), std::vector<SpectralDrive>{}, o);
  auto subs = cfg.sublevels();
  for (std::size_t j = 0; j < g.dimension(); ++j)
    for (std::size_t i = 0; i < g.dimension(); ++i)
      if (i != j && g.rate(i, j) > 0.0) EXPECT_GT(cfg.manifold(subs[j]).energy_thz, cfg.manifold(subs[i]).energy_thz);
}

TEST(Assemble, RejectsUnknownTransition) {
  auto cfg = barium();
  LaserSource l;
  l.transition = "D5/2-F7/2";
  l.power_w = 1e-6;
  EXPECT_THROW(assemble_generator(cfg, build_channel_table(cfg, 0.0), {RadiationSource(l)}, EffectiveArea(1e-9)),
               ConfigError);
  ThermalSource t = sun(0.2);
  t.transitions = {"S1/2-X"};
  EXPECT_THROW(assemble_generator(cfg, build_channel_table(cfg, 0.0), {RadiationSource(t)}, EffectiveArea(1e-9)),
               ConfigError);
}

TEST(Assemble, DarkColumnSumsMatchChannelRates) {
  auto cfg = barium();
  auto table = build_channel_table(cfg, 4.2);
  auto d = thermal_spectral_drive(sun(0.25), cfg, Coupling::through(EffectiveArea(5e-9)));
  auto g = assemble_generator(cfg, table, {d});
  auto subs = cfg.sublevels();
  std::size_t dark = cfg.manifold_index("D5/2");
  for (std::size_t j = 0; j < subs.size(); ++j) {
    if (subs[j].manifold != dark) continue;
    double expect = cfg.quench->rate;
    for (const auto& c : table) {
      if (c.lower == subs[j]) expect += stimulated_rate(cfg, c, d);
      if (c.upper == subs[j]) expect += c.A_channel + stimulated_rate(cfg, c, d);
    }
    EXPECT_NEAR(g.exit_rate(j) / expect, 1.0, 1e-12);
  }
}

TEST(Assemble, ValidAcrossConfigurations) {
  auto cfg = barium();
  for (double b : {0.0, 4.2, 50.0})
    for (double eta : {0.0, 0.15, 1.0}) {
      LaserSource l;
      l.transition = "S1/2-P3/2";
      l.power_w = 1e-6;
      l.linewidth_hz = 1e6;
      GeneratorOptions o;
      o.include_repump = true;
      auto g = assemble_generator(cfg, build_channel_table(cfg, b), {RadiationSource(sun(eta)), RadiationSource(l)},
                                  EffectiveArea(5e-9), o);
      EXPECT_TRUE(g.is_valid(1e-12));
      EXPECT_LT(g.max_relative_column_sum(), 1e-12);
    }
}

TEST(Assemble, StimulatedEntriesScaleLinearly) {
  auto cfg = barium();
  auto table = build_channel_table(cfg, 4.2);
  auto d = thermal_spectral_drive(sun(0.25), cfg, Coupling::unit());
  auto base = assemble_generator(cfg, table, std::vector<SpectralDrive>{}).matrix();
  auto one = assemble_generator(cfg, table, {d}).matrix();
  for (double alpha : {0.5, 2.0, 7.0}) {
    auto m = assemble_generator(cfg, table, {d.scaled(alpha)}).matrix();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        EXPECT_NEAR(m(i, j) - base(i, j), alpha * (one(i, j) - base(i, j)),
                    1e-12 * (std::abs(m(i, j)) + std::abs(base(i, j))) + 1e-15);
  }
}

TEST(Assemble, EscapeRateIncreasesWithTemperature) {
  auto cfg = barium();
  auto table = build_channel_table(cfg, 4.2);
  double prev = 0.0;
  for (double t = 3000.0; t <= 10000.0; t += 250.0) {
    ThermalSource s = sun(0.25);
    s.temperature_k = t;
    auto g = eliminate_fast_manifold(assemble_generator(cfg, table, {RadiationSource(s)}, EffectiveArea(5e-9)), "P3/2");
    std::size_t j = g.index_of("D5/2:-5/2");
    double escape = 0.0;
    for (std::size_t i = 0; i < g.dimension(); ++i)
      if (g.manifolds()[i] != "D5/2") escape += g.rate(i, j);
    EXPECT_GT(escape, prev);
    prev = escape;
  }
}

TEST(Eliminate, SingleDecayChannelReroutesEverything) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(1, 0) = 2.0;    // slow s -> fast f
  m(2, 1) = 1e8;    // f -> g only
  m(1, 2) = 0.5;    // g -> f
  RateMatrix full(m, {"s", "f", "g"}, {"S", "F", "G"});
  auto r = eliminate_fast_manifold(full, "F");
  ASSERT_EQ(r.dimension(), 2u);
  EXPECT_NEAR(r.rate(r.index_of("g"), r.index_of("s")), 2.0, 1e-12);
  EXPECT_NEAR(r.rate(r.index_of("g"), r.index_of("g")), 0.0, 1e-12);
}

TEST(Eliminate, PumpWithReturnBranch) {
  auto cfg = barium();
  auto table = build_channel_table(cfg, 0.0);
  ThermalSource s = sun(0.25);
  GeneratorOptions o;
  o.include_quench = false;
  auto full = assemble_generator(cfg, table, {RadiationSource(s)}, EffectiveArea(5e-9), o);
  auto red = eliminate_fast_manifold(full, "P3/2");
  EXPECT_LT(red.max_relative_column_sum(), 1e-12);
  // Effective escape from each D5/2 sublevel: stimulated pumping to P3/2
  // times the probability P3/2 does not return to D5/2, plus E2 decay.
  double a_p = 0.0, a_pd = cfg.transitions[cfg.transition_index("D5/2-P3/2")].A_total;
  for (const auto& t : cfg.transitions)
    if (t.upper == "P3/2") a_p += t.A_total;
  double b_return = a_pd / a_p;
  std::size_t tr = cfg.transition_index("D5/2-P3/2");
  auto subs = cfg.sublevels();
  for (std::size_t j = 0; j < red.dimension(); ++j) {
    if (red.manifolds()[j] != "D5/2") continue;
    std::size_t fj = full.index_of(red.labels()[j]);
    double pump = 0.0;
    for (const auto& c : table)
      if (c.transition == tr && c.lower == subs[fj]) pump += full.rate(full.index_of(cfg.label(c.upper)), fj);
    double escape = 0.0;
    for (std::size_t i = 0; i < red.dimension(); ++i)
      if (red.manifolds()[i] != "D5/2") escape += red.rate(i, j);
    // Stimulated emission back down from P3/2 slightly raises the return.
    EXPECT_NEAR(escape - cfg.transitions[3].A_total, pump * (1.0 - b_return), 1e-3 * pump);
  }
  auto dark_f = full.manifold_mask("D5/2"), dark_r = red.manifold_mask("D5/2");
  PopulationState pf = PopulationState::uniform_over(dark_f), pr = PopulationState::uniform_over(dark_r);
  auto a = evolve(full, pf, 1.0), b = evolve(red, pr, 1.0);
  for (std::size_t i = 0; i < red.dimension(); ++i) EXPECT_NEAR(b[i], a[full.index_of(red.labels()[i])], 1e-4);
}

TEST(Eliminate, Preconditions) {
  auto cfg = barium();
  auto g = assemble_generator(cfg, build_channel_table(cfg, 0.0), std::vector<SpectralDrive>{});
  EXPECT_THROW(eliminate_fast_manifold(g, "F7/2"), ConfigError);
  auto slow = cfg;
  for (auto& t : slow.transitions)
    if (t.upper == "P3/2") t.A_total = 1e3;
  slow.repump->rate = 1e6;
  GeneratorOptions o;
  o.include_repump = true;
  auto gs = assemble_generator(slow, build_channel_table(slow, 0.0), std::vector<SpectralDrive>{}, o);
  EXPECT_THROW(eliminate_fast_manifold(gs, "P3/2"), ConfigError);
}
