#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coolheat/commands.hpp"
#include "coolheat/wigner.hpp"

namespace coolheat {

struct AcceptanceCheck {
  std::string name;
  std::string reference;  // target value with units
  double value = 0.0;
  std::string tolerance;
  bool pass = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<AcceptanceCheck> checks;
  double seconds = 0.0;
  std::string error;  // set when the criterion threw

  bool pass() const {
    return error.empty() && !checks.empty() &&
           std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
};

struct AcceptanceOptions {
  std::filesystem::path data_dir;
  std::filesystem::path work_dir = "reproduce_out";
  std::uint64_t seed = 0;  // offsets every Monte Carlo seed
  unsigned threads = 1;
};

inline constexpr double kAcceptanceBudgetS = 600.0;

namespace detail {

struct Bundle {
  std::filesystem::path deshelve, dark_control, points;
};

inline Bundle locate_bundle(const std::filesystem::path& data_dir) {
  Bundle b{data_dir / "scenarios" / "sunlight_deshelve.json", data_dir / "scenarios" / "dark_control.json",
           data_dir / "calibration" / "laser_deshelve_points.csv"};
  for (const auto& p : {b.deshelve, b.dark_control, b.points})
    if (!std::filesystem::exists(p)) throw ConfigError("bundled file missing: " + p.string());
  return b;
}

inline std::string fmt(double x, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

inline AcceptanceCheck within(std::string name, double value, double target, double tol, std::string unit,
                              std::string ref = {}) {
  AcceptanceCheck c;
  c.name = std::move(name);
  c.reference = ref.empty() ? fmt(target) + (unit.empty() ? "" : " " + unit) : std::move(ref);
  c.value = value;
  c.tolerance = "+/- " + fmt(tol) + (unit.empty() ? "" : " " + unit);
  c.pass = std::abs(value - target) <= tol;
  return c;
}

inline AcceptanceCheck bound(std::string name, double value, std::string relation, double limit,
                             std::string ref = {}) {
  AcceptanceCheck c;
  c.name = std::move(name);
  c.reference = ref.empty() ? relation + " " + fmt(limit) : std::move(ref);
  c.value = value;
  c.tolerance = relation + " " + fmt(limit);
  if (relation == "<") c.pass = value < limit;
  else if (relation == "<=") c.pass = value <= limit;
  else if (relation == ">") c.pass = value > limit;
  else c.pass = value >= limit;
  return c;
}

inline ThermalSource& thermal_of(Scenario& sc) {
  for (auto& s : sc.deshelve)
    if (auto* th = std::get_if<ThermalSource>(&s)) return *th;
  throw ConfigError("scenario has no thermal deshelve source");
}

// Standard normal from two uniforms (Box-Muller), so noise is reproducible
// across standard libraries.
inline double normal(RngStream& rng) {
  double u1 = rng.uniform(), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * constants::pi * u2);
}

// One-sample KS statistic against an exponential with the given rate.
inline double ks_exponential(std::vector<double> x, double rate) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = -std::expm1(-rate * x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

struct SuiteState {
  Scenario deshelve, dark;
  double tau_dark_fit = 0.0;
};

inline void criterion_1(CriterionResult& r, SuiteState&, const AcceptanceOptions&) {
  std::vector<bool> six(6, true), two(2, true);
  r.checks.push_back(within("entropy(uniform over D5/2)", entropy(PopulationState::uniform_over(six)), 2.585, 0.005,
                            "bits", "2.58 bits, 2.585 +/- 0.005"));
  AcceptanceCheck c = within("entropy(uniform over S1/2)", entropy(PopulationState::uniform_over(two)), 1.0, 0.0,
                             "bits", "1 bit exactly");
  c.pass = entropy(PopulationState::uniform_over(two)) == 1.0;
  r.checks.push_back(c);
}

inline void criterion_2(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  Scenario sc = st.deshelve;
  sc.b_gauss = 0.0;
  ShelveResult sh = simulate_shelve(sc);
  r.checks.push_back(within("shelved entropy, B = 0", sh.entropy, 2.49, 0.05, "bits"));
  PopulationState ss = shelve_steady_state(sc);
  const std::size_t n = 100000;
  auto mc = shelve_occupation_mc(sc, n, 2000 + o.seed, o.threads);
  double worst = 0.0;
  for (std::size_t i = 0; i < mc.size(); ++i) {
    double sigma = std::sqrt(std::max(ss[i] * (1.0 - ss[i]), 1e-12) / static_cast<double>(n));
    worst = std::max(worst, std::abs(mc[i] - ss[i]) / sigma);
  }
  r.checks.push_back(bound("max |MC - steady state| per sublevel [sigma]", worst, "<=", 3.0, "Gillespie 1e5 vs GTH"));
  double s_ss = entropy(ss), m2 = 0.0;
  for (std::size_t i = 0; i < ss.size(); ++i)
    if (ss[i] > 0.0) m2 += ss[i] * std::pow(std::log2(ss[i]), 2);
  double sigma_s = std::sqrt(std::max(m2 - s_ss * s_ss, 0.0) / static_cast<double>(n));
  r.checks.push_back(within("MC shelved entropy vs steady state", entropy(PopulationState(mc)), s_ss, 3.0 * sigma_s,
                            "bits"));
}

inline void criterion_3(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  double worst = 1e300;
  for (double b : {0.0, 2.0, 4.2, 5.0})
    for (double eta : {0.15, 0.25, 0.40}) {
      Scenario sc = st.deshelve;
      sc.b_gauss = b;
      thermal_of(sc).efficiency_table.clear();
      thermal_of(sc).efficiency = eta;
      sc.seed = 3000 + o.seed;
      DeshelveResult d = simulate_deshelve(sc, o.threads);
      worst = std::min(worst, d.entropy.ratio);
      if (b == 0.0 && eta == 0.25)
        r.checks.push_back(within("entropy ratio at B = 0, eta = 0.25", d.entropy.ratio, 2.49, 0.07, "",
                                  "2.49 +/- 0.07"));
      r.checks.push_back(bound("entropy ratio at B = " + fmt(b) + " G, eta = " + fmt(eta), d.entropy.ratio, ">", 2.0,
                               "well over 2"));
    }
}

inline void criterion_4(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  Scenario sc = st.dark;
  sc.seed = 4000 + o.seed;
  FitResult f = fit_exponential_mle(dark_time_values(dark_control(sc, o.threads).samples));
  st.tau_dark_fit = f.tau;
  r.checks.push_back(within("dark control tau, quench 0.01697 /s", f.tau, 20.4, 3.0 * f.sigma_tau, "s",
                            "20.4(5) s +/- 3 sigma_fit"));
  sc.quench_rate = 0.0;
  sc.seed = 4100 + o.seed;
  FitResult g = fit_exponential_mle(dark_time_values(dark_control(sc, o.threads).samples));
  r.checks.push_back(within("dark control tau, no quench", g.tau, 31.2, 3.0 * g.sigma_tau, "s",
                            "31.2(9) s, +/- 3 sigma_fit"));
}

inline void criterion_5(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  Scenario sc = st.deshelve;
  const double target = 1.0 / 1.98 - 1.0 / 20.4;
  const double psd = infer_psd(1.98, 20.4, sc.effective_area, sc);
  auto& sun = thermal_of(sc);
  const double nu = sc.species.transitions[deshelve_transition(sc.species)].frequency_hz();
  sun.efficiency_table.clear();
  sun.efficiency = psd / (sun.polarization_modes * planck_single_mode_psd(nu, sun.temperature_k));
  const PopulationState shelved = simulate_shelve(sc).shelved;
  double rate = stimulated_escape_rate(sc, shelved, scenario_drives(sc, sc.deshelve));
  r.checks.push_back(within("tuned stimulated escape rate", rate, target, 1e-3 * target, "1/s",
                            "0.4560 1/s (1/1.98 - 1/20.4)"));
  sc.seed = 5000 + o.seed;
  FitResult f = fit_exponential_mle(dark_time_values(simulate_deshelve(sc, o.threads).samples));
  r.checks.push_back(within("sunlight deshelve tau", f.tau, 1.98, 0.02 * 1.98, "s", "1.98(5) s +/- 2%"));
  r.checks.push_back(bound("tau_dark / tau_sun (fits)", st.tau_dark_fit / f.tau, ">=", 10.0,
                           "order of magnitude"));
  double back = infer_psd(f.tau, 20.4, sc.effective_area, sc);
  r.checks.push_back(within("PSD -> simulate -> fit -> infer round trip", back / psd, 1.0, 0.03, "ratio"));
}

inline void criterion_6(CriterionResult& r, SuiteState&, const AcceptanceOptions&) {
  const double k = constants::nw_per_thz_per_w_per_hz;
  const double per_pol = planck_single_mode_psd(wavelength_nm_to_hz(614.0), 5800.0) * k;
  r.checks.push_back(within("single-mode PSD, 614 nm, 5800 K", per_pol, 5.80, 0.058, "nW/THz", "5.80 nW/THz +/- 1%"));
  double lo = 2 * 0.15 * per_pol, hi = 2 * 0.40 * per_pol;
  r.checks.push_back(within("15% two-mode delivery", lo, 1.74, 0.0174, "nW/THz"));
  r.checks.push_back(within("40% two-mode delivery", hi, 4.64, 0.0464, "nW/THz"));
  AcceptanceCheck c;
  c.name = "window contains inferred 2.9 nW/THz";
  c.reference = "2.9 nW/THz";
  c.value = 2.9;
  c.tolerance = "in [" + fmt(lo, 4) + ", " + fmt(hi, 4) + "]";
  c.pass = lo <= 2.9 && 2.9 <= hi;
  r.checks.push_back(c);
}

inline void criterion_7(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  double ratio = psd_consistency(7.8, 2.9);
  r.checks.push_back(within("psd_consistency(7.8, 2.9)", ratio, 2.69, 0.005, "", "2.69"));
  r.checks.push_back(bound("consistency ratio", ratio, "<", 3.0, "within a factor of 3"));

  Scenario sc = st.deshelve;
  sc.calibration.reset();
  const LaserSource laser = st.deshelve.calibration->laser;
  const PopulationState shelved = simulate_shelve(sc).shelved;
  const double tau_dark = 20.4;
  const double a_true = 2.69 * sc.effective_area.value_m2;
  auto tau_at = [&](double p) { return 1.0 / (1.0 / tau_dark + laser_escape_rate(sc, shelved, laser, p, a_true)); };

  std::vector<CalibrationPoint> clean;
  for (double p : {0.5e-6, 1e-6, 2e-6}) clean.push_back({p, tau_at(p)});
  auto res = calibrate_effective_area(clean, laser, sc, tau_dark);
  r.checks.push_back(within("noiseless round trip, 3 powers", res.effective_area / a_true, 1.0, 1e-3, "ratio"));

  std::vector<double> powers;
  for (int i = 0; i < 10; ++i) powers.push_back(0.4e-6 * (i + 1));
  std::vector<double> exact;
  for (double p : powers) exact.push_back(tau_at(p));
  int good = 0;
  for (int rep = 0; rep < 100; ++rep) {
    RngStream rng(7000 + o.seed, static_cast<std::uint64_t>(rep));
    std::vector<CalibrationPoint> pts;
    for (std::size_t i = 0; i < powers.size(); ++i) pts.push_back({powers[i], exact[i] * (1.0 + 0.05 * normal(rng))});
    auto fit = calibrate_effective_area(pts, laser, sc, tau_dark);
    if (std::abs(fit.effective_area / a_true - 1.0) <= 0.10) ++good;
  }
  r.checks.push_back(bound("5% noise, 10 powers: repetitions within 10%", good, ">=", 95, "95 of 100"));
}

inline void criterion_8(CriterionResult& r, SuiteState& st, const AcceptanceOptions& o) {
  Scenario sc = st.deshelve;
  sc.b_gauss = 4.2;
  RateMatrix shelve = shelve_generator(sc);
  RateMatrix full = deshelve_generator(sc, true), reduced = deshelve_generator(sc, false);
  double cs = std::max({shelve.max_relative_column_sum(), full.max_relative_column_sum(),
                        reduced.max_relative_column_sum()});
  r.checks.push_back(bound("generator column sums (relative)", cs, "<", 1e-12));

  PopulationState p0 = PopulationState::uniform_over(shelve.manifold_mask("S1/2"));
  double drift = 0.0;
  for (double t : {1e-6, 1e-3, 1.0, 1e3}) {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(p0.values().data(), 16);
    drift = std::max(drift, std::abs((propagator(shelve, t) * v).sum() - 1.0));
  }
  r.checks.push_back(bound("|sum p - 1| over 1e3 s stiff evolution", drift, "<", 1e-9));

  auto dark_full = detail::mask_by_classification(sc.species, full, Classification::dark);
  auto dark_red = detail::mask_by_classification(sc.species, reduced, Classification::dark);
  PopulationState shelved = simulate_shelve(sc).shelved;
  PopulationState pf = PopulationState::embedded(shelved, dark_full), pr = PopulationState::embedded(shelved, dark_red);
  double gap = 0.0;
  for (double t : {1e-6, 1e-3, 0.1, 1.0, 10.0, 100.0}) {
    auto a = evolve(full, pf, t), b = evolve(reduced, pr, t);
    for (std::size_t i = 0; i < reduced.dimension(); ++i)
      gap = std::max(gap, std::abs(b[i] - a[full.index_of(reduced.labels()[i])]));
  }
  r.checks.push_back(bound("full vs reduced generator populations", gap, "<", 1e-4));

  double sum_rule = 0.0;
  for (int tj1 = 0; tj1 <= 5; ++tj1)
    for (int tj2 = 0; tj2 <= 5; ++tj2)
      for (int tj3 = std::abs(tj1 - tj2); tj3 <= tj1 + tj2; tj3 += 2) {
        auto j1 = HalfInt::from_twice(tj1), j2 = HalfInt::from_twice(tj2), j3 = HalfInt::from_twice(tj3);
        for (int tm3 = -tj3; tm3 <= tj3; tm3 += 2) {
          double s = 0.0;
          for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
            int tm2 = -tm1 - tm3;
            if (std::abs(tm2) > tj2) continue;
            double w = wigner_3j(j1, j2, j3, HalfInt::from_twice(tm1), HalfInt::from_twice(tm2),
                                 HalfInt::from_twice(tm3));
            s += w * w;
          }
          sum_rule = std::max(sum_rule, std::abs((tj3 + 1) * s - 1.0));
        }
      }
  r.checks.push_back(bound("3-j orthogonality sum rule, j <= 5/2", sum_rule, "<", 1e-12));

  const std::size_t start = reduced.index_of("D5/2:+1/2");
  std::vector<bool> stop(reduced.dimension(), true);
  stop[start] = false;
  auto waits = dark_time_values(
      sample_dark_times(reduced, PopulationState::point(reduced.dimension(), start), stop, 10000, 8000 + o.seed,
                        o.threads));
  double d = ks_exponential(waits, reduced.exit_rate(start));
  r.checks.push_back(bound("Gillespie waiting-time KS statistic", d, "<", 1.628 / std::sqrt(10000.0),
                           "KS 1% critical value, n = 1e4"));

  SpeciesConfig two;
  two.manifolds = {{"g", HalfInt::parse("1/2"), 2.0, 0.0, Classification::bright},
                   {"e", HalfInt::parse("1/2"), 2.0 / 3.0, 488.0, Classification::bright}};
  two.transitions = {{"e", "g", constants::speed_of_light / 488e12 * 1e9, 1e7, 1}};
  two.validate();
  const double nu = two.transitions[0].frequency_hz();
  SpectralDrive::Continuum iso;
  iso.psd = [](double f) { return planck_single_mode_psd(f, 5800.0); };
  iso.fractions = {1.0, 1.0, 1.0};
  RateMatrix tl = assemble_generator(two, build_channel_table(two, 0.0), {SpectralDrive({iso}, {}, {})}, {});
  PopulationState pss = steady_state(tl);
  const double nbar = bose_occupation(nu, 5800.0);
  double pe = pss.mass(tl.manifold_mask("e")), pg = pss.mass(tl.manifold_mask("g"));
  r.checks.push_back(within("two-level detailed balance p_u/p_l", pe / pg, nbar / (nbar + 1.0), 1e-9, "",
                            "nbar/(nbar+1) = " + fmt(nbar / (nbar + 1.0))));

  Scenario ts = st.deshelve;
  ts.b_gauss = 0.0;
  PopulationState sh0 = simulate_shelve(ts).shelved;
  double prev = 0.0, min_step = 1e300;
  for (double t = 3000.0; t <= 10000.0; t += 500.0) {
    auto& sun = thermal_of(ts);
    sun.efficiency_table.clear();
    sun.efficiency = 0.25;
    sun.temperature_k = t;
    double rate = stimulated_escape_rate(ts, sh0, scenario_drives(ts, ts.deshelve));
    if (t > 3000.0) min_step = std::min(min_step, rate - prev);
    prev = rate;
  }
  r.checks.push_back(bound("smallest escape-rate step over T = 3000..10000 K", min_step, ">", 0.0,
                           "strictly increasing"));

  // Closed J = 0 <-> J = 1 line driven by pi light against the steady-state
  // optical Bloch scattering rate.
  SpeciesConfig bl;
  bl.manifolds = {{"g", HalfInt::integer(0), 0.0, 0.0, Classification::bright},
                  {"e", HalfInt::integer(1), 1.0, 488.0, Classification::bright}};
  bl.transitions = {{"e", "g", constants::speed_of_light / 488e12 * 1e9, 1e8, 1}};
  bl.validate();
  const double gamma = 1e8, lambda = constants::speed_of_light / bl.transitions[0].frequency_hz();
  const double sigma0 = 3.0 * lambda * lambda / (2.0 * constants::pi);
  const double isat = constants::planck_h * bl.transitions[0].frequency_hz() * gamma / (2.0 * sigma0);
  const EffectiveArea area(1e-9);
  auto chans = build_channel_table(bl, 0.0);
  const TransitionChannel* pi_ch = nullptr;
  for (const auto& ch : chans)
    if (ch.q == 0) pi_ch = &ch;
  double worst = 0.0;
  for (double s : {1e-4, 1e-3, 1e-2})
    for (double det : {10.0, 30.0, 100.0, 1000.0}) {
      LaserSource l;
      l.transition = "g-e";
      l.power_w = s * isat * area.value_m2;
      l.detuning_hz = det * gamma / (2.0 * constants::pi);
      l.geometry = PolarizationGeometry::linear(constants::pi / 2, 0.0);
      double model = laser_equivalent_rate(bl, *pi_ch, l, area);
      double delta = 2.0 * constants::pi * l.detuning_hz;
      double bloch = 0.5 * gamma * s / (1.0 + s + 4.0 * delta * delta / (gamma * gamma));
      worst = std::max(worst, std::abs(model / bloch - 1.0));
    }
  r.checks.push_back(bound("laser rate vs Bloch, s <= 0.01, detuning >= 10 Gamma", worst, "<", 0.05,
                           "relative deviation"));
}

inline void criterion_9(CriterionResult& r, SuiteState&, const AcceptanceOptions& o, const Bundle& b) {
  std::filesystem::path dir = o.work_dir / "determinism";
  std::filesystem::path first = o.work_dir / "determinism_first";
  std::filesystem::create_directories(first);
  SimulateArgs a;
  a.scenario = b.deshelve;
  a.phase = "deshelve";
  a.out = dir;
  a.dump_generator = true;
  a.seed = 9000 + o.seed;
  std::ostringstream sink;
  const std::vector<std::string> files = {"darks.csv", "survival.csv", "generator.csv", "report.json"};
  auto snapshot = [&] {
    std::vector<std::string> v;
    for (const auto& f : files) v.push_back(read_text_file(dir / f));
    return v;
  };
  a.threads = 1;
  int rc1 = cmd_simulate(a, sink, sink);
  auto s1 = snapshot();
  for (std::size_t i = 0; i < files.size(); ++i) write_text_file(first / files[i], s1[i]);
  int rc2 = cmd_simulate(a, sink, sink);
  auto s2 = snapshot();
  a.threads = std::max(4u, o.threads);
  int rc3 = cmd_simulate(a, sink, sink);
  auto s3 = snapshot();
  AcceptanceCheck c1{"repeat run, byte-identical data files", "identical", s1 == s2 ? 1.0 : 0.0, "exact",
                     rc1 == 0 && rc2 == 0 && s1 == s2};
  AcceptanceCheck c2{"--threads 1 vs --threads " + std::to_string(a.threads), "identical", s1 == s3 ? 1.0 : 0.0,
                     "exact", rc3 == 0 && s1 == s3};
  r.checks.push_back(c1);
  r.checks.push_back(c2);
}

}  // namespace detail

// Runs criteria 1-9 and then 10 (wall time and overall status).
inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& o, std::ostream* progress = nullptr) {
  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  detail::Bundle b = detail::locate_bundle(o.data_dir);
  std::filesystem::create_directories(o.work_dir);
  detail::SuiteState st{load_scenario(b.deshelve), load_scenario(b.dark_control)};
  if (!st.deshelve.calibration) throw ConfigError(b.deshelve.string() + ": calibration block required");

  using Fn = std::function<void(CriterionResult&)>;
  std::vector<std::pair<std::string, Fn>> plan = {
      {"entropy constants", [&](auto& r) { detail::criterion_1(r, st, o); }},
      {"shelved-state entropy", [&](auto& r) { detail::criterion_2(r, st, o); }},
      {"entropy reduction ratio", [&](auto& r) { detail::criterion_3(r, st, o); }},
      {"dark control", [&](auto& r) { detail::criterion_4(r, st, o); }},
      {"sunlight deshelve", [&](auto& r) { detail::criterion_5(r, st, o); }},
      {"blackbody budget", [&](auto& r) { detail::criterion_6(r, st, o); }},
      {"calibration consistency", [&](auto& r) { detail::criterion_7(r, st, o); }},
      {"property suites", [&](auto& r) { detail::criterion_8(r, st, o); }},
      {"determinism", [&](auto& r) { detail::criterion_9(r, st, o, b); }},
  };
  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CriterionResult r;
    r.id = static_cast<int>(i + 1);
    r.title = plan[i].first;
    auto c0 = Clock::now();
    try {
      plan[i].second(r);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - c0).count();
    if (progress) *progress << "criterion " << r.id << " (" << r.title << "): " << (r.pass() ? "PASS" : "FAIL") << " in "
                            << detail::fmt(r.seconds, 3) << " s\n" << std::flush;
    out.push_back(std::move(r));
  }
  CriterionResult end;
  end.id = 10;
  end.title = "end-to-end";
  end.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  bool all = std::all_of(out.begin(), out.end(), [](const auto& r) { return r.pass(); });
  end.checks.push_back(detail::bound("suite wall time", end.seconds, "<", kAcceptanceBudgetS, "under 10 minutes"));
  end.checks.push_back({"criteria 1-9 pass", "all pass", all ? 1.0 : 0.0, "exact", all});
  out.push_back(std::move(end));
  return out;
}

inline std::string acceptance_table(const std::vector<CriterionResult>& results) {
  std::ostringstream os;
  os << "criterion,check,reference,simulated,tolerance,status\n";
  for (const auto& r : results) {
    if (!r.error.empty())
      os << r.id << ",\"" << r.title << "\",,,,ERROR: " << r.error << '\n';
    for (const auto& c : r.checks)
      os << r.id << ",\"" << c.name << "\",\"" << c.reference << "\"," << detail::fmt(c.value, 8) << ",\""
         << c.tolerance << "\"," << (c.pass ? "pass" : "FAIL") << '\n';
  }
  return os.str();
}

struct ReproduceArgs {
  std::filesystem::path out = "reproduce_out";
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

inline std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv(kDataDirEnv)) return env;
#ifdef COOLHEAT_DEFAULT_DATA_DIR
  return COOLHEAT_DEFAULT_DATA_DIR;
#else
  return "data";
#endif
}

inline int cmd_reproduce(const ReproduceArgs& a, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        AcceptanceOptions o;
        o.data_dir = a.data_dir.value_or(default_data_dir());
        o.work_dir = a.out;
        o.seed = a.seed;
        o.threads = std::max(1u, a.threads);
        auto results = run_acceptance(o, &out);
        std::string table = acceptance_table(results);
        write_text_file(a.out / "acceptance.csv", table);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : results) {
          nlohmann::json checks = nlohmann::json::array();
          for (const auto& c : r.checks)
            checks.push_back({{"check", c.name}, {"reference", c.reference}, {"simulated", c.value},
                              {"tolerance", c.tolerance}, {"pass", c.pass}});
          j.push_back({{"criterion", r.id}, {"title", r.title}, {"pass", r.pass()}, {"seconds", r.seconds},
                       {"checks", checks}, {"error", r.error}});
        }
        write_text_file(a.out / "acceptance.json", j.dump(2) + "\n");
        out << '\n' << table << '\n';
        std::vector<int> failed;
        for (const auto& r : results) {
          out << "criterion " << r.id << " " << r.title << ": " << (r.pass() ? "PASS" : "FAIL") << '\n';
          if (!r.pass()) failed.push_back(r.id);
        }
        if (failed.empty()) return kExitOk;
        err << "failed criteria:";
        for (int id : failed) err << ' ' << id;
        err << '\n';
        return kExitAcceptance;
      },
      err);
}

}  // namespace coolheat
