#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coolheat/analysis.hpp"
#include "coolheat/atomic_structure.hpp"
#include "coolheat/dynamics.hpp"
#include "coolheat/radiation.hpp"
#include "coolheat/rate_model.hpp"

namespace coolheat {

struct CalibrationSetup {
  LaserSource laser;
  std::optional<double> tau_sun_s;
  std::optional<double> tau_dark_s;
  std::optional<double> reference_psd_w_per_hz;
};

struct Scenario {
  SpeciesConfig species;
  double b_gauss = 0.0;
  EffectiveArea effective_area{1e-9};
  std::vector<RadiationSource> shelve;
  std::vector<RadiationSource> deshelve;
  std::size_t trajectories = 10000;
  std::uint64_t seed = 1;
  std::optional<double> quench_rate;  // overrides the species value
  double shelve_max_time_s = 1.0;
  bool full_network = false;  // sample without eliminating fast manifolds
  std::optional<CalibrationSetup> calibration;

  void validate() const {
    species.validate();
    if (b_gauss < 0.0) throw ConfigError("scenario: B_gauss must be >= 0");
    if (trajectories < 1) throw ConfigError("scenario: trajectories must be >= 1");
    if (quench_rate && *quench_rate < 0.0) throw ConfigError("scenario: quench rate must be >= 0");
  }
};

// Shannon entropy of the diagonal populations, in bits.
inline double entropy(const PopulationState& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s -= p[i] * std::log2(p[i]);
  return s;
}

struct EntropyReport {
  double before = 0.0;  // bits
  double after = 0.0;
  double ratio = 0.0;
  PopulationState populations_before;
  PopulationState populations_after;
  std::vector<std::string> labels_before;
  std::vector<std::string> labels_after;
};

struct ShelveResult {
  PopulationState full;      // every sublevel, at the end of the shelve pulse
  PopulationState shelved;   // normalized over the dark manifold(s)
  std::vector<std::string> shelved_labels;
  double initial_entropy = 0.0;
  double entropy = 0.0;
  double duration_s = 0.0;
};

class ShelveNotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline std::size_t ground_manifold(const SpeciesConfig& cfg) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cfg.manifolds.size(); ++i)
    if (cfg.manifolds[i].energy_thz < cfg.manifolds[best].energy_thz) best = i;
  return best;
}

inline std::vector<bool> sublevel_mask(const SpeciesConfig& cfg, Classification c) {
  return classification_mask(cfg, c);
}

inline std::vector<std::string> masked_labels(const RateMatrix& m, const std::vector<bool>& mask) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(m.labels()[i]);
  return out;
}

inline std::vector<bool> mask_by_classification(const SpeciesConfig& cfg, const RateMatrix& m, Classification c) {
  std::vector<bool> mask(m.dimension());
  for (std::size_t i = 0; i < m.dimension(); ++i)
    mask[i] = cfg.manifolds[cfg.manifold_index(m.manifolds()[i])].classification == c;
  return mask;
}

inline GeneratorOptions deshelve_options(const Scenario& sc) {
  GeneratorOptions o;
  o.include_quench = true;
  o.include_repump = false;
  o.quench_rate = sc.quench_rate;
  return o;
}

}  // namespace detail

inline RateMatrix shelve_generator(const Scenario& sc) {
  auto channels = build_channel_table(sc.species, sc.b_gauss);
  GeneratorOptions o;
  o.include_repump = true;
  o.quench_rate = sc.quench_rate;
  return assemble_generator(sc.species, channels, sc.shelve, sc.effective_area, o);
}

inline RateMatrix reduce_fast(const SpeciesConfig& cfg, RateMatrix m) {
  for (const auto& man : cfg.manifolds)
    if (man.classification == Classification::fast_excited) m = eliminate_fast_manifold(m, man.label);
  return m;
}

// Deshelve-phase generator for arbitrary drives (spontaneous, stimulated,
// quench; no repump). Reduced unless `full` is set.
inline RateMatrix deshelve_generator(const Scenario& sc, const std::vector<SpectralDrive>& drives, bool full) {
  auto channels = build_channel_table(sc.species, sc.b_gauss);
  auto m = assemble_generator(sc.species, channels, drives, detail::deshelve_options(sc));
  return full ? m : reduce_fast(sc.species, std::move(m));
}

inline std::vector<SpectralDrive> scenario_drives(const Scenario& sc, const std::vector<RadiationSource>& sources) {
  return make_drives(sources, [&](const RadiationSource& s) {
    return spectral_drive(s, sc.species, Coupling::through(sc.effective_area));
  });
}

inline RateMatrix deshelve_generator(const Scenario& sc, bool full = false) {
  return deshelve_generator(sc, scenario_drives(sc, sc.deshelve), full);
}

// Shelve phase from the uniform ground-manifold mixture: the shelve
// generator is evolved (doubling the pulse length from 1 us) until the dark
// manifold holds at least 1 - 1e-6 of the population.
inline ShelveResult simulate_shelve(const Scenario& sc) {
  sc.validate();
  RateMatrix gen = shelve_generator(sc);
  const auto& cfg = sc.species;
  std::size_t ground = detail::ground_manifold(cfg);
  std::vector<bool> ground_mask = gen.manifold_mask(cfg.manifolds[ground].label);
  std::vector<bool> dark = detail::mask_by_classification(cfg, gen, Classification::dark);
  PopulationState p0 = PopulationState::uniform_over(ground_mask);

  double t = 1e-6;
  PopulationState p = evolve(gen, p0, t);
  while (p.mass(dark) < 1.0 - 1e-6) {
    t *= 2.0;
    if (t > sc.shelve_max_time_s) {
      std::string why;
      try {
        double ss = steady_state(gen).mass(dark);
        why = "steady-state shelved fraction is " + std::to_string(ss) +
              (ss < 1.0 - 1e-6 ? " (shelve light leaves a dark state or pumps too weakly)" : "");
      } catch (const NumericalError& e) {
        why = e.what();
      }
      throw ShelveNotConverged("shelve did not reach 1 - 1e-6 within " + std::to_string(sc.shelve_max_time_s) +
                               " s: shelved fraction " + std::to_string(p.mass(dark)) + "; " + why);
    }
    p = evolve(gen, p0, t);
  }
  ShelveResult r;
  r.full = p;
  r.shelved = p.restricted(dark);
  r.shelved_labels = detail::masked_labels(gen, dark);
  r.initial_entropy = entropy(p0);
  r.entropy = entropy(r.shelved);
  r.duration_s = t;
  return r;
}

// Steady state of the shelve generator restricted to the dark manifold.
inline PopulationState shelve_steady_state(const Scenario& sc) {
  RateMatrix gen = shelve_generator(sc);
  return steady_state(gen).restricted(detail::mask_by_classification(sc.species, gen, Classification::dark));
}

// Monte Carlo shelve: occupation of the dark manifold at first entry,
// sampled on the full shelve generator.
inline std::vector<double> shelve_occupation_mc(const Scenario& sc, std::size_t n, std::uint64_t seed,
                                                unsigned threads = 1) {
  RateMatrix gen = shelve_generator(sc);
  const auto& cfg = sc.species;
  auto ground = gen.manifold_mask(cfg.manifolds[detail::ground_manifold(cfg)].label);
  auto dark = detail::mask_by_classification(cfg, gen, Classification::dark);
  auto samples = sample_dark_times(gen, PopulationState::uniform_over(ground), dark, n, seed, threads);
  std::vector<double> counts(gen.dimension(), 0.0);
  for (const auto& s : samples) counts[s.terminal] += 1.0;
  std::vector<double> out;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (dark[i]) out.push_back(counts[i] / static_cast<double>(n));
  return out;
}

struct DeshelveResult {
  std::vector<DarkTimeSample> samples;
  std::vector<std::string> labels;  // index space of `terminal`
  EntropyReport entropy;
  ShelveResult shelve;
};

// Distribution over final sublevels after the bright-state repump: terminal
// states in a bright manifold with a repump into the ground manifold are
// spread evenly over the ground sublevels.
inline std::pair<PopulationState, std::vector<std::string>> terminal_distribution(
    const Scenario& sc, const RateMatrix& gen, const std::vector<DarkTimeSample>& samples) {
  const auto& cfg = sc.species;
  std::string ground = cfg.manifolds[detail::ground_manifold(cfg)].label;
  std::vector<double> counts(gen.dimension(), 0.0);
  for (const auto& s : samples) counts[s.terminal] += 1.0;
  std::vector<bool> ground_mask = gen.manifold_mask(ground);
  auto n_ground = static_cast<double>(std::count(ground_mask.begin(), ground_mask.end(), true));
  std::vector<double> mapped(gen.dimension(), 0.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0.0) continue;
    if (cfg.repump && gen.manifolds()[i] == cfg.repump->from && cfg.repump->to == ground) {
      for (std::size_t g = 0; g < counts.size(); ++g)
        if (ground_mask[g]) mapped[g] += counts[i] / n_ground;
    } else {
      mapped[i] += counts[i];
    }
  }
  std::vector<double> p;
  std::vector<std::string> labels;
  double total = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < mapped.size(); ++i)
    if (ground_mask[i] || mapped[i] > 0.0) {
      p.push_back(mapped[i] / total);
      labels.push_back(gen.labels()[i]);
    }
  return {PopulationState(std::move(p)), std::move(labels)};
}

namespace detail {

inline DeshelveResult run_dark_phase(const Scenario& sc, const std::vector<RadiationSource>& sources,
                                     unsigned threads) {
  DeshelveResult r;
  r.shelve = simulate_shelve(sc);
  RateMatrix gen = deshelve_generator(sc, scenario_drives(sc, sources), sc.full_network);
  auto dark = mask_by_classification(sc.species, gen, Classification::dark);
  auto bright = mask_by_classification(sc.species, gen, Classification::bright);
  PopulationState init = PopulationState::embedded(r.shelve.shelved, dark);
  r.samples = sample_dark_times(gen, init, bright, sc.trajectories, sc.seed, threads);
  r.labels = gen.labels();
  auto [after, after_labels] = terminal_distribution(sc, gen, r.samples);
  r.entropy.before = r.shelve.entropy;
  r.entropy.populations_before = r.shelve.shelved;
  r.entropy.labels_before = r.shelve.shelved_labels;
  r.entropy.after = entropy(after);
  r.entropy.populations_after = std::move(after);
  r.entropy.labels_after = std::move(after_labels);
  r.entropy.ratio = r.entropy.after > 0.0 ? r.entropy.before / r.entropy.after
                                          : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace detail

// Deshelve with the scenario's deshelve light; dark times end on entry into
// any bright manifold.
inline DeshelveResult simulate_deshelve(const Scenario& sc, unsigned threads = 1) {
  sc.validate();
  return detail::run_dark_phase(sc, sc.deshelve, threads);
}

// Dark times with no deshelve light: natural decay and quench only.
inline DeshelveResult dark_control(const Scenario& sc, unsigned threads = 1) {
  sc.validate();
  if (!sc.deshelve.empty()) throw ConfigError("dark_control: deshelve sources must be empty");
  return detail::run_dark_phase(sc, {}, threads);
}

// Exact mean dark time of the deshelve generator for the given drives,
// starting from the shelved distribution.
inline double mean_dark_time(const Scenario& sc, const PopulationState& shelved,
                             const std::vector<SpectralDrive>& drives) {
  RateMatrix gen = deshelve_generator(sc, drives, false);
  auto dark = detail::mask_by_classification(sc.species, gen, Classification::dark);
  auto bright = detail::mask_by_classification(sc.species, gen, Classification::bright);
  return mean_first_passage_time(gen, PopulationState::embedded(shelved, dark), bright);
}

// Light-induced part of the escape rate: 1/<dark time> with the drives
// minus 1/<dark time> without.
inline double stimulated_escape_rate(const Scenario& sc, const PopulationState& shelved,
                                     const std::vector<SpectralDrive>& drives) {
  return 1.0 / mean_dark_time(sc, shelved, drives) - 1.0 / mean_dark_time(sc, shelved, {});
}

// The transition that empties the dark manifold through the fast one.
inline std::size_t deshelve_transition(const SpeciesConfig& cfg) {
  for (std::size_t i = 0; i < cfg.transitions.size(); ++i) {
    const auto& t = cfg.transitions[i];
    if (t.rank == 1 && cfg.manifolds[cfg.manifold_index(t.lower)].classification == Classification::dark &&
        cfg.manifolds[cfg.manifold_index(t.upper)].classification == Classification::fast_excited)
      return i;
  }
  throw ConfigError("species has no dark -> fast-excited E1 transition");
}

inline PolarizationGeometry deshelve_geometry(const Scenario& sc) {
  for (const auto& s : sc.deshelve)
    if (const auto* th = std::get_if<ThermalSource>(&s)) return th->geometry;
  return PolarizationGeometry::unpolarized(constants::pi / 2);
}

namespace detail {

// Solves f(x) = target for increasing f with f(0) = 0 on x > 0, starting
// from a linear extrapolation and bracketing in log space.
inline double solve_increasing(const std::function<double(double)>& f, double target, double probe) {
  double f_probe = f(probe);
  if (!(f_probe > 0.0)) throw NumericalError("solve_increasing: model gives no response");
  double lo = probe * target / f_probe, hi = lo;
  while (f(lo) > target) lo *= 0.5;
  while (f(hi) < target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Frequency-flat PSD (W/Hz, both polarizations) on the deshelve transition
// whose light-induced escape rate equals 1/tau_sun - 1/tau_dark.
inline double infer_psd(double tau_sun, double tau_dark, EffectiveArea area, const Scenario& sc) {
  if (!(tau_sun > 0.0) || !(tau_sun < tau_dark)) throw ConfigError("infer_psd: need 0 < tau_sun < tau_dark");
  Scenario s = sc;
  s.effective_area = area;
  const double target = 1.0 / tau_sun - 1.0 / tau_dark;
  const PopulationState shelved = simulate_shelve(s).shelved;
  const std::size_t tr = deshelve_transition(s.species);
  const PolarizationGeometry geom = deshelve_geometry(s);
  auto rate = [&](double psd) {
    return stimulated_escape_rate(s, shelved, {flat_spectral_drive(psd, geom, tr, Coupling::through(area))});
  };
  return detail::solve_increasing(rate, target, 1e-21);
}

inline double psd_consistency(double laser_psd, double sunlight_psd) {
  if (!(laser_psd > 0.0) || !(sunlight_psd > 0.0)) throw ConfigError("psd_consistency: PSDs must be > 0");
  return std::max(laser_psd, sunlight_psd) / std::min(laser_psd, sunlight_psd);
}

struct CalibrationPoint {
  double power_w = 0.0;
  double tau_s = 0.0;
};

struct CalibrationResult {
  double effective_area = 0.0;  // m^2
  double fit_residual = 0.0;    // sum of squared rate residuals, s^-2
  std::optional<double> inferred_psd;           // W/Hz
  std::optional<double> psd_ratio_vs_reference;
  double tau_dark = 0.0;
  std::size_t points_used = 0;
  std::vector<std::string> warnings;
};

// Predicted light-induced escape rate for a laser at `power` through `area`.
inline double laser_escape_rate(const Scenario& sc, const PopulationState& shelved, const LaserSource& laser,
                                double power, double area) {
  LaserSource l = laser;
  l.power_w = power;
  return stimulated_escape_rate(sc, shelved, {laser_spectral_drive(l, sc.species, EffectiveArea(area))});
}

// Least-squares effective area from (power, deshelve time) pairs:
// minimizes sum_i (1/tau_i - 1/tau_dark - k(A) P_i)^2 where k(A) P is the
// light-induced escape rate of the far-detuned laser model.
inline CalibrationResult calibrate_effective_area(const std::vector<CalibrationPoint>& data,
                                                  const LaserSource& laser, const Scenario& sc,
                                                  std::optional<double> tau_dark_override = std::nullopt) {
  CalibrationResult res;
  const PopulationState shelved = simulate_shelve(sc).shelved;
  res.tau_dark = tau_dark_override.value_or(mean_dark_time(sc, shelved, {}));
  std::vector<CalibrationPoint> used;
  for (const auto& p : data) {
    if (!(p.power_w > 0.0) || !(p.tau_s > 0.0)) {
      res.warnings.push_back("skipped point with non-positive power or time");
      continue;
    }
    if (!(p.tau_s < res.tau_dark)) {
      res.warnings.push_back("excluded point P=" + std::to_string(p.power_w) + " W: tau " +
                             std::to_string(p.tau_s) + " s is not shorter than the dark lifetime");
      continue;
    }
    used.push_back(p);
  }
  if (used.empty()) throw NumericalError("calibrate_effective_area: no point has tau < tau_dark");
  res.points_used = used.size();

  auto residual = [&](double log_inv_area) {
    double area = std::exp(-log_inv_area);
    double ss = 0.0;
    for (const auto& p : used) {
      double y = 1.0 / p.tau_s - 1.0 / res.tau_dark;
      double e = y - laser_escape_rate(sc, shelved, laser, p.power_w, area);
      ss += e * e;
    }
    return ss;
  };
  // Start from the first point solved exactly, then golden-section search
  // on log(1/A) over a factor-of-100 bracket.
  const auto& p0 = used.front();
  double y0 = 1.0 / p0.tau_s - 1.0 / res.tau_dark;
  double inv_area0 = detail::solve_increasing(
      [&](double inv_area) { return laser_escape_rate(sc, shelved, laser, p0.power_w, 1.0 / inv_area); }, y0, 1e8);
  double a = std::log(inv_area0) - std::log(100.0), b = std::log(inv_area0) + std::log(100.0);
  if (used.size() == 1) {
    a = b = std::log(inv_area0);
  } else {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = residual(c), fd = residual(d);
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = residual(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = residual(d);
      }
    }
  }
  double best = 0.5 * (a + b);
  res.effective_area = std::exp(-best);
  res.fit_residual = residual(best);

  if (sc.calibration && sc.calibration->tau_sun_s) {
    double tau_dark = sc.calibration->tau_dark_s.value_or(res.tau_dark);
    res.inferred_psd = infer_psd(*sc.calibration->tau_sun_s, tau_dark, EffectiveArea(res.effective_area), sc);
    if (sc.calibration->reference_psd_w_per_hz)
      res.psd_ratio_vs_reference = psd_consistency(*res.inferred_psd, *sc.calibration->reference_psd_w_per_hz);
  }
  return res;
}

}  // namespace coolheat
