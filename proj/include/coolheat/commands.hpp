#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "coolheat/analysis.hpp"
#include "coolheat/experiment.hpp"
#include "coolheat/io.hpp"
#include "coolheat/scenario_io.hpp"

namespace coolheat {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitAcceptance = 4;

// Runs `body`, mapping exceptions onto the exit-code contract.
inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

struct PlanckArgs {
  double wavelength_nm = 614.0;
  double temperature_k = 5800.0;
  double efficiency = 1.0;
  int modes = 1;
};

inline int cmd_planck(const PlanckArgs& a, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        if (!(a.wavelength_nm > 0.0)) throw ConfigError("--wavelength-nm must be > 0");
        if (!(a.temperature_k > 0.0)) throw ConfigError("--temperature-K must be > 0");
        if (!(a.efficiency >= 0.0 && a.efficiency <= 1.0)) throw ConfigError("--efficiency must lie in [0, 1]");
        if (a.modes != 1 && a.modes != 2) throw ConfigError("--modes must be 1 or 2");
        ThermalSource src;
        src.temperature_k = a.temperature_k;
        src.efficiency = a.efficiency;
        src.polarization_modes = a.modes;
        const double nu = wavelength_nm_to_hz(a.wavelength_nm);
        const double per_pol = planck_single_mode_psd(nu, a.temperature_k);
        const double delivered = delivered_psd(src, nu);
        const double k = constants::nw_per_thz_per_w_per_hz;
        out << "quantity,value,unit\n"
            << "frequency," << format_double(nu) << ",Hz\n"
            << "photon_occupation," << format_double(bose_occupation(nu, a.temperature_k)) << ",photons/mode\n"
            << "psd_per_polarization," << format_double(per_pol) << ",W/Hz\n"
            << "psd_per_polarization," << format_double(per_pol * k) << ",nW/THz\n"
            << "delivered_psd," << format_double(delivered) << ",W/Hz\n"
            << "delivered_psd," << format_double(delivered * k) << ",nW/THz\n";
        return kExitOk;
      },
      err);
}

enum class Phase { shelve, deshelve, dark_control };

inline Phase parse_phase_name(const std::string& s) {
  if (s == "shelve") return Phase::shelve;
  if (s == "deshelve") return Phase::deshelve;
  if (s == "dark-control") return Phase::dark_control;
  throw ConfigError("--phase must be shelve, deshelve or dark-control");
}

struct SimulateArgs {
  std::filesystem::path scenario;
  std::string phase = "deshelve";
  std::filesystem::path out = "out";
  bool dump_generator = false;
  unsigned threads = 1;  // wall time only; not part of the manifest
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trajectories;
  std::size_t bootstrap = 1000;
  std::size_t bins = 40;
};

namespace detail {

inline std::vector<double> survival_grid(const std::vector<double>& darks, std::size_t points = 201) {
  double tmax = darks.empty() ? 1.0 : *std::max_element(darks.begin(), darks.end());
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = tmax * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

inline nlohmann::json provenance_json(const RunManifest& m) {
  return {{"run_manifest_sha256", m.hash()},
          {"config_sha256", m.config_hash},
          {"seed", m.seed},
          {"code_version", m.code_version}};
}

inline void dump_generator(const std::filesystem::path& dir, const RateMatrix& gen, const RunManifest& m) {
  std::ostringstream os;
  os << manifest_comment(m);
  gen.write_csv(os);
  write_text_file(dir / "generator.csv", os.str());
}

}  // namespace detail

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        Phase phase = parse_phase_name(a.phase);
        if (!std::filesystem::exists(a.scenario)) throw ConfigError("scenario file not found: " + a.scenario.string());
        Scenario sc = load_scenario(a.scenario);
        if (a.seed) sc.seed = *a.seed;
        if (a.trajectories) sc.trajectories = *a.trajectories;
        if (a.threads < 1) throw ConfigError("--threads must be >= 1");
        if (a.bins < 3) throw ConfigError("--bins must be >= 3");
        if (a.bootstrap != 0 && a.bootstrap < 100) throw ConfigError("--bootstrap must be 0 or >= 100");

        auto j = parse_json_text(read_text_file(a.scenario), a.scenario.string());
        auto species_path = resolve_data_path(j.at("species_file").get<std::string>(), a.scenario.parent_path());
        RunManifest m = RunManifest::for_configs("simulate", {a.scenario, species_path});
        m.seed = sc.seed;
        m.output_dir = a.out.string();
        m.arguments = {{"phase", a.phase},
                       {"trajectories", sc.trajectories},
                       {"dump_generator", a.dump_generator},
                       {"bootstrap", a.bootstrap},
                       {"bins", a.bins}};
        std::filesystem::create_directories(a.out);

        nlohmann::json report;
        report["provenance"] = detail::provenance_json(m);
        report["phase"] = a.phase;
        report["B_gauss"] = sc.b_gauss;
        report["effective_area_m2"] = sc.effective_area.value_m2;

        if (phase == Phase::shelve) {
          ShelveResult r = simulate_shelve(sc);
          std::ostringstream pop;
          pop << manifest_comment(m) << "sublevel,population\n";
          for (std::size_t i = 0; i < r.shelved.size(); ++i)
            pop << r.shelved_labels[i] << ',' << format_double(r.shelved[i]) << '\n';
          write_text_file(a.out / "populations.csv", pop.str());
          report["shelve"] = {{"duration_s", r.duration_s},
                              {"initial_entropy_bits", r.initial_entropy},
                              {"entropy_bits", r.entropy},
                              {"populations", populations_json(r.shelved, r.shelved_labels)}};
          if (a.dump_generator) detail::dump_generator(a.out, shelve_generator(sc), m);
          out << "shelved entropy: " << format_double(r.entropy) << " bits after " << r.duration_s << " s\n";
        } else {
          if (phase == Phase::dark_control) sc.deshelve.clear();
          DeshelveResult r = phase == Phase::dark_control ? dark_control(sc, a.threads) : simulate_deshelve(sc, a.threads);
          auto darks = dark_time_values(r.samples);
          write_text_file(a.out / "darks.csv", dark_times_csv(r.samples, r.labels, &m));
          write_text_file(a.out / "survival.csv", survival_csv(survival_curve(darks, detail::survival_grid(darks)), &m));
          if (a.dump_generator) detail::dump_generator(a.out, deshelve_generator(sc, sc.full_network), m);

          FitResult mle = fit_exponential_mle(darks);
          nlohmann::json fits = nlohmann::json::array({fit_json(mle)});
          try {
            fits.push_back(fit_json(fit_exponential_binned(darks, a.bins)));
          } catch (const std::exception& e) {
            fits.push_back({{"method", "binned-ls"}, {"error", e.what()}});
          }
          report["entropy"] = entropy_json(r.entropy);
          report["fits"] = fits;
          if (a.bootstrap > 0) {
            auto [lo, hi] = bootstrap_ci(darks, a.bootstrap, 0.95, sc.seed);
            report["bootstrap"] = {{"level", 0.95}, {"resamples", a.bootstrap}, {"tau_low_s", lo}, {"tau_high_s", hi}};
          }
          const double tau_dark_model = mean_dark_time(sc, r.shelve.shelved, {});
          report["model"] = {{"mean_dark_time_s", mean_dark_time(sc, r.shelve.shelved, scenario_drives(sc, sc.deshelve))},
                             {"dark_lifetime_s", tau_dark_model}};
          if (phase == Phase::deshelve) {
            if (mle.tau < tau_dark_model) {
              double psd = infer_psd(mle.tau, tau_dark_model, sc.effective_area, sc);
              report["inferred_psd"] = {{"W_per_Hz", psd}, {"nW_per_THz", psd * constants::nw_per_thz_per_w_per_hz}};
            } else {
              report["inferred_psd"] = nullptr;
            }
          }
          out << "tau (mle): " << format_double(mle.tau) << " s +/- " << format_double(mle.sigma_tau) << " s over "
              << darks.size() << " trajectories\n"
              << "entropy: " << format_double(r.entropy.before) << " -> " << format_double(r.entropy.after)
              << " bits (ratio " << format_double(r.entropy.ratio) << ")\n";
        }
        write_text_file(a.out / "report.json", report.dump(2) + "\n");
        write_manifest(a.out, m);
        return kExitOk;
      },
      err);
}

struct FitArgs {
  std::filesystem::path darks;
  std::string method = "mle";  // mle | binned | both
  std::size_t bootstrap = 0;
  std::size_t bins = 40;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out;
};

inline int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        if (a.method != "mle" && a.method != "binned" && a.method != "both")
          throw ConfigError("--method must be mle, binned or both");
        if (a.bootstrap != 0 && a.bootstrap < 100) throw ConfigError("--bootstrap must be 0 or >= 100");
        if (!std::filesystem::exists(a.darks)) throw ConfigError("dark-time file not found: " + a.darks.string());
        auto darks = parse_dark_times_csv(read_text_file(a.darks));
        if (darks.empty()) throw ConfigError(a.darks.string() + ": no dark times");
        RunManifest m = RunManifest::for_configs("fit", {a.darks});
        m.seed = a.seed;
        m.arguments = {{"method", a.method}, {"bootstrap", a.bootstrap}, {"bins", a.bins}};
        nlohmann::json j;
        j["provenance"] = detail::provenance_json(m);
        j["fits"] = nlohmann::json::array();
        if (a.method != "binned") j["fits"].push_back(fit_json(fit_exponential_mle(darks)));
        if (a.method != "mle") j["fits"].push_back(fit_json(fit_exponential_binned(darks, a.bins)));
        if (a.bootstrap > 0) {
          auto [lo, hi] = bootstrap_ci(darks, a.bootstrap, 0.95, a.seed);
          j["bootstrap"] = {{"level", 0.95}, {"resamples", a.bootstrap}, {"tau_low_s", lo}, {"tau_high_s", hi}};
        }
        std::string text = j.dump(2) + "\n";
        if (a.out) write_text_file(*a.out, text);
        out << text;
        return kExitOk;
      },
      err);
}

struct CalibrateArgs {
  std::filesystem::path points;
  std::filesystem::path scenario;
  std::optional<double> tau_dark_s;
  std::optional<std::filesystem::path> out;
};

inline nlohmann::json calibration_json(const CalibrationResult& r) {
  nlohmann::json j = {{"effective_area_m2", r.effective_area},
                      {"fit_residual_per_s2", r.fit_residual},
                      {"tau_dark_s", r.tau_dark},
                      {"points_used", r.points_used},
                      {"warnings", r.warnings}};
  if (r.inferred_psd)
    j["inferred_psd"] = {{"W_per_Hz", *r.inferred_psd},
                         {"nW_per_THz", *r.inferred_psd * constants::nw_per_thz_per_w_per_hz}};
  if (r.psd_ratio_vs_reference) j["psd_ratio_vs_reference"] = *r.psd_ratio_vs_reference;
  return j;
}

inline int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        for (const auto& p : {a.points, a.scenario})
          if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p.string());
        Scenario sc = load_scenario(a.scenario);
        if (!sc.calibration) throw ConfigError(a.scenario.string() + ": scenario has no calibration block");
        auto points = parse_calibration_csv(read_text_file(a.points));
        auto tau_dark = a.tau_dark_s ? a.tau_dark_s : sc.calibration->tau_dark_s;
        CalibrationResult r = calibrate_effective_area(points, sc.calibration->laser, sc, tau_dark);
        RunManifest m = RunManifest::for_configs("calibrate", {a.points, a.scenario});
        m.seed = sc.seed;
        m.arguments = {{"tau_dark_s", tau_dark ? nlohmann::json(*tau_dark) : nlohmann::json(nullptr)}};
        nlohmann::json j = calibration_json(r);
        j["provenance"] = detail::provenance_json(m);
        for (const auto& w : r.warnings) err << "warning: " << w << '\n';
        std::string text = j.dump(2) + "\n";
        if (a.out) write_text_file(*a.out, text);
        out << text;
        return kExitOk;
      },
      err);
}

}  // namespace coolheat
