#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coolheat/experiment.hpp"
#include "coolheat/species_io.hpp"

namespace coolheat {

// Directory searched for relative species paths that do not resolve next to
// the scenario file.
inline constexpr const char* kDataDirEnv = "COOLHEAT_DATA_DIR";

namespace detail {

inline PolarizationGeometry parse_geometry(const nlohmann::json& j, const std::string& where) {
  double theta = (j.contains("angle_deg") ? j.at("angle_deg").get<double>() : 90.0) * constants::pi / 180.0;
  std::string pol = j.contains("polarization") ? j.at("polarization").get<std::string>() : "unpolarized";
  if (pol == "unpolarized") return PolarizationGeometry::unpolarized(theta);
  if (pol == "linear") {
    double psi = (j.contains("linear_angle_deg") ? j.at("linear_angle_deg").get<double>() : 90.0) *
                 constants::pi / 180.0;
    return PolarizationGeometry::linear(theta, psi);
  }
  if (pol == "sigma+") return PolarizationGeometry::circular(theta, +1);
  if (pol == "sigma-") return PolarizationGeometry::circular(theta, -1);
  throw ConfigError(where + ": polarization must be unpolarized, linear, sigma+ or sigma-");
}

inline nlohmann::json geometry_json(const PolarizationGeometry& g) {
  nlohmann::json j;
  j["angle_deg"] = g.propagation_angle * 180.0 / constants::pi;
  switch (g.state) {
    case PolarizationGeometry::State::unpolarized: j["polarization"] = "unpolarized"; break;
    case PolarizationGeometry::State::linear:
      j["polarization"] = "linear";
      j["linear_angle_deg"] = g.linear_angle * 180.0 / constants::pi;
      break;
    case PolarizationGeometry::State::circular:
      j["polarization"] = g.circular_sign >= 0 ? "sigma+" : "sigma-";
      break;
  }
  return j;
}

inline LaserSource parse_laser(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"type", "transition", "detuning_GHz", "power_W", "linewidth_MHz", "angle_deg",
                          "polarization", "linear_angle_deg"},
                      where);
  LaserSource l;
  l.transition = required<std::string>(j, "transition", where);
  l.detuning_hz = j.value("detuning_GHz", 0.0) * 1e9;
  l.power_w = required<double>(j, "power_W", where);
  l.linewidth_hz = j.value("linewidth_MHz", 0.0) * 1e6;
  l.geometry = parse_geometry(j, where);
  l.validate();
  return l;
}

inline RadiationSource parse_source(const nlohmann::json& j, const std::string& where) {
  std::string type = required<std::string>(j, "type", where);
  if (type == "laser") return parse_laser(j, where);
  if (type != "thermal") throw ConfigError(where + ": source type must be thermal or laser");
  reject_unknown_keys(j, {"type", "temperature_K", "efficiency", "polarization_modes", "angle_deg",
                          "polarization", "linear_angle_deg", "transitions"},
                      where);
  ThermalSource t;
  t.temperature_k = required<double>(j, "temperature_K", where);
  if (j.contains("efficiency")) {
    const auto& e = j.at("efficiency");
    if (e.is_number()) {
      t.efficiency = e.get<double>();
    } else if (e.is_array()) {
      // [[frequency THz, efficiency], ...]
      for (const auto& row : e) t.efficiency_table.emplace_back(row.at(0).get<double>() * 1e12, row.at(1).get<double>());
    } else {
      throw ConfigError(where + ": efficiency must be a number or a [[THz, eta], ...] table");
    }
  }
  t.polarization_modes = j.value("polarization_modes", 2);
  t.geometry = parse_geometry(j, where);
  if (j.contains("transitions")) t.transitions = j.at("transitions").get<std::vector<std::string>>();
  t.validate();
  return t;
}

inline std::vector<RadiationSource> parse_phase(const nlohmann::json& phases, const char* name) {
  std::vector<RadiationSource> out;
  if (!phases.contains(name)) return out;
  const auto& ph = phases.at(name);
  std::string where = std::string("scenario.phases.") + name;
  reject_unknown_keys(ph, {"sources"}, where);
  if (!ph.contains("sources")) return out;
  for (const auto& s : ph.at("sources")) out.push_back(parse_source(s, where));
  return out;
}

inline nlohmann::json source_json(const RadiationSource& src) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        nlohmann::json j = geometry_json(s.geometry);
        if constexpr (std::is_same_v<T, ThermalSource>) {
          j["type"] = "thermal";
          j["temperature_K"] = s.temperature_k;
          if (s.efficiency_table.empty()) {
            j["efficiency"] = s.efficiency;
          } else {
            for (const auto& [nu, eta] : s.efficiency_table) j["efficiency"].push_back({nu / 1e12, eta});
          }
          j["polarization_modes"] = s.polarization_modes;
          if (!s.transitions.empty()) j["transitions"] = s.transitions;
        } else {
          j["type"] = "laser";
          j["transition"] = s.transition;
          j["detuning_GHz"] = s.detuning_hz / 1e9;
          j["power_W"] = s.power_w;
          j["linewidth_MHz"] = s.linewidth_hz / 1e6;
        }
        return j;
      },
      src);
}

}  // namespace detail

inline std::filesystem::path resolve_data_path(const std::string& name, const std::filesystem::path& base_dir) {
  std::filesystem::path p(name);
  if (p.is_absolute()) return p;
  if (std::filesystem::exists(base_dir / p)) return base_dir / p;
  if (const char* env = std::getenv(kDataDirEnv)) {
    std::filesystem::path q = std::filesystem::path(env) / p;
    if (std::filesystem::exists(q)) return q;
  }
  return base_dir / p;
}

// Scenario JSON. `base_dir` anchors relative species paths.
inline Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  using namespace detail;
  reject_unknown_keys(j, {"species_file", "B_gauss", "effective_area_m2", "phases", "trajectories", "seed",
                          "quench_rate_per_s", "shelve_max_time_s", "sampling_network", "calibration",
                          "description"},
                      "scenario");
  Scenario sc;
  sc.species = load_species(resolve_data_path(required<std::string>(j, "species_file", "scenario"), base_dir));
  sc.b_gauss = required<double>(j, "B_gauss", "scenario");
  sc.effective_area = EffectiveArea(required<double>(j, "effective_area_m2", "scenario"));
  if (j.contains("phases")) {
    const auto& ph = j.at("phases");
    reject_unknown_keys(ph, {"shelve", "deshelve"}, "scenario.phases");
    sc.shelve = parse_phase(ph, "shelve");
    sc.deshelve = parse_phase(ph, "deshelve");
  }
  sc.trajectories = j.value("trajectories", std::size_t{10000});
  sc.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("quench_rate_per_s")) sc.quench_rate = j.at("quench_rate_per_s").get<double>();
  sc.shelve_max_time_s = j.value("shelve_max_time_s", 1.0);
  if (j.contains("sampling_network")) {
    auto net = j.at("sampling_network").get<std::string>();
    if (net != "reduced" && net != "full") throw ConfigError("scenario: sampling_network must be reduced or full");
    sc.full_network = net == "full";
  }
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    reject_unknown_keys(c, {"laser", "tau_sun_s", "tau_dark_s", "reference_psd_nW_per_THz"}, "scenario.calibration");
    CalibrationSetup cal;
    cal.laser = parse_laser(required<nlohmann::json>(c, "laser", "scenario.calibration"), "scenario.calibration.laser");
    if (c.contains("tau_sun_s")) cal.tau_sun_s = c.at("tau_sun_s").get<double>();
    if (c.contains("tau_dark_s")) cal.tau_dark_s = c.at("tau_dark_s").get<double>();
    if (c.contains("reference_psd_nW_per_THz"))
      cal.reference_psd_w_per_hz = c.at("reference_psd_nW_per_THz").get<double>() / constants::nw_per_thz_per_w_per_hz;
    sc.calibration = cal;
  }
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  auto j = parse_json_text(read_text_file(path), path.string());
  try {
    return scenario_from_json(j, path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace coolheat
