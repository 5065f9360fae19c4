#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "coolheat/atomic_structure.hpp"

namespace coolheat {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline HalfInt half_int_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string())
    throw ConfigError(where + ": '" + key + "' must be a string such as \"5/2\"");
  return HalfInt::parse(v.get<std::string>());
}

inline Classification parse_classification(const std::string& s, const std::string& where) {
  if (s == "bright") return Classification::bright;
  if (s == "dark") return Classification::dark;
  if (s == "fast-excited") return Classification::fast_excited;
  throw ConfigError(where + ": classification must be bright, dark or fast-excited");
}

inline std::optional<TransferSpec> parse_transfer(const nlohmann::json& root, const char* key) {
  if (!root.contains(key) || root.at(key).is_null()) return std::nullopt;
  const auto& q = root.at(key);
  std::string where = std::string("species.") + key;
  reject_unknown_keys(q, {"from", "to", "rate_per_s"}, where);
  return TransferSpec{required<std::string>(q, "from", where), required<std::string>(q, "to", where),
                      required<double>(q, "rate_per_s", where)};
}

inline nlohmann::json transfer_json(const std::optional<TransferSpec>& t) {
  if (!t) return nullptr;
  return {{"from", t->from}, {"to", t->to}, {"rate_per_s", t->rate}};
}

}  // namespace detail

// Lande g_J for a doublet term named like "D5/2" (L from the letter, S = 1/2,
// electron g_s = 2).
inline std::optional<double> lande_g_doublet(const std::string& label, HalfInt J) {
  if (label.empty()) return std::nullopt;
  static const std::string letters = "SPDFGH";
  auto pos = letters.find(label.front());
  if (pos == std::string::npos || J.twice() == 0) return std::nullopt;
  double L = static_cast<double>(pos);
  double S = 0.5;
  double j = J.value();
  return 1.0 + (j * (j + 1) + S * (S + 1) - L * (L + 1)) / (2.0 * j * (j + 1));
}

inline SpeciesConfig species_from_json(const nlohmann::json& root) {
  using namespace detail;
  reject_unknown_keys(root, {"manifolds", "transitions", "quench", "repump", "provenance"}, "species");
  SpeciesConfig cfg;
  if (root.contains("provenance")) cfg.provenance = root.at("provenance").get<std::string>();
  for (const auto& m : required<nlohmann::json>(root, "manifolds", "species")) {
    std::string where = "species.manifolds";
    reject_unknown_keys(m, {"label", "J", "g_factor", "energy_THz", "classification"}, where);
    ManifoldSpec spec;
    spec.label = required<std::string>(m, "label", where);
    where += "[" + spec.label + "]";
    if (!m.contains("J")) throw ConfigError(where + ": missing key 'J'");
    spec.J = half_int_field(m, "J", where);
    if (m.contains("g_factor")) {
      spec.g_factor = required<double>(m, "g_factor", where);
    } else if (auto g = lande_g_doublet(spec.label, spec.J)) {
      spec.g_factor = *g;
    } else {
      throw ConfigError(where + ": g_factor required (label does not name a doublet term)");
    }
    spec.energy_thz = required<double>(m, "energy_THz", where);
    spec.classification = parse_classification(required<std::string>(m, "classification", where), where);
    cfg.manifolds.push_back(spec);
  }
  for (const auto& t : required<nlohmann::json>(root, "transitions", "species")) {
    std::string where = "species.transitions";
    reject_unknown_keys(t, {"upper", "lower", "wavelength_nm", "A_total_per_s", "multipole"}, where);
    TransitionSpec spec;
    spec.upper = required<std::string>(t, "upper", where);
    spec.lower = required<std::string>(t, "lower", where);
    spec.wavelength_nm = required<double>(t, "wavelength_nm", where);
    spec.A_total = required<double>(t, "A_total_per_s", where);
    if (t.contains("multipole")) {
      auto mp = t.at("multipole").get<std::string>();
      if (mp == "E1")
        spec.rank = 1;
      else if (mp == "E2")
        spec.rank = 2;
      else
        throw ConfigError(where + ": multipole must be E1 or E2");
    }
    cfg.transitions.push_back(spec);
  }
  cfg.quench = parse_transfer(root, "quench");
  cfg.repump = parse_transfer(root, "repump");
  cfg.validate();
  return cfg;
}

inline nlohmann::json species_to_json(const SpeciesConfig& cfg) {
  nlohmann::json root;
  root["provenance"] = cfg.provenance;
  for (const auto& m : cfg.manifolds)
    root["manifolds"].push_back({{"label", m.label},
                                 {"J", m.J.str()},
                                 {"g_factor", m.g_factor},
                                 {"energy_THz", m.energy_thz},
                                 {"classification", to_string(m.classification)}});
  for (const auto& t : cfg.transitions)
    root["transitions"].push_back({{"upper", t.upper},
                                   {"lower", t.lower},
                                   {"wavelength_nm", t.wavelength_nm},
                                   {"A_total_per_s", t.A_total},
                                   {"multipole", t.rank == 1 ? "E1" : "E2"}});
  root["quench"] = detail::transfer_json(cfg.quench);
  root["repump"] = detail::transfer_json(cfg.repump);
  return root;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline SpeciesConfig load_species(const std::filesystem::path& path) {
  return species_from_json(parse_json_text(read_text_file(path), path.string()));
}

}  // namespace coolheat
