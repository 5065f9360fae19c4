#pragma once

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "coolheat/dynamics.hpp"
#include "coolheat/error.hpp"
#include "coolheat/experiment.hpp"
#include "coolheat/species_io.hpp"

namespace coolheat {

inline constexpr const char* kCodeVersion = "0.1.0";

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw NumericalError("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

// Shortest round-trip decimal form, so identical doubles print identically.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, end);
}

struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string code_version = kCodeVersion;
  std::string config_hash;  // sha256 over the config file contents, in order
  nlohmann::json arguments = nlohmann::json::object();

  static RunManifest for_configs(std::string command, const std::vector<std::filesystem::path>& configs) {
    RunManifest m;
    m.command = std::move(command);
    std::string all;
    for (const auto& p : configs) {
      m.config_paths.push_back(p.string());
      all += read_text_file(p);
      all.push_back('\0');
    }
    m.config_hash = sha256_hex(all);
    return m;
  }

  nlohmann::json to_json() const {
    return {{"command", command},           {"config_paths", config_paths}, {"seed", seed},
            {"output_dir", output_dir},     {"code_version", code_version}, {"config_sha256", config_hash},
            {"rng", "philox4x32-10 stream v" + std::to_string(kRngStreamVersion)},
            {"arguments", arguments}};
  }

  std::string hash() const { return sha256_hex(to_json().dump()); }
};

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// manifest.json is the only output that carries a wall-clock timestamp.
inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  nlohmann::json j = m.to_json();
  j["sha256"] = m.hash();
  j["timestamp_utc"] = utc_timestamp();
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

inline std::string manifest_comment(const RunManifest& m) { return "# run_manifest_sha256: " + m.hash() + "\n"; }

inline std::string dark_times_csv(const std::vector<DarkTimeSample>& samples, const std::vector<std::string>& labels,
                                  const RunManifest* m = nullptr) {
  std::ostringstream os;
  if (m) os << manifest_comment(*m);
  os << "trajectory_index,dark_time_s,terminal_sublevel\n";
  for (const auto& s : samples)
    os << s.trajectory_index << ',' << format_double(s.dark_time) << ',' << labels.at(s.terminal) << '\n';
  return os.str();
}

inline std::string survival_csv(const std::vector<std::pair<double, double>>& curve, const RunManifest* m = nullptr) {
  std::ostringstream os;
  if (m) os << manifest_comment(*m);
  os << "time_s,survival_fraction\n";
  for (const auto& [t, s] : curve) os << format_double(t) << ',' << format_double(s) << '\n';
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

// Rows of a headered CSV, skipping '#' comment lines and blank lines.
inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text, std::vector<std::string>& header) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      header = split_csv_line(line);
      have_header = true;
      continue;
    }
    rows.push_back(split_csv_line(line));
  }
  if (!have_header) throw ConfigError("CSV has no header row");
  return rows;
}

inline double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(where + ": not a number: '" + s + "'");
  return v;
}

inline std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("CSV lacks column '" + name + "'");
}

}  // namespace detail

// Dark times from either the simulator's CSV or an external
// `cycle_index, dark_time_s` log.
inline std::vector<double> parse_dark_times_csv(const std::string& text) {
  std::vector<std::string> header;
  auto rows = detail::read_csv_rows(text, header);
  auto col = detail::column(header, "dark_time_s");
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.size() <= col) throw ConfigError("dark-time CSV: short row");
    out.push_back(detail::parse_number(r[col], "dark-time CSV"));
  }
  return out;
}

inline std::vector<CalibrationPoint> parse_calibration_csv(const std::string& text) {
  std::vector<std::string> header;
  auto rows = detail::read_csv_rows(text, header);
  auto pc = detail::column(header, "power_W");
  auto tc = detail::column(header, "tau_s");
  std::vector<CalibrationPoint> out;
  for (const auto& r : rows) {
    if (r.size() <= std::max(pc, tc)) throw ConfigError("calibration CSV: short row");
    out.push_back({detail::parse_number(r[pc], "calibration CSV"), detail::parse_number(r[tc], "calibration CSV")});
  }
  return out;
}

inline nlohmann::json fit_json(const FitResult& f) {
  nlohmann::json j = {{"method", to_string(f.method)},
                      {"tau_s", f.tau},
                      {"sigma_tau_s", f.sigma_tau},
                      {"n_samples", f.n_samples}};
  if (f.method == FitMethod::binned_ls)
    j["weighted_residual"] = f.residual;
  else
    j["log_likelihood"] = f.log_likelihood;
  return j;
}

inline nlohmann::json populations_json(const PopulationState& p, const std::vector<std::string>& labels) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < p.size(); ++i) j[labels.at(i)] = p[i];
  return j;
}

inline nlohmann::json entropy_json(const EntropyReport& e) {
  return {{"before_bits", e.before},
          {"after_bits", e.after},
          {"ratio", e.ratio},
          {"populations_before", populations_json(e.populations_before, e.labels_before)},
          {"populations_after", populations_json(e.populations_after, e.labels_after)}};
}

}  // namespace coolheat
