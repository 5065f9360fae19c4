#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "coolheat/atomic_structure.hpp"
#include "coolheat/constants.hpp"
#include "coolheat/error.hpp"

namespace coolheat {

// Spherical components are indexed q + 1: [0] = sigma-, [1] = pi, [2] = sigma+.
using PolarizationFractions = std::array<double, 3>;

inline constexpr std::size_t q_index(int q) { return static_cast<std::size_t>(q + 1); }

struct PolarizationGeometry {
  enum class State { unpolarized, linear, circular };

  double propagation_angle = constants::pi / 2;  // wavevector vs quantization axis
  State state = State::unpolarized;
  // linear: angle of the field from the plane containing k and the axis.
  double linear_angle = 0.0;
  // circular: +1 drives sigma+ when propagating along the axis.
  int circular_sign = +1;

  static PolarizationGeometry unpolarized(double theta) { return {theta, State::unpolarized, 0.0, 1}; }
  static PolarizationGeometry linear(double theta, double psi) { return {theta, State::linear, psi, 1}; }
  static PolarizationGeometry circular(double theta, int sign) { return {theta, State::circular, 0.0, sign}; }
};

inline PolarizationFractions polarization_fractions(const PolarizationGeometry& g) {
  const double c = std::cos(g.propagation_angle);
  const double s2 = 1.0 - c * c;
  PolarizationFractions f{};
  switch (g.state) {
    case PolarizationGeometry::State::unpolarized:
      // Equal-weight mixture of the two transverse linear polarizations.
      f = {(1.0 + c * c) / 4.0, s2 / 2.0, (1.0 + c * c) / 4.0};
      break;
    case PolarizationGeometry::State::linear: {
      // Field e = cos(psi) e1 + sin(psi) y, e1 = (cos t, 0, -sin t).
      double cp = std::cos(g.linear_angle);
      double pi_part = cp * cp * s2;
      f = {(1.0 - pi_part) / 2.0, pi_part, (1.0 - pi_part) / 2.0};
      break;
    }
    case PolarizationGeometry::State::circular: {
      double h = g.circular_sign >= 0 ? 1.0 : -1.0;
      f = {(c - h) * (c - h) / 4.0, s2 / 2.0, (c + h) * (c + h) / 4.0};
      break;
    }
  }
  for (double& x : f) x = std::clamp(x, 0.0, 1.0);
  return f;
}

// Mean thermal photon number per mode, 1 / (exp(h nu / kT) - 1).
inline double bose_occupation(double frequency_hz, double temperature_k) {
  if (!(frequency_hz > 0.0) || !(temperature_k > 0.0))
    throw DomainError("bose_occupation: frequency and temperature must be > 0");
  double x = constants::planck_h * frequency_hz / (constants::boltzmann_k * temperature_k);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

// Thermal power spectral density of one spatial mode in one polarization,
// h nu / (exp(h nu / kT) - 1), in W/Hz.
inline double planck_single_mode_psd(double frequency_hz, double temperature_k) {
  return constants::planck_h * frequency_hz * bose_occupation(frequency_hz, temperature_k);
}

inline double wavelength_nm_to_hz(double nm) { return constants::speed_of_light / (nm * 1e-9); }

// Beam area that converts delivered spectral power into intensity at the ion.
struct EffectiveArea {
  double value_m2 = 0.0;

  explicit EffectiveArea(double m2) : value_m2(m2) {
    if (!(m2 > 0.0)) throw ConfigError("effective area must be > 0");
  }

  // Frequency-integrated absorption cross-section per unit A coefficient for
  // a matched polarization is 3 lambda^2 / (8 pi); the ratio to the area is
  // the fraction of a delivered mode's occupation the channel sees.
  double coupling(double frequency_hz) const {
    double lambda = constants::speed_of_light / frequency_hz;
    return 3.0 * lambda * lambda / (8.0 * constants::pi * value_m2);
  }
};

// Either a physical effective area or unit coupling (the ion sees the full
// delivered occupation).
struct Coupling {
  std::optional<EffectiveArea> area;
  static Coupling unit() { return {}; }
  static Coupling through(EffectiveArea a) { return {a}; }
  double at(double frequency_hz) const { return area ? area->coupling(frequency_hz) : 1.0; }
};

struct ThermalSource {
  double temperature_k = 5800.0;
  double efficiency = 1.0;
  // Optional (frequency Hz, efficiency) table, linearly interpolated and
  // clamped at the ends; overrides the scalar when non-empty.
  std::vector<std::pair<double, double>> efficiency_table;
  int polarization_modes = 2;
  PolarizationGeometry geometry;
  // Transition labels this light reaches; empty = every E1 transition.
  std::vector<std::string> transitions;

  void validate() const {
    if (!(temperature_k > 0.0)) throw ConfigError("thermal source: temperature must be > 0");
    if (polarization_modes != 1 && polarization_modes != 2)
      throw ConfigError("thermal source: polarization_modes must be 1 or 2");
    if (efficiency_table.empty()) {
      if (!(efficiency >= 0.0 && efficiency <= 1.0))
        throw ConfigError("thermal source: efficiency must lie in [0, 1]");
    }
    for (std::size_t i = 0; i < efficiency_table.size(); ++i) {
      const auto& [nu, eta] = efficiency_table[i];
      if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("thermal source: efficiency table entry outside [0, 1]");
      if (i > 0 && !(nu > efficiency_table[i - 1].first))
        throw ConfigError("thermal source: efficiency table frequencies must ascend");
    }
  }

  double delivery_efficiency(double frequency_hz) const {
    if (efficiency_table.empty()) return efficiency;
    const auto& t = efficiency_table;
    if (frequency_hz <= t.front().first) return t.front().second;
    if (frequency_hz >= t.back().first) return t.back().second;
    auto hi = std::upper_bound(t.begin(), t.end(), frequency_hz,
                               [](double v, const auto& e) { return v < e.first; });
    auto lo = hi - 1;
    double w = (frequency_hz - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
  }
};

struct LaserSource {
  std::string transition;   // e.g. "D5/2-P3/2"
  double detuning_hz = 0.0; // from the zero-field line
  double power_w = 0.0;
  double linewidth_hz = 0.0;  // Lorentzian FWHM
  PolarizationGeometry geometry;

  void validate() const {
    if (!(power_w >= 0.0)) throw ConfigError("laser source: power must be >= 0");
    if (!(linewidth_hz >= 0.0)) throw ConfigError("laser source: linewidth must be >= 0");
  }
};

using RadiationSource = std::variant<ThermalSource, LaserSource>;

// Total (all polarization modes) thermal PSD delivered to the ion, W/Hz.
inline double delivered_psd(const ThermalSource& src, double frequency_hz) {
  return src.polarization_modes * src.delivery_efficiency(frequency_hz) *
         planck_single_mode_psd(frequency_hz, src.temperature_k);
}

// Area-normalized Lorentzian of full width `fwhm` evaluated at `offset`.
inline double lorentzian(double offset_hz, double fwhm_hz) {
  double hw = 0.5 * fwhm_hz;
  return hw / (constants::pi * (offset_hz * offset_hz + hw * hw));
}

// Spectral power at the ion resolved into spherical components, already
// multiplied by the geometric coupling (so density / (h nu) is the photon
// occupation the ion sees).
class SpectralDrive {
 public:
  struct Continuum {
    std::function<double(double)> psd;  // total W/Hz before polarization split
    PolarizationFractions fractions{};
    Coupling coupling;
  };
  struct Line {
    double center_hz = 0.0;
    double fwhm_hz = 0.0;  // 0 = delta line
    double power_w = 0.0;
    PolarizationFractions fractions{};
    Coupling coupling;
  };

  SpectralDrive() = default;
  SpectralDrive(std::vector<Continuum> continua, std::vector<Line> lines,
                std::vector<std::size_t> transitions)
      : continua_(std::move(continua)), lines_(std::move(lines)), transitions_(std::move(transitions)) {}

  // True if this drive reaches transition index `t`.
  bool drives(std::size_t t) const {
    return transitions_.empty() || std::find(transitions_.begin(), transitions_.end(), t) != transitions_.end();
  }

  // W/Hz in component q. Delta lines contribute nothing pointwise.
  double density(int q, double nu) const {
    double sum = 0.0;
    for (const auto& c : continua_) sum += c.fractions[q_index(q)] * c.psd(nu) * c.coupling.at(nu);
    for (const auto& l : lines_)
      if (l.fwhm_hz > 0.0)
        sum += l.fractions[q_index(q)] * l.power_w * l.coupling.at(nu) * lorentzian(nu - l.center_hz, l.fwhm_hz);
    return sum;
  }

  // Line-shape averaged photon occupation seen by a channel at `nu` whose
  // natural Lorentzian has full width `natural_fwhm_hz`. Continua are flat on
  // the scale of the natural width; Lorentzian lines convolve exactly.
  double occupation(int q, double nu, double natural_fwhm_hz) const {
    const double photon = constants::planck_h * nu;
    double n = 0.0;
    for (const auto& c : continua_) n += c.fractions[q_index(q)] * c.psd(nu) * c.coupling.at(nu) / photon;
    for (const auto& l : lines_) {
      double width = natural_fwhm_hz + l.fwhm_hz;
      if (!(width > 0.0))
        throw DomainError("occupation: delta line against a zero-width channel");
      n += l.fractions[q_index(q)] * l.power_w * l.coupling.at(nu) * lorentzian(nu - l.center_hz, width) / photon;
    }
    return n;
  }

  double total_line_power() const {
    double p = 0.0;
    for (const auto& l : lines_) p += l.power_w;
    return p;
  }

  SpectralDrive scaled(double alpha) const {
    SpectralDrive out = *this;
    for (auto& c : out.continua_) {
      auto f = c.psd;
      c.psd = [f, alpha](double nu) { return alpha * f(nu); };
    }
    for (auto& l : out.lines_) l.power_w *= alpha;
    return out;
  }

  const std::vector<Continuum>& continua() const { return continua_; }
  const std::vector<Line>& lines() const { return lines_; }

 private:
  std::vector<Continuum> continua_;
  std::vector<Line> lines_;
  std::vector<std::size_t> transitions_;
};

inline SpectralDrive thermal_spectral_drive(const ThermalSource& src, const SpeciesConfig& cfg,
                                            Coupling coupling) {
  src.validate();
  std::vector<std::size_t> targets;
  for (const auto& label : src.transitions) targets.push_back(cfg.transition_index(label));
  SpectralDrive::Continuum c;
  c.psd = [src](double nu) { return delivered_psd(src, nu); };
  c.fractions = polarization_fractions(src.geometry);
  c.coupling = coupling;
  return SpectralDrive({c}, {}, std::move(targets));
}

inline SpectralDrive laser_spectral_drive(const LaserSource& src, const SpeciesConfig& cfg,
                                          Coupling coupling) {
  src.validate();
  std::size_t t = cfg.transition_index(src.transition);
  SpectralDrive::Line line;
  line.center_hz = cfg.transitions[t].frequency_hz() + src.detuning_hz;
  line.fwhm_hz = src.linewidth_hz;
  line.power_w = src.power_w;
  line.fractions = polarization_fractions(src.geometry);
  line.coupling = coupling;
  return SpectralDrive({}, {line}, {t});
}

inline SpectralDrive laser_spectral_drive(const LaserSource& src, const SpeciesConfig& cfg,
                                          EffectiveArea area) {
  return laser_spectral_drive(src, cfg, Coupling::through(area));
}

// A frequency-flat drive of total PSD `psd_w_per_hz` on one transition.
inline SpectralDrive flat_spectral_drive(double psd_w_per_hz, const PolarizationGeometry& geom,
                                         std::size_t transition, Coupling coupling) {
  SpectralDrive::Continuum c;
  c.psd = [psd_w_per_hz](double) { return psd_w_per_hz; };
  c.fractions = polarization_fractions(geom);
  c.coupling = coupling;
  return SpectralDrive({c}, {}, {transition});
}

inline SpectralDrive spectral_drive(const RadiationSource& src, const SpeciesConfig& cfg,
                                    Coupling coupling) {
  return std::visit(
      [&](const auto& s) -> SpectralDrive {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ThermalSource>)
          return thermal_spectral_drive(s, cfg, coupling);
        else
          return laser_spectral_drive(s, cfg, coupling);
      },
      src);
}

}  // namespace coolheat
