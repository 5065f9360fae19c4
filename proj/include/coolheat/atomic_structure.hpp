#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "coolheat/constants.hpp"
#include "coolheat/error.hpp"
#include "coolheat/half_integer.hpp"
#include "coolheat/wigner.hpp"

namespace coolheat {

// How a manifold shows up under continuous Doppler-cooling illumination.
enum class Classification { bright, dark, fast_excited };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::bright: return "bright";
    case Classification::dark: return "dark";
    case Classification::fast_excited: return "fast-excited";
  }
  return "?";
}

struct ManifoldSpec {
  std::string label;  // "S1/2", "P3/2", ...
  HalfInt J;
  double g_factor = 0.0;
  double energy_thz = 0.0;  // above the ground manifold
  Classification classification = Classification::dark;

  int sublevel_count() const { return J.twice() + 1; }
  // Projection quantum numbers from -J to +J.
  std::vector<HalfInt> projections() const {
    std::vector<HalfInt> m;
    for (int t = -J.twice(); t <= J.twice(); t += 2) m.push_back(HalfInt::from_twice(t));
    return m;
  }
};

struct SublevelId {
  std::size_t manifold = 0;  // index into SpeciesConfig::manifolds
  HalfInt mJ;
  auto operator<=>(const SublevelId&) const = default;
};

struct TransitionSpec {
  std::string upper;
  std::string lower;
  double wavelength_nm = 0.0;  // vacuum
  double A_total = 0.0;        // s^-1, summed over lower sublevels
  int rank = 1;                // multipole order: 1 = E1, 2 = E2

  std::string label() const { return lower + "-" + upper; }
  double frequency_hz() const { return constants::speed_of_light / (wavelength_nm * 1e-9); }
};

// Incoherent manifold-to-manifold transfer spread evenly over the
// destination sublevels (collisional quench, repump).
struct TransferSpec {
  std::string from;
  std::string to;
  double rate = 0.0;  // s^-1 out of each source sublevel
};

struct TransitionChannel {
  SublevelId upper;
  SublevelId lower;
  int q = 0;  // mJ(upper) - mJ(lower)
  double A_channel = 0.0;
  double frequency_hz = 0.0;
  std::size_t transition = 0;  // index into SpeciesConfig::transitions
};

struct SpeciesConfig {
  std::vector<ManifoldSpec> manifolds;
  std::vector<TransitionSpec> transitions;
  std::optional<TransferSpec> quench;
  std::optional<TransferSpec> repump;
  std::string provenance;

  std::size_t manifold_index(const std::string& label) const {
    for (std::size_t i = 0; i < manifolds.size(); ++i)
      if (manifolds[i].label == label) return i;
    throw ConfigError("unknown manifold '" + label + "'");
  }

  const ManifoldSpec& manifold(const SublevelId& s) const { return manifolds.at(s.manifold); }

  // Accepts "lower-upper" or "upper-lower".
  std::size_t transition_index(const std::string& label) const {
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      const auto& t = transitions[i];
      if (label == t.lower + "-" + t.upper || label == t.upper + "-" + t.lower) return i;
    }
    throw ConfigError("unknown transition '" + label + "'");
  }

  std::optional<std::size_t> find_transition(std::size_t a, std::size_t b) const {
    for (std::size_t i = 0; i < transitions.size(); ++i) {
      const auto& t = transitions[i];
      if ((manifold_index(t.upper) == a && manifold_index(t.lower) == b) ||
          (manifold_index(t.upper) == b && manifold_index(t.lower) == a))
        return i;
    }
    return std::nullopt;
  }

  // Canonical ordering: manifolds in declaration order, mJ ascending.
  std::vector<SublevelId> sublevels() const {
    std::vector<SublevelId> out;
    for (std::size_t i = 0; i < manifolds.size(); ++i)
      for (HalfInt m : manifolds[i].projections()) out.push_back({i, m});
    return out;
  }

  std::size_t sublevel_count() const {
    std::size_t n = 0;
    for (const auto& m : manifolds) n += static_cast<std::size_t>(m.sublevel_count());
    return n;
  }

  std::string label(const SublevelId& s) const {
    return manifolds.at(s.manifold).label + ":" + s.mJ.str(true);
  }

  void validate() const;
};

inline void SpeciesConfig::validate() const {
  if (manifolds.empty()) throw ConfigError("species has no manifolds");
  for (std::size_t i = 0; i < manifolds.size(); ++i) {
    const auto& m = manifolds[i];
    if (m.J.twice() < 0) throw ConfigError("manifold " + m.label + ": negative J");
    for (std::size_t k = 0; k < i; ++k)
      if (manifolds[k].label == m.label) throw ConfigError("duplicate manifold " + m.label);
  }
  std::vector<std::size_t> parent(manifolds.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& t : transitions) {
    std::size_t u = manifold_index(t.upper);
    std::size_t l = manifold_index(t.lower);
    if (!(t.A_total > 0.0)) throw ConfigError("transition " + t.label() + ": A_total must be > 0");
    if (!(t.wavelength_nm > 0.0))
      throw ConfigError("transition " + t.label() + ": wavelength must be > 0");
    if (t.rank < 1 || t.rank > 2) throw ConfigError("transition " + t.label() + ": rank must be 1 or 2");
    double gap_hz = (manifolds[u].energy_thz - manifolds[l].energy_thz) * 1e12;
    if (!(gap_hz > 0.0))
      throw ConfigError("transition " + t.label() + ": upper manifold is not above lower");
    double nu = t.frequency_hz();
    if (std::abs(nu - gap_hz) > 1e-3 * nu)
      throw ConfigError("transition " + t.label() +
                        ": wavelength inconsistent with manifold energies");
    const auto& ju = manifolds[u].J;
    const auto& jl = manifolds[l].J;
    const HalfInt k = HalfInt::integer(t.rank);
    if (ju > jl + k || jl > ju + k || k > ju + jl)
      throw ConfigError("transition " + t.label() + ": angular momenta violate the rank-" +
                        std::to_string(t.rank) + " triangle rule");
    parent[find(u)] = find(l);
  }
  for (const auto* x : {&quench, &repump}) {
    if (!x->has_value()) continue;
    const auto& q = x->value();
    manifold_index(q.from);
    manifold_index(q.to);
    if (q.rate < 0.0) throw ConfigError("transfer " + q.from + "->" + q.to + ": negative rate");
  }
  for (std::size_t i = 1; i < manifolds.size(); ++i)
    if (find(i) != find(0)) throw ConfigError("manifold graph is not connected at " + manifolds[i].label);
}

// Dipole-type branching weight (2J_u + 1) (J_l k J_u; m_l q -m_u)^2 for a
// multipole of rank k. Sums to 1 over (m_l, q) for each upper sublevel.
inline double channel_strength(HalfInt j_upper, HalfInt m_upper, HalfInt j_lower,
                               HalfInt m_lower, int q, int rank = 1) {
  if (std::abs(q) > rank) return 0.0;
  if ((m_upper - m_lower).twice() != 2 * q) return 0.0;
  double w3j = wigner_3j(j_lower, HalfInt::integer(rank), j_upper, m_lower,
                         HalfInt::integer(q), -m_upper);
  return (j_upper.twice() + 1) * w3j * w3j;
}

inline double channel_strength(const SpeciesConfig& cfg, const SublevelId& upper,
                               const SublevelId& lower, int q) {
  auto t = cfg.find_transition(upper.manifold, lower.manifold);
  if (!t || cfg.manifold_index(cfg.transitions[*t].upper) != upper.manifold)
    throw ConfigError("no transition from " + cfg.manifold(upper).label + " down to " +
                      cfg.manifold(lower).label);
  return channel_strength(cfg.manifold(upper).J, upper.mJ, cfg.manifold(lower).J, lower.mJ, q,
                          cfg.transitions[*t].rank);
}

// Linear Zeeman shift in Hz.
inline double zeeman_shift(const ManifoldSpec& m, HalfInt mJ, double b_gauss) {
  if (b_gauss < 0.0) throw ConfigError("magnetic field must be >= 0");
  return m.g_factor * mJ.value() * constants::bohr_magneton_hz_per_gauss * b_gauss;
}

inline double zeeman_shift(const SpeciesConfig& cfg, const SublevelId& s, double b_gauss) {
  return zeeman_shift(cfg.manifold(s), s.mJ, b_gauss);
}

inline std::vector<TransitionChannel> build_channel_table(const SpeciesConfig& cfg,
                                                          double b_gauss) {
  cfg.validate();
  std::vector<TransitionChannel> out;
  for (std::size_t ti = 0; ti < cfg.transitions.size(); ++ti) {
    const auto& t = cfg.transitions[ti];
    std::size_t u = cfg.manifold_index(t.upper);
    std::size_t l = cfg.manifold_index(t.lower);
    const auto& mu_spec = cfg.manifolds[u];
    const auto& ml_spec = cfg.manifolds[l];
    for (HalfInt mu : mu_spec.projections()) {
      for (HalfInt ml : ml_spec.projections()) {
        int twice_q = (mu - ml).twice();
        if (twice_q % 2 != 0 || std::abs(twice_q) > 2 * t.rank) continue;
        int q = twice_q / 2;
        double w = channel_strength(mu_spec.J, mu, ml_spec.J, ml, q, t.rank);
        if (w == 0.0) continue;
        TransitionChannel ch;
        ch.upper = {u, mu};
        ch.lower = {l, ml};
        ch.q = q;
        ch.A_channel = t.A_total * w;
        ch.frequency_hz = t.frequency_hz() + zeeman_shift(mu_spec, mu, b_gauss) -
                          zeeman_shift(ml_spec, ml, b_gauss);
        ch.transition = ti;
        out.push_back(ch);
      }
    }
  }
  return out;
}

// Sublevels of the manifolds with the given classification.
inline std::vector<bool> classification_mask(const SpeciesConfig& cfg, Classification c) {
  std::vector<bool> mask;
  for (const auto& s : cfg.sublevels()) mask.push_back(cfg.manifold(s).classification == c);
  return mask;
}

}  // namespace coolheat
