#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coolheat/atomic_structure.hpp"
#include "coolheat/error.hpp"
#include "coolheat/radiation.hpp"

namespace coolheat {

// Generator of the population master equation dp/dt = M p. Entry (i, j) with
// i != j is the rate of j -> i; the diagonal holds minus the exit rate.
class RateMatrix {
 public:
  RateMatrix() = default;

  // Builds from off-diagonal rates; the diagonal of `rates` is ignored.
  RateMatrix(Eigen::MatrixXd rates, std::vector<std::string> labels,
             std::vector<std::string> manifolds)
      : m_(std::move(rates)), labels_(std::move(labels)), manifolds_(std::move(manifolds)) {
    if (m_.rows() != m_.cols() || static_cast<std::size_t>(m_.rows()) != labels_.size() ||
        labels_.size() != manifolds_.size())
      throw ConfigError("RateMatrix: inconsistent dimensions");
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      double out = 0.0;
      for (Eigen::Index i = 0; i < m_.rows(); ++i) {
        if (i == j) continue;
        if (!(m_(i, j) >= 0.0)) throw NumericalError("RateMatrix: negative or NaN rate into " + labels_[i]);
        out += m_(i, j);
      }
      m_(j, j) = -out;
    }
  }

  std::size_t dimension() const { return labels_.size(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double rate(std::size_t to, std::size_t from) const { return m_(to, from); }
  double exit_rate(std::size_t j) const { return -m_(j, j); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& manifolds() const { return manifolds_; }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return i;
    throw ConfigError("RateMatrix: unknown sublevel " + label);
  }

  std::vector<bool> manifold_mask(const std::string& manifold) const {
    std::vector<bool> mask(dimension());
    for (std::size_t i = 0; i < dimension(); ++i) mask[i] = manifolds_[i] == manifold;
    return mask;
  }

  // Largest |column sum| relative to that column's largest entry.
  double max_relative_column_sum() const {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      double scale = m_.col(j).cwiseAbs().maxCoeff();
      if (scale == 0.0) continue;
      worst = std::max(worst, std::abs(m_.col(j).sum()) / scale);
    }
    return worst;
  }

  bool is_valid(double tol = 1e-12) const {
    for (Eigen::Index j = 0; j < m_.cols(); ++j)
      for (Eigen::Index i = 0; i < m_.rows(); ++i)
        if (i != j && m_(i, j) < 0.0) return false;
    return max_relative_column_sum() < tol;
  }

  // Columns are source states; rows are destinations.
  void write_csv(std::ostream& os) const {
    os << "to\\from [s^-1]";
    for (const auto& l : labels_) os << ',' << l;
    os << '\n';
    std::ostringstream cell;
    for (std::size_t i = 0; i < dimension(); ++i) {
      os << labels_[i];
      for (std::size_t j = 0; j < dimension(); ++j) {
        cell.str("");
        cell << std::setprecision(17) << m_(i, j);
        os << ',' << cell.str();
      }
      os << '\n';
    }
  }

 private:
  Eigen::MatrixXd m_;
  std::vector<std::string> labels_;
  std::vector<std::string> manifolds_;
};

// Radiative natural linewidth (FWHM, Hz) of a manifold.
inline double natural_fwhm_hz(const SpeciesConfig& cfg, std::size_t manifold) {
  double total = 0.0;
  for (const auto& t : cfg.transitions)
    if (cfg.manifold_index(t.upper) == manifold) total += t.A_total;
  return total / (2.0 * constants::pi);
}

// A_channel times the photon occupation the channel sees; the same rate
// applies to absorption and to stimulated emission.
inline double stimulated_rate(const TransitionChannel& ch, const SpectralDrive& drive,
                              double natural_fwhm) {
  return ch.A_channel * drive.occupation(ch.q, ch.frequency_hz, natural_fwhm);
}

inline double stimulated_rate(const SpeciesConfig& cfg, const TransitionChannel& ch,
                              const SpectralDrive& drive) {
  if (cfg.transitions.at(ch.transition).rank != 1 || !drive.drives(ch.transition)) return 0.0;
  return stimulated_rate(ch, drive, natural_fwhm_hz(cfg, ch.upper.manifold));
}

inline double laser_equivalent_rate(const SpeciesConfig& cfg, const TransitionChannel& ch,
                                    const LaserSource& laser, EffectiveArea area) {
  return stimulated_rate(cfg, ch, laser_spectral_drive(laser, cfg, area));
}

struct GeneratorOptions {
  bool include_quench = true;
  bool include_repump = false;
  std::optional<double> quench_rate;  // overrides the species value
};

namespace detail {

inline void add_transfer(Eigen::MatrixXd& m, const SpeciesConfig& cfg,
                         const std::vector<SublevelId>& levels, const TransferSpec& t, double rate) {
  if (rate == 0.0) return;
  std::size_t from = cfg.manifold_index(t.from);
  std::size_t to = cfg.manifold_index(t.to);
  double share = rate / cfg.manifolds[to].sublevel_count();
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (levels[j].manifold != from) continue;
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (levels[i].manifold == to && i != j) m(i, j) += share;
  }
}

}  // namespace detail

template <typename Fn>
std::vector<SpectralDrive> make_drives(const std::vector<RadiationSource>& sources, Fn&& build) {
  std::vector<SpectralDrive> out;
  for (const auto& s : sources) out.push_back(build(s));
  return out;
}

inline RateMatrix assemble_generator(const SpeciesConfig& cfg, const std::vector<TransitionChannel>& channels,
                                     const std::vector<SpectralDrive>& drives,
                                     const GeneratorOptions& opts = {}) {
  const auto levels = cfg.sublevels();
  const std::size_t n = levels.size();
  auto index = [&](const SublevelId& s) {
    auto it = std::lower_bound(levels.begin(), levels.end(), s);
    if (it == levels.end() || *it != s) throw ConfigError("channel references an unknown sublevel");
    return static_cast<Eigen::Index>(it - levels.begin());
  };
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& ch : channels) {
    auto u = index(ch.upper);
    auto l = index(ch.lower);
    m(l, u) += ch.A_channel;
    for (const auto& d : drives) {
      double r = stimulated_rate(cfg, ch, d);
      m(u, l) += r;
      m(l, u) += r;
    }
  }
  if (opts.include_quench && cfg.quench)
    detail::add_transfer(m, cfg, levels, *cfg.quench, opts.quench_rate.value_or(cfg.quench->rate));
  if (opts.include_repump && cfg.repump) detail::add_transfer(m, cfg, levels, *cfg.repump, cfg.repump->rate);

  std::vector<std::string> labels, manifolds;
  for (const auto& s : levels) {
    labels.push_back(cfg.label(s));
    manifolds.push_back(cfg.manifold(s).label);
  }
  return RateMatrix(std::move(m), std::move(labels), std::move(manifolds));
}

// Physical sources through an effective area.
inline RateMatrix assemble_generator(const SpeciesConfig& cfg, const std::vector<TransitionChannel>& channels,
                                     const std::vector<RadiationSource>& sources, EffectiveArea area,
                                     const GeneratorOptions& opts = {}) {
  auto drives = make_drives(sources, [&](const RadiationSource& s) {
    return spectral_drive(s, cfg, Coupling::through(area));
  });
  return assemble_generator(cfg, channels, drives, opts);
}

// Adiabatic elimination of a fast manifold: the slow block becomes
//   M_ss + M_sf (-M_ff)^-1 M_fs,
// i.e. every path into a fast sublevel is redistributed over that
// sublevel's destinations in proportion to its exit branching.
inline RateMatrix eliminate_fast_manifold(const RateMatrix& full, const std::string& fast,
                                          double min_ratio = 1e3) {
  const auto& m = full.matrix();
  std::vector<Eigen::Index> f, s;
  for (std::size_t i = 0; i < full.dimension(); ++i)
    (full.manifolds()[i] == fast ? f : s).push_back(static_cast<Eigen::Index>(i));
  if (f.empty()) throw ConfigError("eliminate_fast_manifold: no sublevels in manifold " + fast);

  double slowest_fast_exit = std::numeric_limits<double>::infinity();
  for (auto j : f) slowest_fast_exit = std::min(slowest_fast_exit, -m(j, j));
  double fastest_slow_rate = 0.0;
  for (auto j : s)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j) fastest_slow_rate = std::max(fastest_slow_rate, m(i, j));
  if (!(slowest_fast_exit >= min_ratio * fastest_slow_rate))
    throw ConfigError("eliminate_fast_manifold: " + fast + " is not fast enough (exit " +
                      std::to_string(slowest_fast_exit) + " /s vs slow rate " +
                      std::to_string(fastest_slow_rate) + " /s)");

  const auto nf = static_cast<Eigen::Index>(f.size());
  const auto ns = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd mff(nf, nf), mfs(nf, ns), msf(ns, nf), mss(ns, ns);
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < nf; ++b) mff(a, b) = m(f[a], f[b]);
    for (Eigen::Index b = 0; b < ns; ++b) mfs(a, b) = m(f[a], s[b]);
  }
  for (Eigen::Index a = 0; a < ns; ++a) {
    for (Eigen::Index b = 0; b < nf; ++b) msf(a, b) = m(s[a], f[b]);
    for (Eigen::Index b = 0; b < ns; ++b) mss(a, b) = m(s[a], s[b]);
  }
  // Branching from each fast sublevel to each slow one.
  Eigen::MatrixXd route = (-mff).partialPivLu().solve(Eigen::MatrixXd::Identity(nf, nf));
  Eigen::MatrixXd reduced = mss + msf * route * mfs;
  for (Eigen::Index j = 0; j < ns; ++j)
    for (Eigen::Index i = 0; i < ns; ++i) {
      if (i == j) continue;
      // LU roundoff can leave tiny negatives on structurally zero routes.
      if (reduced(i, j) < 0.0) {
        if (reduced(i, j) < -1e-12 * std::abs(mss(j, j))) throw NumericalError("eliminate_fast_manifold: negative reduced rate");
        reduced(i, j) = 0.0;
      }
    }

  std::vector<std::string> labels, manifolds;
  for (auto i : s) {
    labels.push_back(full.labels()[static_cast<std::size_t>(i)]);
    manifolds.push_back(full.manifolds()[static_cast<std::size_t>(i)]);
  }
  return RateMatrix(std::move(reduced), std::move(labels), std::move(manifolds));
}

}  // namespace coolheat
