#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "coolheat/error.hpp"
#include "coolheat/philox.hpp"

namespace coolheat {

enum class FitMethod { mle, binned_ls, mle_censored };

inline const char* to_string(FitMethod m) {
  switch (m) {
    case FitMethod::mle: return "mle";
    case FitMethod::binned_ls: return "binned-ls";
    case FitMethod::mle_censored: return "mle-censored";
  }
  return "?";
}

struct FitResult {
  double tau = 0.0;
  double sigma_tau = 0.0;
  FitMethod method = FitMethod::mle;
  std::size_t n_samples = 0;
  double log_likelihood = 0.0;  // mle variants
  double residual = 0.0;        // binned: weighted sum of squared log residuals
};

namespace detail {
inline void require_nonnegative(const std::vector<double>& darks, const char* who) {
  for (double x : darks)
    if (!(x >= 0.0)) throw ConfigError(std::string(who) + ": dark times must be >= 0");
}
}  // namespace detail

// Exponential MLE: the sample mean, with standard error tau / sqrt(n).
inline FitResult fit_exponential_mle(const std::vector<double>& darks) {
  if (darks.size() < 2) throw ConfigError("fit_exponential_mle: need at least 2 samples");
  detail::require_nonnegative(darks, "fit_exponential_mle");
  const double n = static_cast<double>(darks.size());
  const double tau = std::accumulate(darks.begin(), darks.end(), 0.0) / n;
  if (!(tau > 0.0)) throw ConfigError("fit_exponential_mle: all dark times are zero");
  FitResult r;
  r.tau = tau;
  r.sigma_tau = tau / std::sqrt(n);
  r.method = FitMethod::mle;
  r.n_samples = darks.size();
  r.log_likelihood = -n * std::log(tau) - n;
  return r;
}

// Right-censored exponential MLE: (sum observed + sum censored) / #observed.
inline FitResult fit_exponential_censored(const std::vector<double>& observed,
                                          const std::vector<double>& censored) {
  if (observed.empty()) throw ConfigError("fit_exponential_censored: no uncensored samples");
  detail::require_nonnegative(observed, "fit_exponential_censored");
  detail::require_nonnegative(censored, "fit_exponential_censored");
  const double k = static_cast<double>(observed.size());
  const double exposure = std::accumulate(observed.begin(), observed.end(), 0.0) +
                          std::accumulate(censored.begin(), censored.end(), 0.0);
  const double tau = exposure / k;
  if (!(tau > 0.0)) throw ConfigError("fit_exponential_censored: zero total exposure");
  FitResult r;
  r.tau = tau;
  r.sigma_tau = tau / std::sqrt(k);
  r.method = FitMethod::mle_censored;
  r.n_samples = observed.size() + censored.size();
  r.log_likelihood = -k * std::log(tau) - exposure / tau;
  return r;
}

struct SurvivalPoint {
  double t = 0.0;
  double survival = 0.0;
  double weight = 1.0;
};

// Weighted least squares of log S(t) = a - t / tau over points with S > 0.
inline FitResult fit_log_survival(const std::vector<SurvivalPoint>& points) {
  double sw = 0, st = 0, sy = 0;
  std::size_t used = 0;
  for (const auto& p : points) {
    if (!(p.survival > 0.0) || !(p.weight > 0.0)) continue;
    sw += p.weight;
    st += p.weight * p.t;
    sy += p.weight * std::log(p.survival);
    ++used;
  }
  if (used < 2) throw ConfigError("fit_log_survival: fewer than two usable points");
  const double tbar = st / sw, ybar = sy / sw;
  double stt = 0, sty = 0;
  for (const auto& p : points) {
    if (!(p.survival > 0.0) || !(p.weight > 0.0)) continue;
    double dt = p.t - tbar;
    stt += p.weight * dt * dt;
    sty += p.weight * dt * (std::log(p.survival) - ybar);
  }
  if (!(stt > 0.0)) throw ConfigError("fit_log_survival: all points at one time");
  const double slope = sty / stt;
  if (!(slope < 0.0)) throw NumericalError("fit_log_survival: survival does not decay");
  double rss = 0.0;
  for (const auto& p : points) {
    if (!(p.survival > 0.0) || !(p.weight > 0.0)) continue;
    double e = std::log(p.survival) - (ybar + slope * (p.t - tbar));
    rss += p.weight * e * e;
  }
  FitResult r;
  r.tau = -1.0 / slope;
  // Counting weights make var(log S_k) ~ 1 / weight_k.
  r.sigma_tau = r.tau * r.tau / std::sqrt(stt);
  r.method = FitMethod::binned_ls;
  r.n_samples = used;
  r.residual = rss;
  return r;
}

// Empirical survival on `bins` equal-width bins spanning [0, max], fitted
// on a log scale with each point weighted by its survivor count.
inline FitResult fit_exponential_binned(const std::vector<double>& darks, std::size_t bins) {
  if (darks.size() < 10) throw ConfigError("fit_exponential_binned: need at least 10 samples");
  if (bins < 3) throw ConfigError("fit_exponential_binned: need at least 3 bins");
  detail::require_nonnegative(darks, "fit_exponential_binned");
  std::vector<double> sorted = darks;
  std::sort(sorted.begin(), sorted.end());
  const double width = sorted.back() / static_cast<double>(bins);
  if (!(width > 0.0)) throw ConfigError("fit_exponential_binned: all samples in one bin");
  std::vector<std::size_t> counts(bins, 0);
  for (double x : sorted) counts[std::min(bins - 1, static_cast<std::size_t>(x / width))]++;
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw ConfigError("fit_exponential_binned: all samples in one bin");
  const double n = static_cast<double>(sorted.size());
  std::vector<SurvivalPoint> pts;
  for (std::size_t k = 0; k < bins; ++k) {
    double t = width * static_cast<double>(k);
    auto alive = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    if (alive > 0) pts.push_back({t, alive / n, alive});
  }
  FitResult r = fit_log_survival(pts);
  r.n_samples = darks.size();
  return r;
}

// Percentile bootstrap interval of the MLE lifetime. Resample r draws from
// stream (seed, r).
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& darks, std::size_t resamples,
                                              double level, std::uint64_t seed) {
  if (resamples < 100) throw ConfigError("bootstrap_ci: need at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("bootstrap_ci: level must lie in (0, 1)");
  if (darks.empty()) throw ConfigError("bootstrap_ci: no samples");
  const std::size_t n = darks.size();
  std::vector<double> taus(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    RngStream rng(seed, r);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
      s += darks[std::min(k, n - 1)];
    }
    taus[r] = s / static_cast<double>(n);
  }
  std::sort(taus.begin(), taus.end());
  auto quantile = [&](double p) {
    double pos = p * static_cast<double>(resamples - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, resamples - 1);
    double w = pos - static_cast<double>(lo);
    return taus[lo] + w * (taus[hi] - taus[lo]);
  };
  return {quantile((1.0 - level) / 2.0), quantile((1.0 + level) / 2.0)};
}

// Fraction of samples strictly longer than each grid time.
inline std::vector<std::pair<double, double>> survival_curve(const std::vector<double>& darks,
                                                             const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigError("survival_curve: grid must ascend");
  std::vector<double> sorted = darks;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  for (double t : grid) {
    auto alive = static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    out.emplace_back(t, n > 0 ? alive / n : 0.0);
  }
  return out;
}

}  // namespace coolheat
