#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "coolheat/analysis.hpp"

using namespace coolheat;

namespace {

std::vector<double> exponential_samples(double tau, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  RngStream r(seed, stream);
  std::vector<double> v(n);
  for (auto& x : v) x = r.exponential(1.0 / tau);
  return v;
}

}  // namespace

TEST(Mle, SmallExactCase) {
  auto f = fit_exponential_mle({1.0, 1.0, 1.0, 1.0});
  EXPECT_EQ(f.tau, 1.0);
  EXPECT_EQ(f.sigma_tau, 0.5);
  EXPECT_EQ(f.n_samples, 4u);
  EXPECT_EQ(f.method, FitMethod::mle);
  EXPECT_DOUBLE_EQ(f.log_likelihood, -4.0);
}

TEST(Mle, RecoversLifetimes) {
  for (double tau : {1.98, 20.4}) {
    auto f = fit_exponential_mle(exponential_samples(tau, 10000, 3));
    EXPECT_NEAR(f.tau, tau, 3.0 * tau / 100.0);
    EXPECT_NEAR(f.sigma_tau, f.tau / 100.0, 1e-15);
  }
}

TEST(Mle, Rejects) {
  EXPECT_THROW(fit_exponential_mle({1.0}), ConfigError);
  EXPECT_THROW(fit_exponential_mle({0.0, 0.0}), ConfigError);
  EXPECT_THROW(fit_exponential_mle({1.0, -1.0}), ConfigError);
}

TEST(Binned, NoiselessLogSurvival) {
  std::vector<SurvivalPoint> pts;
  for (int k = 0; k < 40; ++k) pts.push_back({0.25 * k, std::exp(-0.25 * k / 2.0), 1.0 + k});
  auto f = fit_log_survival(pts);
  EXPECT_NEAR(f.tau, 2.0, 1e-6);
  EXPECT_LT(f.residual, 1e-20);
}

TEST(Binned, AgreesWithMle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto v = exponential_samples(1.98, 10000, seed);
    auto m = fit_exponential_mle(v);
    auto b = fit_exponential_binned(v, 40);
    EXPECT_EQ(b.method, FitMethod::binned_ls);
    EXPECT_EQ(b.n_samples, v.size());
    EXPECT_LT(std::abs(b.tau - m.tau), 2.0 * (m.sigma_tau + b.sigma_tau));
  }
}

TEST(Binned, Rejects) {
  EXPECT_THROW(fit_exponential_binned(std::vector<double>(20, 3.0), 40), ConfigError);
  EXPECT_THROW(fit_exponential_binned(std::vector<double>(5, 1.0), 40), ConfigError);
  EXPECT_THROW(fit_exponential_binned(exponential_samples(1.0, 100, 1), 2), ConfigError);
  EXPECT_THROW(fit_log_survival({{1.0, 0.5, 1.0}, {1.0, 0.4, 1.0}}), ConfigError);
  EXPECT_THROW(fit_log_survival({{0.0, 0.5, 1.0}, {1.0, 0.6, 1.0}}), NumericalError);
}

TEST(Fits, ScaleEquivariant) {
  auto v = exponential_samples(1.0, 5000, 8);
  for (double c : {0.001, 3.0, 1e4}) {
    std::vector<double> w(v);
    for (auto& x : w) x *= c;
    EXPECT_NEAR(fit_exponential_mle(w).tau / (c * fit_exponential_mle(v).tau), 1.0, 1e-13);
    EXPECT_NEAR(fit_exponential_mle(w).sigma_tau / (c * fit_exponential_mle(v).sigma_tau), 1.0, 1e-13);
    EXPECT_NEAR(fit_exponential_binned(w, 40).tau / (c * fit_exponential_binned(v, 40).tau), 1.0, 1e-10);
  }
}

TEST(Fits, MleConsistency) {
  const std::size_t datasets = 200, n = 1000;
  const double tau = 2.0;
  std::vector<double> z;
  for (std::size_t d = 0; d < datasets; ++d)
    z.push_back((fit_exponential_mle(exponential_samples(tau, n, 21, d)).tau - tau) / (tau / std::sqrt(double(n))));
  double mean = std::accumulate(z.begin(), z.end(), 0.0) / datasets;
  double var = 0.0;
  for (double x : z) var += (x - mean) * (x - mean);
  var /= datasets - 1;
  EXPECT_LT(std::abs(mean), 0.25);
  EXPECT_GT(var, 0.7);
  EXPECT_LT(var, 1.3);
}

TEST(Censored, MatchesMleWithoutCensoring) {
  auto v = exponential_samples(1.5, 1000, 4);
  auto c = fit_exponential_censored(v, {});
  EXPECT_DOUBLE_EQ(c.tau, fit_exponential_mle(v).tau);
  EXPECT_EQ(c.method, FitMethod::mle_censored);
}

TEST(Censored, RecoversLifetimeUnderCensoring) {
  auto v = exponential_samples(2.0, 20000, 5);
  std::vector<double> obs, cens;
  for (double x : v) (x < 3.0 ? obs : cens).push_back(x < 3.0 ? x : 3.0);
  auto f = fit_exponential_censored(obs, cens);
  EXPECT_EQ(f.n_samples, v.size());
  EXPECT_NEAR(f.tau, 2.0, 3.0 * f.sigma_tau);
  EXPECT_THROW(fit_exponential_censored({}, {1.0}), ConfigError);
}

TEST(Bootstrap, ConstantSamplesGiveZeroWidth) {
  auto [lo, hi] = bootstrap_ci(std::vector<double>(50, 2.5), 200, 0.95, 1);
  EXPECT_EQ(lo, 2.5);
  EXPECT_EQ(hi, 2.5);
}

TEST(Bootstrap, WidthMatchesStandardError) {
  const std::size_t n = 10000;
  auto v = exponential_samples(1.0, n, 6);
  auto [lo, hi] = bootstrap_ci(v, 1000, 0.6827, 2);
  EXPECT_NEAR((hi - lo) / (2.0 / std::sqrt(double(n))), 1.0, 0.1);
  EXPECT_LT(lo, fit_exponential_mle(v).tau);
  EXPECT_GT(hi, fit_exponential_mle(v).tau);
}

TEST(Bootstrap, Coverage) {
  int covered = 0;
  for (int d = 0; d < 100; ++d) {
    auto [lo, hi] = bootstrap_ci(exponential_samples(1.0, 10000, 31, d), 1000, 0.95, 1000 + d);
    covered += lo <= 1.0 && 1.0 <= hi;
  }
  EXPECT_GE(covered, 92);
  EXPECT_LE(covered, 98);
}

TEST(Bootstrap, ReproducibleAndValidated) {
  auto v = exponential_samples(1.0, 300, 9);
  EXPECT_EQ(bootstrap_ci(v, 500, 0.9, 4), bootstrap_ci(v, 500, 0.9, 4));
  EXPECT_THROW(bootstrap_ci(v, 50, 0.9, 4), ConfigError);
  EXPECT_THROW(bootstrap_ci(v, 500, 1.0, 4), ConfigError);
  EXPECT_THROW(bootstrap_ci({}, 500, 0.9, 4), ConfigError);
}

TEST(SurvivalCurve, EndpointsAndMonotone) {
  auto v = exponential_samples(1.0, 1000, 10);
  double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> grid;
  for (int k = 0; k <= 100; ++k) grid.push_back(mx * k / 100.0);
  auto s = survival_curve(v, grid);
  EXPECT_EQ(s.front().second, 1.0);
  EXPECT_EQ(s.back().second, 0.0);
  for (std::size_t k = 1; k < s.size(); ++k) EXPECT_LE(s[k].second, s[k - 1].second);
  // Strictly-greater convention: a sample equal to t is not a survivor.
  auto t = survival_curve({1.0, 2.0}, {1.0});
  EXPECT_EQ(t[0].second, 0.5);
  EXPECT_THROW(survival_curve(v, {1.0, 0.0}), ConfigError);
}
