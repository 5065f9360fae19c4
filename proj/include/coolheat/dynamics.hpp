#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "coolheat/error.hpp"
#include "coolheat/philox.hpp"
#include "coolheat/rate_model.hpp"

namespace coolheat {

// Sublevel probabilities. Entries >= -1e-12 and sum within 1e-9 of one.
class PopulationState {
 public:
  PopulationState() = default;
  explicit PopulationState(std::vector<double> p) : p_(std::move(p)) { check_and_clamp(); }

  static PopulationState point(std::size_t n, std::size_t at) {
    std::vector<double> p(n, 0.0);
    p.at(at) = 1.0;
    return PopulationState(std::move(p));
  }
  // Uniform over the masked entries.
  static PopulationState uniform_over(const std::vector<bool>& mask) {
    auto count = static_cast<double>(std::count(mask.begin(), mask.end(), true));
    if (count == 0) throw ConfigError("uniform_over: empty support");
    std::vector<double> p(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) p[i] = 1.0 / count;
    return PopulationState(std::move(p));
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& values() const { return p_; }

  double mass(const std::vector<bool>& mask) const {
    double m = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (mask[i]) m += p_[i];
    return m;
  }

  // The masked entries, renormalized.
  PopulationState restricted(const std::vector<bool>& mask) const {
    double m = mass(mask);
    if (!(m > 0.0)) throw NumericalError("restricted: no population on the requested sublevels");
    std::vector<double> out;
    for (std::size_t i = 0; i < p_.size(); ++i)
      if (mask[i]) out.push_back(p_[i] / m);
    return PopulationState(std::move(out));
  }

  // Embed a distribution over the masked entries into the full index space.
  static PopulationState embedded(const PopulationState& sub, const std::vector<bool>& mask) {
    std::vector<double> p(mask.size(), 0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) p[i] = sub[k++];
    if (k != sub.size()) throw ConfigError("embedded: mask does not match distribution size");
    return PopulationState(std::move(p));
  }

 private:
  void check_and_clamp() {
    double sum = 0.0;
    for (double& x : p_) {
      if (!(x >= -1e-12)) throw NumericalError("population entry below -1e-12: " + std::to_string(x));
      if (x < 0.0) x = 0.0;
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw NumericalError("populations sum to " + std::to_string(sum));
  }

  std::vector<double> p_;
};

// exp(M t) for a generator M. Uniformization makes every Taylor term
// nonnegative on a step with lambda h <= 1/2; the propagator is then squared
// back up to t. Each diagonal is re-formed as 1 - (column off-diagonal sum),
// which removes the cancellation that makes plain scaling-and-squaring lose
// probability on stiff generators.
inline Eigen::MatrixXd propagator(const RateMatrix& gen, double t) {
  if (t < 0.0) throw ConfigError("evolve: t must be >= 0");
  const auto& m = gen.matrix();
  const auto n = m.rows();
  double lambda = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) lambda = std::max(lambda, -m(j, j));
  if (t == 0.0 || lambda == 0.0) return Eigen::MatrixXd::Identity(n, n);

  int squarings = 0;
  double h = t;
  while (lambda * h > 0.5) {
    h *= 0.5;
    ++squarings;
    if (squarings > 1000) throw NumericalError("evolve: time step underflow");
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(n, n) + m / lambda;
  for (Eigen::Index j = 0; j < n; ++j) q(j, j) = std::max(0.0, q(j, j));
  const double x = lambda * h;
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = (term * q) * (x / k);
    sum += term;
    if (term.maxCoeff() < 1e-20 * sum.maxCoeff()) break;
  }
  Eigen::MatrixXd e = std::exp(-x) * sum;

  auto complete_diagonal = [n](Eigen::MatrixXd& p) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double off = p.col(j).sum() - p(j, j);
      p(j, j) = std::max(0.0, 1.0 - off);
    }
  };
  complete_diagonal(e);
  for (int s = 0; s < squarings; ++s) {
    e = (e * e).eval();
    complete_diagonal(e);
  }
  return e;
}

inline PopulationState evolve(const RateMatrix& gen, const PopulationState& p0, double t) {
  if (p0.size() != gen.dimension()) throw ConfigError("evolve: population size mismatch");
  if (t == 0.0) return p0;
  Eigen::Map<const Eigen::VectorXd> v(p0.values().data(), static_cast<Eigen::Index>(p0.size()));
  Eigen::VectorXd out = propagator(gen, t) * v;
  double sum = out.sum();
  if (std::abs(sum - 1.0) > 1e-9)
    throw NumericalError("evolve: probability drift " + std::to_string(sum - 1.0));
  return PopulationState(std::vector<double>(out.data(), out.data() + out.size()));
}

// Strongly connected components of the jump graph (edge j -> i when M(i, j) > 0).
inline std::vector<std::vector<std::size_t>> communicating_classes(const RateMatrix& gen) {
  const std::size_t n = gen.dimension();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> classes;
  int counter = 0;
  // Iterative Tarjan.
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      auto& fr = frames.back();
      if (fr.next < n) {
        std::size_t w = fr.next++;
        if (w == fr.v || !(gen.rate(w, fr.v) > 0.0)) continue;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[fr.v] = std::min(low[fr.v], index[w]);
        }
        continue;
      }
      std::size_t v = fr.v;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        classes.push_back(std::move(comp));
      }
    }
  }
  return classes;
}

// Classes with no exit: the supports of the stationary distributions.
inline std::vector<std::vector<std::size_t>> closed_classes(const RateMatrix& gen) {
  std::vector<std::vector<std::size_t>> out;
  for (auto& c : communicating_classes(gen)) {
    bool closed = true;
    for (auto j : c)
      for (std::size_t i = 0; i < gen.dimension() && closed; ++i)
        if (gen.rate(i, j) > 0.0 && !std::binary_search(c.begin(), c.end(), i) && i != j) closed = false;
    if (closed) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

class DegenerateKernelError : public NumericalError {
 public:
  DegenerateKernelError(const std::string& what, std::vector<std::vector<std::string>> components)
      : NumericalError(what), components_(std::move(components)) {}
  const std::vector<std::vector<std::string>>& components() const { return components_; }

 private:
  std::vector<std::vector<std::string>> components_;
};

// Stationary distribution by Grassmann-Taksar-Heyman elimination, which
// uses no subtractions and stays accurate for rates spanning many decades.
inline PopulationState steady_state(const RateMatrix& gen) {
  auto closed = closed_classes(gen);
  if (closed.size() != 1) {
    std::vector<std::vector<std::string>> names;
    std::string msg = "steady_state: kernel has dimension " + std::to_string(closed.size()) + "; closed classes:";
    for (const auto& c : closed) {
      names.emplace_back();
      msg += " {";
      for (std::size_t k = 0; k < c.size(); ++k) {
        names.back().push_back(gen.labels()[c[k]]);
        msg += (k ? " " : "") + gen.labels()[c[k]];
      }
      msg += "}";
    }
    throw DegenerateKernelError(msg, names);
  }
  const auto& cls = closed.front();
  const std::size_t k = cls.size();
  // r(a, b) = rate from a to b inside the class.
  Eigen::MatrixXd r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) r(a, b) = a == b ? 0.0 : gen.rate(cls[b], cls[a]);
  for (Eigen::Index top = static_cast<Eigen::Index>(k) - 1; top > 0; --top) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < top; ++j) s += r(top, j);
    for (Eigen::Index i = 0; i < top; ++i) r(i, top) /= s;
    for (Eigen::Index i = 0; i < top; ++i)
      for (Eigen::Index j = 0; j < top; ++j)
        if (i != j) r(i, j) += r(i, top) * r(top, j);
  }
  std::vector<double> pi(k, 0.0);
  pi[0] = 1.0;
  for (Eigen::Index n = 1; n < static_cast<Eigen::Index>(k); ++n)
    for (Eigen::Index i = 0; i < n; ++i) pi[static_cast<std::size_t>(n)] += pi[static_cast<std::size_t>(i)] * r(i, n);
  double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  std::vector<double> p(gen.dimension(), 0.0);
  for (std::size_t a = 0; a < k; ++a) p[cls[a]] = pi[a] / total;
  return PopulationState(std::move(p));
}

// Copy of `gen` with every stop state made absorbing.
inline RateMatrix make_absorbing(const RateMatrix& gen, const std::vector<bool>& stop) {
  Eigen::MatrixXd m = gen.matrix();
  for (std::size_t j = 0; j < gen.dimension(); ++j)
    if (stop[j]) m.col(static_cast<Eigen::Index>(j)).setZero();
  return RateMatrix(std::move(m), gen.labels(), gen.manifolds());
}

// Fraction of initial population not yet in a stop state at time t.
inline double survival_probability(const RateMatrix& gen, const PopulationState& p0,
                                   const std::vector<bool>& stop, double t) {
  auto p = evolve(make_absorbing(gen, stop), p0, t);
  double alive = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!stop[i]) alive += p[i];
  return alive;
}

// Expected first-passage time into the stop set, by a linear solve on the
// transient block.
inline double mean_first_passage_time(const RateMatrix& gen, const PopulationState& p0,
                                      const std::vector<bool>& stop) {
  std::vector<Eigen::Index> t;
  for (std::size_t i = 0; i < gen.dimension(); ++i)
    if (!stop[i]) t.push_back(static_cast<Eigen::Index>(i));
  if (t.empty()) return 0.0;
  const auto nt = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a(nt, nt);
  Eigen::VectorXd b(nt);
  for (Eigen::Index i = 0; i < nt; ++i) {
    b(i) = p0[static_cast<std::size_t>(t[i])];
    for (Eigen::Index j = 0; j < nt; ++j) a(i, j) = -gen.matrix()(t[i], t[j]);
  }
  auto lu = a.fullPivLu();
  if (!lu.isInvertible()) throw ConfigError("mean_first_passage_time: stop set not reachable");
  return (lu.solve(b)).sum();
}

struct JumpEvent {
  double time = 0.0;
  std::size_t from = 0;
  std::size_t to = 0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<JumpEvent> events;
  std::size_t terminal = 0;
  std::optional<double> dark_time;
};

struct DarkTimeSample {
  std::size_t trajectory_index = 0;
  double dark_time = 0.0;
  std::size_t terminal = 0;
};

namespace detail {

// Outgoing jump table with cumulative rates for categorical selection.
struct JumpTable {
  std::vector<std::vector<std::size_t>> targets;
  std::vector<std::vector<double>> cumulative;
  std::vector<double> exit;

  explicit JumpTable(const RateMatrix& gen) {
    const std::size_t n = gen.dimension();
    targets.resize(n);
    cumulative.resize(n);
    exit.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == j || !(gen.rate(i, j) > 0.0)) continue;
        acc += gen.rate(i, j);
        targets[j].push_back(i);
        cumulative[j].push_back(acc);
      }
      exit[j] = acc;
    }
  }
};

inline void require_reachable(const RateMatrix& gen, const std::vector<bool>& stop,
                              const std::vector<std::size_t>& starts) {
  const std::size_t n = gen.dimension();
  if (stop.size() != n) throw ConfigError("stop mask size mismatch");
  // States that can reach the stop set.
  std::vector<bool> can_stop = stop;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (can_stop[j]) continue;
      for (std::size_t i = 0; i < n; ++i)
        if (i != j && can_stop[i] && gen.rate(i, j) > 0.0) {
          can_stop[j] = true;
          changed = true;
          break;
        }
    }
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> queue(starts.begin(), starts.end());
  for (auto s : starts) seen.at(s) = true;
  while (!queue.empty()) {
    std::size_t j = queue.back();
    queue.pop_back();
    if (stop[j]) continue;
    if (!can_stop[j])
      throw ConfigError("stop set unreachable from " + gen.labels()[j]);
    for (std::size_t i = 0; i < n; ++i)
      if (i != j && !seen[i] && gen.rate(i, j) > 0.0) {
        seen[i] = true;
        queue.push_back(i);
      }
  }
}

inline Trajectory run_trajectory(const JumpTable& table, std::size_t start, const std::vector<bool>& stop,
                                 RngStream& rng, bool record_events) {
  Trajectory tr;
  double t = 0.0;
  std::size_t state = start;
  while (!stop[state]) {
    double exit = table.exit[state];
    t += rng.exponential(exit);
    double pick = rng.uniform() * exit;
    const auto& cum = table.cumulative[state];
    auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
    if (k >= cum.size()) k = cum.size() - 1;
    std::size_t next = table.targets[state][k];
    if (record_events) tr.events.push_back({t, state, next});
    state = next;
  }
  tr.terminal = state;
  tr.dark_time = t;
  return tr;
}

inline std::size_t draw_categorical(const PopulationState& p, RngStream& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    acc += p[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace detail

// Exact continuous-time Markov chain sampling from `start` until a stop
// state is entered. Uses stream (seed, 0); its first uniform is reserved for
// initial-state selection so this matches sample_dark_times with n = 1.
inline Trajectory sample_trajectory(const RateMatrix& gen, std::size_t start, const std::vector<bool>& stop,
                                    std::uint64_t seed) {
  detail::require_reachable(gen, stop, {start});
  detail::JumpTable table(gen);
  RngStream rng(seed, 0);
  rng.uniform();
  Trajectory tr = detail::run_trajectory(table, start, stop, rng, true);
  tr.seed = seed;
  return tr;
}

// n independent dark times; trajectory k uses stream (seed, k) and draws its
// start from `initial`. Results do not depend on `threads`.
inline std::vector<DarkTimeSample> sample_dark_times(const RateMatrix& gen, const PopulationState& initial,
                                                     const std::vector<bool>& stop, std::size_t n,
                                                     std::uint64_t seed, unsigned threads = 1) {
  if (n < 1) throw ConfigError("sample_dark_times: n must be >= 1");
  if (initial.size() != gen.dimension()) throw ConfigError("sample_dark_times: population size mismatch");
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < initial.size(); ++i)
    if (initial[i] > 0.0) starts.push_back(i);
  detail::require_reachable(gen, stop, starts);
  detail::JumpTable table(gen);
  std::vector<DarkTimeSample> out(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      RngStream rng(seed, k);
      std::size_t start = detail::draw_categorical(initial, rng);
      auto tr = detail::run_trajectory(table, start, stop, rng, false);
      out[k] = {k, *tr.dark_time, tr.terminal};
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      std::size_t b = w * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

inline std::vector<double> dark_time_values(const std::vector<DarkTimeSample>& s) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& x : s) v.push_back(x.dark_time);
  return v;
}

}  // namespace coolheat
