#pragma once

// Lindeberg swapping for weakly dependent inputs: the explicit bound built
// from conditional-moment discrepancies, and a Monte Carlo estimate of the
// true gap through the hybrid vectors
//   Z_i = (X_1, ..., X_i, Y_{i+1}, ..., Y_n).

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lindeberg/core/stats.hpp"
#include "lindeberg/sampling.hpp"
#include "lindeberg/smooth_function.hpp"

namespace lindeberg {

/// A computed bound next to the Monte Carlo estimate of what it bounds.
struct BoundReport {
  double bound = 0.0;
  double mc_estimate = 0.0;
  double mc_stderr = 0.0;
  std::size_t replicates = 0;
  std::vector<std::pair<std::string, double>> components;

  double component_sum() const {
    CompensatedSum s;
    for (const auto& [_, v] : components) s.add(v);
    return s.value();
  }

  /// |estimate| <= bound + k * stderr
  bool dominated(double k = 3.0) const { return std::abs(mc_estimate) <= bound + k * mc_stderr; }
};

inline void to_json(nlohmann::json& j, const BoundReport& r) {
  nlohmann::json parts = nlohmann::json::object();
  for (const auto& [name, v] : r.components) parts[name] = v;
  j = nlohmann::json{{"bound", r.bound},           {"mc_estimate", r.mc_estimate},
                     {"mc_stderr", r.mc_stderr},   {"replicates", r.replicates},
                     {"components", parts},        {"dominated", r.dominated()}};
}

// ---------------------------------------------------------------------------
// The bound
// ---------------------------------------------------------------------------

/// sum_i (A_i L1 + B_i L2 / 2) + n L3 M3 / 6, split into its three terms.
inline BoundReport lindeberg_bound_terms(std::span<const double> a, std::span<const double> b, double m3, double l1,
                                         double l2, double l3) {
  if (a.size() != b.size()) throw std::invalid_argument("lindeberg_bound: A and B differ in length");
  auto nonneg = [](double v) { return v >= 0.0; };
  if (!nonneg(m3) || !nonneg(l1) || !nonneg(l2) || !nonneg(l3)) {
    throw std::invalid_argument("lindeberg_bound: negative input");
  }
  CompensatedSum first, second;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!nonneg(a[i]) || !nonneg(b[i])) throw std::invalid_argument("lindeberg_bound: negative A_i or B_i");
    // 0 * inf counts as 0: a vanishing discrepancy needs no derivative bound.
    if (a[i] > 0.0) first.add(a[i] * l1);
    if (b[i] > 0.0) second.add(0.5 * b[i] * l2);
  }
  const double n = static_cast<double>(a.size());
  const double third = (l3 == 0.0 || m3 == 0.0) ? 0.0 : n * l3 * m3 / 6.0;
  BoundReport r;
  r.components = {{"first_moment_term", first.value()},
                  {"second_moment_term", second.value()},
                  {"third_moment_term", third}};
  r.bound = r.component_sum();
  return r;
}

inline double lindeberg_bound(std::span<const double> a, std::span<const double> b, double m3, double l1, double l2,
                              double l3) {
  return lindeberg_bound_terms(a, b, m3, l1, l2, l3).bound;
}

// ---------------------------------------------------------------------------
// Conditional-moment discrepancies A_i, B_i
// ---------------------------------------------------------------------------

struct AbEstimate {
  Estimate a;
  Estimate b;
  bool exact = false;
};

struct AbOptions {
  std::size_t replicates = 100000;       // outer draws when enumeration is too large
  std::size_t inner_replicates = 4000;   // nested draws for specs without a closed-form oracle
  std::size_t enumeration_limit = 2000000;
};

namespace detail {

inline double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Counts how many prefix-count vectors exist, stopping once `limit` is passed.
inline std::size_t count_compositions(std::span<const std::size_t> caps, std::size_t total, std::size_t limit) {
  std::vector<std::size_t> ways(total + 1, 0);
  ways[0] = 1;
  for (std::size_t cap : caps) {
    std::vector<std::size_t> next(total + 1, 0);
    for (std::size_t t = 0; t <= total; ++t) {
      if (ways[t] == 0) continue;
      for (std::size_t a = 0; a <= cap && t + a <= total; ++a) {
        next[t + a] = std::min(limit + 1, next[t + a] + ways[t]);
      }
    }
    ways = std::move(next);
  }
  return ways[total];
}

// Random permutation of a multiset, revealed position by position. Given the
// first i-1 values, only how many copies of each distinct value were used
// matters, and that count vector is multivariate hypergeometric.
inline AbEstimate multiset_ab(const MultisetPermutation& spec, double y_mean, double y_second, std::size_t i,
                              const AbOptions& opt, RandomSeed seed) {
  std::map<double, std::size_t> counts;
  for (double v : spec.values) ++counts[v];
  std::vector<double> values;
  std::vector<std::size_t> caps;
  for (const auto& [v, c] : counts) {
    values.push_back(v);
    caps.push_back(c);
  }
  const std::size_t n = spec.values.size();
  const std::size_t m = i - 1;
  double total1 = 0.0, total2 = 0.0;
  for (double v : spec.values) {
    total1 += v;
    total2 += v * v;
  }
  const double remaining = static_cast<double>(n - m);

  AbEstimate out;
  if (count_compositions(caps, m, opt.enumeration_limit) <= opt.enumeration_limit) {
    CompensatedSum a_sum, b_sum;
    std::vector<std::size_t> used(values.size(), 0);
    const double log_norm = log_choose(static_cast<double>(n), static_cast<double>(m));
    std::function<void(std::size_t, std::size_t, double, double, double)> walk =
        [&](std::size_t k, std::size_t left, double log_w, double s1, double s2) {
          if (k + 1 == values.size()) {
            if (left > caps[k]) return;
            log_w += log_choose(static_cast<double>(caps[k]), static_cast<double>(left));
            s1 += static_cast<double>(left) * values[k];
            s2 += static_cast<double>(left) * values[k] * values[k];
            const double p = std::exp(log_w - log_norm);
            a_sum.add(p * std::abs((total1 - s1) / remaining - y_mean));
            b_sum.add(p * std::abs((total2 - s2) / remaining - y_second));
            return;
          }
          for (std::size_t a = 0; a <= std::min(left, caps[k]); ++a) {
            walk(k + 1, left - a,
                 log_w + log_choose(static_cast<double>(caps[k]), static_cast<double>(a)),
                 s1 + static_cast<double>(a) * values[k], s2 + static_cast<double>(a) * values[k] * values[k]);
          }
        };
    walk(0, m, 0.0, 0.0, 0.0);
    out.a = {a_sum.value(), 0.0};
    out.b = {b_sum.value(), 0.0};
    out.exact = true;
    return out;
  }

  RunningStats a_stats, b_stats;
  Engine rng = make_engine(seed);
  std::vector<double> pool(spec.values);
  for (std::size_t r = 0; r < opt.replicates; ++r) {
    double s1 = 0.0, s2 = 0.0;
    // Partial Fisher-Yates: the first m slots become a uniform random prefix.
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>{k, n - 1}(rng);
      std::swap(pool[k], pool[j]);
      s1 += pool[k];
      s2 += pool[k] * pool[k];
    }
    a_stats.push(std::abs((total1 - s1) / remaining - y_mean));
    b_stats.push(std::abs((total2 - s2) / remaining - y_second));
  }
  out.a = {a_stats.mean(), a_stats.standard_error()};
  out.b = {b_stats.mean(), b_stats.standard_error()};
  return out;
}

// Law of the state occupied at step `step` (0-based).
inline std::vector<double> markov_marginal(const MarkovChain& chain, std::size_t step) {
  std::vector<double> p = chain.initial;
  const std::size_t k = chain.states.size();
  for (std::size_t s = 0; s < step; ++s) {
    std::vector<double> q(k, 0.0);
    for (std::size_t from = 0; from < k; ++from) {
      for (std::size_t to = 0; to < k; ++to) q[to] += p[from] * chain.transition[from][to];
    }
    p = std::move(q);
  }
  return p;
}

inline AbEstimate markov_ab(const MarkovChain& chain, double y_mean, double y_second, std::size_t i) {
  const std::size_t k = chain.states.size();
  AbEstimate out;
  out.exact = true;
  if (i == 1) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      m1 += chain.initial[s] * chain.states[s];
      m2 += chain.initial[s] * chain.states[s] * chain.states[s];
    }
    out.a = {std::abs(m1 - y_mean), 0.0};
    out.b = {std::abs(m2 - y_second), 0.0};
    return out;
  }
  // E(X_i | past) depends on the past only through the state at i-1.
  const auto prev = markov_marginal(chain, i - 2);
  double a = 0.0, b = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      m1 += chain.transition[s][t] * chain.states[t];
      m2 += chain.transition[s][t] * chain.states[t] * chain.states[t];
    }
    a += prev[s] * std::abs(m1 - y_mean);
    b += prev[s] * std::abs(m2 - y_second);
  }
  out.a = {a, 0.0};
  out.b = {b, 0.0};
  return out;
}

// Posterior moments of X_i given the prefix, by self-normalised importance
// sampling over the mixing law.
inline AbEstimate conditionally_iid_ab(const ConditionallyIid& spec, double y_mean, double y_second, std::size_t i,
                                       const AbOptions& opt, RandomSeed seed) {
  const bool location = spec.mode == ConditionallyIid::Mode::location;
  const double e1 = spec.conditional.mean();
  const double e2 = spec.conditional.second_moment();
  auto moment1 = [&](double th) { return location ? th + e1 : th * e1; };
  auto moment2 = [&](double th) { return location ? th * th + 2.0 * th * e1 + e2 : th * th * e2; };

  AbEstimate out;
  if (i == 1) {
    // No past: E(X_1) and E(X_1^2) are plain mixture moments.
    const double tm = spec.mixing.mean();
    const double t2 = spec.mixing.second_moment();
    const double m1 = location ? tm + e1 : tm * e1;
    const double m2 = location ? t2 + 2.0 * tm * e1 + e2 : t2 * e2;
    out.a = {std::abs(m1 - y_mean), 0.0};
    out.b = {std::abs(m2 - y_second), 0.0};
    out.exact = true;
    return out;
  }
  if (opt.inner_replicates == 0 || spec.conditional.is_discrete()) {
    throw std::invalid_argument("estimate_ab: no conditional-moment oracle for this spec and no nested budget");
  }
  auto log_lik = [&](double th, std::span<const double> prefix) {
    double ll = 0.0;
    for (double x : prefix) {
      double dens;
      if (location) {
        dens = spec.conditional.pdf(x - th);
      } else {
        if (th == 0.0) return -std::numeric_limits<double>::infinity();
        dens = spec.conditional.pdf(x / th) / std::abs(th);
      }
      if (!(dens > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += std::log(dens);
    }
    return ll;
  };

  Engine outer = make_engine(derive_seed(seed, 0));
  Engine inner = make_engine(derive_seed(seed, 1));
  RunningStats a_stats, b_stats;
  std::vector<double> x(spec.n);
  std::vector<double> thetas(opt.inner_replicates), logw(opt.inner_replicates);
  const ExchangeableSpec as_spec = spec;
  for (std::size_t r = 0; r < opt.replicates; ++r) {
    sample_into(as_spec, outer, x);
    const std::span<const double> prefix(x.data(), i - 1);
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opt.inner_replicates; ++k) {
      thetas[k] = spec.mixing.sample(inner);
      logw[k] = log_lik(thetas[k], prefix);
      lmax = std::max(lmax, logw[k]);
    }
    if (!std::isfinite(lmax)) continue;
    double wsum = 0.0, c1 = 0.0, c2 = 0.0;
    for (std::size_t k = 0; k < opt.inner_replicates; ++k) {
      const double w = std::exp(logw[k] - lmax);
      wsum += w;
      c1 += w * moment1(thetas[k]);
      c2 += w * moment2(thetas[k]);
    }
    a_stats.push(std::abs(c1 / wsum - y_mean));
    b_stats.push(std::abs(c2 / wsum - y_second));
  }
  out.a = {a_stats.mean(), a_stats.standard_error()};
  out.b = {b_stats.mean(), b_stats.standard_error()};
  return out;
}

} // namespace detail

/// A_i = E|E(X_i | X_1..X_{i-1}) - E Y_i| and B_i likewise with squares.
/// `i` is 1-based. Exact (zero stderr) when the prefix law can be enumerated
/// or the chain kernel gives the conditional moments directly.
inline AbEstimate estimate_ab(const ExchangeableSpec& spec, double y_mean, double y_second, std::size_t i,
                              const AbOptions& opt, RandomSeed seed) {
  validate(spec);
  const std::size_t n = dimension(spec);
  if (i < 1 || i > n) throw std::out_of_range("estimate_ab: index out of range");
  return std::visit(
      [&](const auto& s) -> AbEstimate {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) {
          return detail::multiset_ab(s, y_mean, y_second, i, opt, seed);
        } else if constexpr (std::is_same_v<T, IidFromDistribution>) {
          return AbEstimate{{std::abs(s.dist.mean() - y_mean), 0.0},
                            {std::abs(s.dist.second_moment() - y_second), 0.0}, true};
        } else if constexpr (std::is_same_v<T, MarkovChain>) {
          return detail::markov_ab(s, y_mean, y_second, i);
        } else {
          return detail::conditionally_iid_ab(s, y_mean, y_second, i, opt, seed);
        }
      },
      spec);
}

/// max_i E|X_i|^3. Exact for multisets, i.i.d. laws and chains; Monte Carlo
/// (1e5 draws) for mixtures.
inline double max_abs_third_moment(const ExchangeableSpec& spec, RandomSeed seed = RandomSeed{7}) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) {
          double acc = 0.0;
          for (double v : s.values) acc += std::abs(v * v * v);
          return acc / static_cast<double>(s.values.size());
        } else if constexpr (std::is_same_v<T, IidFromDistribution>) {
          return s.dist.abs_moment(3.0);
        } else if constexpr (std::is_same_v<T, MarkovChain>) {
          double best = 0.0;
          for (std::size_t step = 0; step < s.n; ++step) {
            const auto p = detail::markov_marginal(s, step);
            double m = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) m += p[k] * std::abs(std::pow(s.states[k], 3));
            best = std::max(best, m);
          }
          return best;
        } else {
          // Exchangeable, so every coordinate has the law of X_1.
          Engine rng = make_engine(seed);
          const ExchangeableSpec as_spec = s;
          std::vector<double> x(s.n);
          RunningStats st;
          for (int r = 0; r < 100000; ++r) {
            sample_into(as_spec, rng, x);
            st.push(std::abs(x[0] * x[0] * x[0]));
          }
          return st.mean() + 3.0 * st.standard_error();
        }
      },
      spec);
}

/// M3 = max_i (E|X_i|^3 + E|Y_i|^3) for Y i.i.d. from `y`.
inline double m3_bound(const ExchangeableSpec& x_spec, const Distribution& y) {
  return max_abs_third_moment(x_spec) + y.abs_moment(3.0);
}

// ---------------------------------------------------------------------------
// Telescoping Monte Carlo
// ---------------------------------------------------------------------------

struct TelescopingResult {
  Estimate total;                 // E f(X) - E f(Y)
  std::vector<Estimate> steps;    // E f(Z_i) - E f(Z_{i-1}), i = 1..n
  double max_identity_residual = 0.0;  // max over replicates |sum of steps - (f(X) - f(Y))|
  std::size_t replicates = 0;
};

/// Draws X and Y from independent streams, walks the hybrids Z_0 = Y, ...,
/// Z_n = X and accumulates every step.
inline TelescopingResult telescoping_difference(const SmoothFunction& f, const ExchangeableSpec& x_spec,
                                                const ExchangeableSpec& y_spec, std::size_t replicates,
                                                RandomSeed seed, unsigned threads = 1) {
  validate(x_spec);
  validate(y_spec);
  const std::size_t n = dimension(x_spec);
  if (dimension(y_spec) != n || f.arity() != n) {
    throw std::invalid_argument("telescoping_difference: arity mismatch between f and specs");
  }
  struct Block {
    RunningStats total;
    std::vector<RunningStats> steps;
    double residual = 0.0;
  };
  const RandomSeed x_root = derive_seed(seed, 0);
  const RandomSeed y_root = derive_seed(seed, 1);
  auto blocks = for_each_block(replicates, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Block out;
    out.steps.resize(n);
    Engine xr = make_engine(derive_seed(x_root, b));
    Engine yr = make_engine(derive_seed(y_root, b));
    std::vector<double> x(n), y(n), z(n);
    for (std::size_t r = begin; r < end; ++r) {
      sample_into(x_spec, xr, x);
      sample_into(y_spec, yr, y);
      z = y;
      const double fy = f.value(z);
      double prev = fy;
      CompensatedSum acc;
      for (std::size_t i = 0; i < n; ++i) {
        z[i] = x[i];
        const double cur = f.value(z);
        out.steps[i].push(cur - prev);
        acc.add(cur - prev);
        prev = cur;
      }
      const double total = prev - fy;
      out.total.push(total);
      out.residual = std::max(out.residual, std::abs(acc.value() - total));
    }
    return out;
  });
  TelescopingResult res;
  RunningStats total;
  std::vector<RunningStats> steps(n);
  for (const auto& blk : blocks) {
    total.merge(blk.total);
    for (std::size_t i = 0; i < n; ++i) steps[i].merge(blk.steps[i]);
    res.max_identity_residual = std::max(res.max_identity_residual, blk.residual);
  }
  res.total = {total.mean(), total.standard_error()};
  for (const auto& s : steps) res.steps.push_back({s.mean(), s.standard_error()});
  res.replicates = replicates;
  return res;
}

/// |f(z + delta e_i) - f(z) - delta d_i f(z) - delta^2/2 d_i^2 f(z)|, which
/// third-order Taylor bounds by |delta|^3 L3 / 6.
inline double taylor_step_check(const SmoothFunction& f, std::span<const double> base, double delta, std::size_t i) {
  std::vector<double> moved(base.begin(), base.end());
  moved[i] += delta;
  return std::abs(f.value(moved) - f.value(base) - delta * f.partial(base, i, 1) -
                  0.5 * delta * delta * f.partial(base, i, 2));
}

// ---------------------------------------------------------------------------
// One-call check
// ---------------------------------------------------------------------------

/// Bound and Monte Carlo gap for X from `x_spec` against Y i.i.d. from `y`.
inline BoundReport lindeberg_check(const SmoothFunction& f, const ExchangeableSpec& x_spec, const Distribution& y,
                                   std::size_t replicates, RandomSeed seed, unsigned threads = 1,
                                   const AbOptions& ab_opt = {}) {
  const std::size_t n = dimension(x_spec);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const auto ab = estimate_ab(x_spec, y.mean(), y.second_moment(), i, ab_opt, derive_seed(seed, 1000 + i));
    // Estimated discrepancies are inflated by 3 stderr so the bound stays an upper bound.
    a[i - 1] = ab.a.value + 3.0 * ab.a.std_error;
    b[i - 1] = ab.b.value + 3.0 * ab.b.std_error;
  }
  const auto& bd = f.bounds();
  BoundReport report = lindeberg_bound_terms(a, b, m3_bound(x_spec, y), bd.L(1), bd.L(2), bd.L(3));
  const auto tele =
      telescoping_difference(f, x_spec, IidFromDistribution{y, n}, replicates, derive_seed(seed, 1), threads);
  report.mc_estimate = tele.total.value;
  report.mc_stderr = tele.total.std_error;
  report.replicates = replicates;
  return report;
}

} // namespace lindeberg
