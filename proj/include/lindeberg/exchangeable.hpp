#pragma once

// Summarizing an exchangeable vector by (mu_hat, sigma_hat): the triangular
// transform G that turns the standardized vector into martingale differences,
// the conditional-moment identities it relies on, the two Gaussian
// covariances being interpolated, and the final explicit bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lindeberg/core/stats.hpp"
#include "lindeberg/sampling.hpp"
#include "lindeberg/smooth_function.hpp"
#include "lindeberg/swapping.hpp"

namespace lindeberg {

// ---------------------------------------------------------------------------
// The transform G and its inverse
// ---------------------------------------------------------------------------

/// Lower-triangular G with g_ij = 1/(n-i+1) below the diagonal (1-based),
/// ones on it, and its inverse with -1/(n-j) below the diagonal. Both are
/// filled from the closed forms; nothing is inverted numerically.
class GTransform {
public:
  explicit GTransform(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("GTransform: n must be >= 1");
    const auto m = static_cast<Eigen::Index>(n);
    g_ = Eigen::MatrixXd::Zero(m, m);
    g_inv_ = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        g_(i, j) = entry(i, j);
        g_inv_(i, j) = inverse_entry(i, j);
      }
    }
  }

  std::size_t size() const noexcept { return n_; }

  /// g_ij, 0-based.
  double entry(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (i < j) return 0.0;
    return 1.0 / static_cast<double>(n_ - i);
  }

  /// g^ij, 0-based.
  double inverse_entry(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    if (i < j) return 0.0;
    return -1.0 / static_cast<double>(n_ - j - 1);
  }

  const Eigen::MatrixXd& matrix() const noexcept { return g_; }
  const Eigen::MatrixXd& inverse() const noexcept { return g_inv_; }

  /// G x in O(n).
  std::vector<double> apply(std::span<const double> x) const {
    check(x);
    std::vector<double> out(n_);
    double prefix = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = x[i] + prefix / static_cast<double>(n_ - i);
      prefix += x[i];
    }
    return out;
  }

  /// G^{-1} x in O(n): (G^{-1}x)_i = x_i - sum_{j<i} x_j / (n-j) (1-based).
  std::vector<double> apply_inverse(std::span<const double> x) const {
    check(x);
    std::vector<double> out(n_);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = x[i] - acc;
      if (i + 1 < n_) acc += x[i] / static_cast<double>(n_ - i - 1);
    }
    return out;
  }

  /// max_j sum_i |g^ij|: 2 for n >= 2, 1 for n = 1.
  double chain_rule_factor() const { return g_inv_.cwiseAbs().colwise().sum().maxCoeff(); }

  /// max |G G^{-1} - I|.
  double identity_residual() const {
    const Eigen::MatrixXd prod = g_.triangularView<Eigen::Lower>() * g_inv_;
    return (prod - Eigen::MatrixXd::Identity(g_.rows(), g_.cols())).cwiseAbs().maxCoeff();
  }

private:
  void check(std::span<const double> x) const {
    if (x.size() != n_) throw std::invalid_argument("GTransform: vector length mismatch");
  }

  std::size_t n_;
  Eigen::MatrixXd g_;
  Eigen::MatrixXd g_inv_;
};

inline GTransform build_g_transform(std::size_t n) { return GTransform(n); }

/// R = G x_tilde for a centred input.
inline std::vector<double> r_transform(std::span<const double> x_tilde) {
  const double s = std::accumulate(x_tilde.begin(), x_tilde.end(), 0.0);
  if (x_tilde.empty() || std::abs(s) > 1e-10) {
    throw std::invalid_argument("r_transform: input is not standardized (components must sum to 0)");
  }
  return GTransform(x_tilde.size()).apply(x_tilde);
}

// ---------------------------------------------------------------------------
// Conditional moments of a random permutation, by exhaustive enumeration
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxEnumerationSize = 7;

/// One conditioning event {X_1..X_{i-1} = prefix}.
struct PrefixGroup {
  std::vector<double> prefix;
  double probability = 0.0;
  double mean_x = 0.0;   // E(X_i | prefix)
  double mean_x2 = 0.0;  // E(X_i^2 | prefix)
  double mean_r = 0.0;   // E(R_i | prefix)
  double mean_r2 = 0.0;  // E(R_i^2 | prefix)
};

/// Conditional moments of coordinate i (1-based) of a uniformly random
/// permutation of `values`, grouped by the revealed prefix of values.
struct Enumeration {
  std::size_t n = 0;
  std::size_t i = 0;
  std::vector<PrefixGroup> groups;
  double abs_r3 = 0.0;  // E|R_i|^3
};

inline Enumeration enumerate_conditionals(std::span<const double> values, std::size_t i) {
  const std::size_t n = values.size();
  if (n == 0 || n > kMaxEnumerationSize) {
    throw std::invalid_argument("enumerate_conditionals: n must be in 1..7 for exhaustive enumeration");
  }
  if (i < 1 || i > n) throw std::out_of_range("enumerate_conditionals: index out of range");
  struct Acc {
    std::size_t count = 0;
    double x = 0, x2 = 0, r = 0, r2 = 0;
  };
  std::map<std::vector<double>, Acc> acc;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t total = 0;
  double abs_r3 = 0.0;
  const double tail = static_cast<double>(n - i + 1);
  do {
    std::vector<double> prefix(i - 1);
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < i; ++k) {
      prefix[k] = values[perm[k]];
      s += prefix[k];
    }
    const double xi = values[perm[i - 1]];
    const double ri = xi + s / tail;
    auto& a = acc[prefix];
    ++a.count;
    a.x += xi;
    a.x2 += xi * xi;
    a.r += ri;
    a.r2 += ri * ri;
    abs_r3 += std::abs(ri * ri * ri);
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));

  Enumeration out{n, i, {}, abs_r3 / static_cast<double>(total)};
  for (const auto& [prefix, a] : acc) {
    const double c = static_cast<double>(a.count);
    out.groups.push_back({prefix, c / static_cast<double>(total), a.x / c, a.x2 / c, a.r / c, a.r2 / c});
  }
  return out;
}

/// max over prefixes |E(X~_i | prefix) + sum(prefix)/(n-i+1)| for the
/// standardized multiset.
inline double conditional_mean_identity_check(const MultisetPermutation& spec, std::size_t i) {
  const auto std_spec = standardized(spec);
  const auto e = enumerate_conditionals(std_spec.values, i);
  double worst = 0.0;
  for (const auto& g : e.groups) {
    const double s = std::accumulate(g.prefix.begin(), g.prefix.end(), 0.0);
    const double closed = -s / static_cast<double>(e.n - i + 1);
    worst = std::max(worst, std::abs(g.mean_x - closed));
  }
  return worst;
}

/// max over prefixes |E(R_i | prefix)|: R is a martingale difference sequence.
inline double martingale_check(const MultisetPermutation& spec, std::size_t i) {
  const auto e = enumerate_conditionals(standardized(spec).values, i);
  double worst = 0.0;
  for (const auto& g : e.groups) worst = std::max(worst, std::abs(g.mean_r));
  return worst;
}

/// Both sides of the second-moment identity and the three inequalities used
/// to feed the swapping bound. In exact mode the std errors are zero.
struct MomentIdentityReport {
  std::size_t n = 0;
  std::size_t i = 0;
  bool exact = true;
  // E(E(X~_i|F)^2) = (i-1)/((n-i+1)(n-1))
  Estimate mean_square_lhs;
  double mean_square_rhs = 0.0;
  // Var(E(X~_i^2|F)) <= E(X~_1^4)/(n-i+1)
  Estimate variance_lhs;
  double variance_rhs = 0.0;
  // E|E(R_i^2|F) - 1| <= 2 sqrt(E(X~_1^4)/(n-i+1))
  Estimate deviation_lhs;
  double deviation_rhs = 0.0;
  // E|R_i|^3 <= 8 sigma^-3 E|X_1 - mu|^3
  Estimate third_lhs;
  double third_rhs = 0.0;

  bool inequalities_hold(double tol = 1e-12, double k = 0.0) const {
    return variance_lhs.value <= variance_rhs + tol + k * variance_lhs.std_error &&
           deviation_lhs.value <= deviation_rhs + tol + k * deviation_lhs.std_error &&
           third_lhs.value <= third_rhs + tol + k * third_lhs.std_error;
  }
};

struct MomentCheckOptions {
  std::size_t replicates = 200000;  // Monte Carlo mode only
  RandomSeed seed{20060601};
};

inline MomentIdentityReport second_moment_identity_check(const MultisetPermutation& spec, std::size_t i,
                                                         const MomentCheckOptions& opt = {}) {
  const std::size_t n = spec.values.size();
  if (n < 2) throw std::invalid_argument("second_moment_identity_check: n must be >= 2");
  if (i < 1 || i > n) throw std::out_of_range("second_moment_identity_check: index out of range");
  const auto raw = center_and_scale(spec.values);
  if (raw.degenerate) throw std::invalid_argument("second_moment_identity_check: constant multiset");
  const auto& xt = raw.x_tilde;
  const double dn = static_cast<double>(n);
  const double tail = static_cast<double>(n - i + 1);

  double m4 = 0.0, m3_raw = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    m4 += std::pow(xt[k], 4);
    m3_raw += std::abs(std::pow(spec.values[k] - raw.mu_hat, 3));
  }
  m4 /= dn;
  m3_raw /= dn;

  MomentIdentityReport rep;
  rep.n = n;
  rep.i = i;
  rep.mean_square_rhs = static_cast<double>(i - 1) / (tail * (dn - 1.0));
  rep.variance_rhs = m4 / tail;
  rep.deviation_rhs = 2.0 * std::sqrt(m4 / tail);
  rep.third_rhs = 8.0 * std::pow(raw.sigma_hat, -3.0) * m3_raw;

  if (n <= kMaxEnumerationSize) {
    const auto e = enumerate_conditionals(xt, i);
    CompensatedSum ms, m2, m2sq, dev;
    for (const auto& g : e.groups) {
      ms.add(g.probability * g.mean_x * g.mean_x);
      m2.add(g.probability * g.mean_x2);
      m2sq.add(g.probability * g.mean_x2 * g.mean_x2);
      dev.add(g.probability * std::abs(g.mean_r2 - 1.0));
    }
    rep.mean_square_lhs = {ms.value(), 0.0};
    rep.variance_lhs = {std::max(0.0, m2sq.value() - m2.value() * m2.value()), 0.0};
    rep.deviation_lhs = {dev.value(), 0.0};
    rep.third_lhs = {e.abs_r3, 0.0};
    return rep;
  }

  // Monte Carlo over permutations; the inner conditional moments are still
  // exact because they only depend on what remains of the multiset.
  rep.exact = false;
  double total1 = 0.0, total2 = 0.0;
  for (double v : xt) {
    total1 += v;
    total2 += v * v;
  }
  Engine rng = make_engine(opt.seed);
  std::vector<double> pool(xt);
  RunningStats ms, m2, dev, r3;
  for (std::size_t r = 0; r < opt.replicates; ++r) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < i; ++k) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>{k, n - 1}(rng);
      std::swap(pool[k], pool[j]);
      if (k + 1 < i) {
        s1 += pool[k];
        s2 += pool[k] * pool[k];
      }
    }
    const double cm = (total1 - s1) / tail;
    const double cm2 = (total2 - s2) / tail;
    ms.push(cm * cm);
    m2.push(cm2);
    dev.push(std::abs(cm2 - cm * cm - 1.0));
    const double ri = pool[i - 1] + s1 / tail;
    r3.push(std::abs(ri * ri * ri));
  }
  rep.mean_square_lhs = {ms.mean(), ms.standard_error()};
  rep.variance_lhs = {m2.variance(), 0.0};
  // stderr of a sample variance is not tracked; report the mean's stderr as a scale.
  rep.variance_lhs.std_error = m2.standard_error();
  rep.deviation_lhs = {dev.mean(), dev.standard_error()};
  rep.third_lhs = {r3.mean(), r3.standard_error()};
  return rep;
}

// ---------------------------------------------------------------------------
// Covariances of U = G^{-1} V and of Z - mean(Z)
// ---------------------------------------------------------------------------

struct CovariancePair {
  Eigen::MatrixXd sigma;        // Cov(Z_i - Zbar, Z_j - Zbar)
  Eigen::MatrixXd sigma_tilde;  // Cov(U_i, U_j)
  double telescoping_gap = 0.0; // max |direct - telescoped| over i > j
};

namespace detail {

// S_j = sum_{k=1}^{j-1} (n-k)^{-2}, for j = 1..n (index j-1 in the result).
inline std::vector<double> inverse_square_prefix(std::size_t n) {
  std::vector<double> s(n, 0.0);
  for (std::size_t j = 1; j < n; ++j) {
    const double d = static_cast<double>(n - j);
    s[j] = s[j - 1] + 1.0 / (d * d);
  }
  return s;
}

// T_j = sum_{k=1}^{j-1} 1/((n-k)^2 (n-k-1)).
inline std::vector<double> telescoped_prefix(std::size_t n) {
  std::vector<double> t(n, 0.0);
  for (std::size_t j = 1; j < n; ++j) {
    const double d = static_cast<double>(n - j);
    t[j] = j + 1 < n ? t[j - 1] + 1.0 / (d * d * (d - 1.0)) : t[j - 1];
  }
  return t;
}

} // namespace detail

/// sigma~_ij, 1-based in the closed form, 0-based here.
inline double sigma_tilde_entry(std::size_t n, std::span<const double> s_prefix, std::size_t i, std::size_t j) {
  if (i < j) std::swap(i, j);
  if (i == j) return 1.0 + s_prefix[i];
  return -1.0 / static_cast<double>(n - j - 1) + s_prefix[j];
}

inline double sigma_entry(std::size_t n, std::size_t i, std::size_t j) {
  const double dn = static_cast<double>(n);
  return i == j ? (dn - 1.0) / dn : -1.0 / dn;
}

inline CovariancePair covariance_matrices(std::size_t n) {
  if (n < 2) throw std::invalid_argument("covariance_matrices: n must be >= 2");
  const auto m = static_cast<Eigen::Index>(n);
  const auto s = detail::inverse_square_prefix(n);
  const auto t = detail::telescoped_prefix(n);
  CovariancePair out;
  out.sigma.resize(m, m);
  out.sigma_tilde.resize(m, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      out.sigma(i, j) = out.sigma(j, i) = sigma_entry(n, i, j);
      const double direct = sigma_tilde_entry(n, s, i, j);
      out.sigma_tilde(i, j) = out.sigma_tilde(j, i) = direct;
      if (i > j) {
        const double telescoped = -1.0 / static_cast<double>(n - 1) - t[j];
        out.telescoping_gap = std::max(out.telescoping_gap, std::abs(direct - telescoped));
      }
    }
  }
  if (out.telescoping_gap > 1e-12) {
    throw std::logic_error("covariance_matrices: direct and telescoped forms disagree");
  }
  return out;
}

struct CovarianceGap {
  double elementwise = 0.0;   // sum_ij |sigma_ij - sigma~_ij|
  double closed_form = 0.0;   // 3 + 2 sum_{k=2}^{n-1} 1/k
  double crude_bound = 0.0;   // 3 sqrt(n)
};

/// Evaluated entry by entry without materializing the matrices, so large n
/// stays cheap in memory.
inline CovarianceGap covariance_gap_sum(std::size_t n) {
  if (n < 2) throw std::invalid_argument("covariance_gap_sum: n must be >= 2");
  const auto s = detail::inverse_square_prefix(n);
  CompensatedSum diag, off;
  for (std::size_t i = 0; i < n; ++i) {
    diag.add(std::abs(sigma_entry(n, i, i) - sigma_tilde_entry(n, s, i, i)));
    for (std::size_t j = 0; j < i; ++j) off.add(std::abs(sigma_entry(n, i, j) - sigma_tilde_entry(n, s, i, j)));
  }
  CompensatedSum harmonic;
  for (std::size_t k = n - 1; k >= 2; --k) harmonic.add(1.0 / static_cast<double>(k));
  return {diag.value() + 2.0 * off.value(), 3.0 + 2.0 * harmonic.value(), 3.0 * std::sqrt(static_cast<double>(n))};
}

// ---------------------------------------------------------------------------
// Gaussian integration by parts: E(xi_i h(xi)) = sum_j C_ij E(d_j h(xi))
// ---------------------------------------------------------------------------

namespace detail {

inline void require_psd(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("covariance must be square");
  if (!cov.isApprox(cov.transpose(), 1e-12) && cov.norm() > 0.0) {
    throw std::invalid_argument("covariance must be symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw std::invalid_argument("covariance is not positive semidefinite");
  }
}

// Symmetric square root, valid for singular covariances too.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

/// E prod_k xi_{idx_k} for a centred Gaussian vector (Isserlis / Wick).
inline double gaussian_moment(std::vector<std::size_t> idx, const Eigen::MatrixXd& cov) {
  if (idx.empty()) return 1.0;
  if (idx.size() % 2 == 1) return 0.0;
  const std::size_t first = idx.front();
  double total = 0.0;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double c = cov(first, idx[k]);
    if (c == 0.0) continue;
    std::vector<std::size_t> rest;
    rest.reserve(idx.size() - 2);
    for (std::size_t m = 1; m < idx.size(); ++m) {
      if (m != k) rest.push_back(idx[m]);
    }
    total += c * gaussian_moment(std::move(rest), cov);
  }
  return total;
}

/// E p(xi) for a polynomial p.
inline double gaussian_expectation(const Polynomial& p, const Eigen::MatrixXd& cov) {
  double total = 0.0;
  for (const auto& t : p.terms()) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < t.exponents.size(); ++k) {
      for (int e = 0; e < t.exponents[k]; ++e) idx.push_back(k);
    }
    total += t.coefficient * gaussian_moment(std::move(idx), cov);
  }
  return total;
}

struct SteinCheck {
  std::vector<double> lhs;        // E(xi_i h(xi))
  std::vector<double> rhs;        // sum_j C_ij E(d_j h(xi))
  std::vector<double> std_error;  // Monte Carlo only
  double max_deviation = 0.0;
  double max_z = 0.0;             // max |lhs - rhs| / stderr, Monte Carlo only
};

/// Exact mode: both sides from Gaussian moments of polynomials.
inline SteinCheck stein_identity_exact(const Polynomial& h, const Eigen::MatrixXd& cov) {
  detail::require_psd(cov);
  const std::size_t n = h.arity();
  if (static_cast<std::size_t>(cov.rows()) != n) throw std::invalid_argument("stein: dimension mismatch");
  SteinCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Polynomial::Term> shifted = h.terms();
    for (auto& t : shifted) ++t.exponents[i];
    const double lhs = gaussian_expectation(Polynomial(n, shifted), cov);
    double rhs = 0.0;
    for (std::size_t j = 0; j < n; ++j) rhs += cov(i, j) * gaussian_expectation(h.derivative(j), cov);
    out.lhs.push_back(lhs);
    out.rhs.push_back(rhs);
    out.std_error.push_back(0.0);
    out.max_deviation = std::max(out.max_deviation, std::abs(lhs - rhs));
  }
  return out;
}

/// Monte Carlo mode for any h with a gradient. The per-draw difference
/// xi_i h(xi) - sum_j C_ij d_j h(xi) has mean zero, so its sample mean is
/// compared with its own stderr.
inline SteinCheck stein_identity_mc(const SmoothFunction& h, const Eigen::MatrixXd& cov, std::size_t replicates,
                                    RandomSeed seed) {
  detail::require_psd(cov);
  const std::size_t n = h.arity();
  if (static_cast<std::size_t>(cov.rows()) != n) throw std::invalid_argument("stein: dimension mismatch");
  const Eigen::MatrixXd root = detail::psd_sqrt(cov);
  Engine rng = make_engine(seed);
  std::normal_distribution<double> gauss;
  std::vector<RunningStats> lhs(n), rhs(n), diff(n);
  Eigen::VectorXd g(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < replicates; ++r) {
    for (auto& v : g) v = gauss(rng);
    const Eigen::VectorXd xi = root * g;
    const std::span<const double> x(xi.data(), n);
    const double hv = h.value(x);
    const auto grad = h.gradient(x);
    const Eigen::Map<const Eigen::VectorXd> gv(grad.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd cg = cov * gv;
    for (std::size_t i = 0; i < n; ++i) {
      lhs[i].push(xi(i) * hv);
      rhs[i].push(cg(i));
      diff[i].push(xi(i) * hv - cg(i));
    }
  }
  SteinCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    out.lhs.push_back(lhs[i].mean());
    out.rhs.push_back(rhs[i].mean());
    out.std_error.push_back(diff[i].standard_error());
    const double dev = std::abs(diff[i].mean());
    out.max_deviation = std::max(out.max_deviation, dev);
    if (diff[i].standard_error() > 0.0) out.max_z = std::max(out.max_z, dev / diff[i].standard_error());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian interpolation between U = G^{-1} V and Z - mean(Z)
// ---------------------------------------------------------------------------

struct InterpolationResult {
  Estimate direct;      // Monte Carlo of E f0(Z~) - E f0(U)
  Estimate integral;    // 1/2 int_0^1 sum_ij E[d_i d_j f0(W_t)] (sigma_ij - sigma~_ij) dt
  double gap_bound = 0.0;  // 1/2 L'_2(f0) sum_ij |sigma_ij - sigma~_ij|
  std::size_t grid = 0;

  bool consistent(double k = 4.0) const {
    return std::abs(direct.value - integral.value) <=
           k * std::hypot(direct.std_error, integral.std_error) + 1e-12;
  }
  bool within_gap_bound(double k = 4.0) const {
    return std::abs(direct.value) <= gap_bound + k * direct.std_error + 1e-12 &&
           std::abs(integral.value) <= gap_bound + k * integral.std_error + 1e-12;
  }
};

/// `replicates` draws for the direct estimate, and as many again split evenly
/// across a midpoint grid of `grid` nodes for the integral form.
inline InterpolationResult interpolation_difference(const SmoothFunction& f0, std::size_t replicates,
                                                    std::size_t grid, RandomSeed seed) {
  const std::size_t n = f0.arity();
  if (n < 2) throw std::invalid_argument("interpolation_difference: n must be >= 2");
  if (grid == 0 || replicates < grid) throw std::invalid_argument("interpolation_difference: bad grid/replicates");
  const GTransform g(n);
  const auto cov = covariance_matrices(n);
  const Eigen::MatrixXd gap = cov.sigma - cov.sigma_tilde;

  auto draw_pair = [&](Engine& rng, std::vector<double>& u, std::vector<double>& zt) {
    std::normal_distribution<double> gauss;
    std::vector<double> v(n), z(n);
    for (auto& x : v) x = gauss(rng);
    for (auto& x : z) x = gauss(rng);
    u = g.apply_inverse(v);
    zt = build_y(0.0, 1.0, z);
  };

  InterpolationResult out;
  out.grid = grid;
  {
    Engine rng = make_engine(derive_seed(seed, 0));
    RunningStats st;
    std::vector<double> u, zt;
    for (std::size_t r = 0; r < replicates; ++r) {
      draw_pair(rng, u, zt);
      st.push(f0.value(zt) - f0.value(u));
    }
    out.direct = {st.mean(), st.standard_error()};
  }
  {
    const std::size_t per_node = replicates / grid;
    CompensatedSum mean;
    double var = 0.0;
    std::vector<double> u, zt, w(n);
    for (std::size_t k = 0; k < grid; ++k) {
      const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(grid);
      Engine rng = make_engine(derive_seed(derive_seed(seed, 1), k));
      RunningStats st;
      for (std::size_t r = 0; r < per_node; ++r) {
        draw_pair(rng, u, zt);
        for (std::size_t m = 0; m < n; ++m) w[m] = std::sqrt(1.0 - t) * u[m] + std::sqrt(t) * zt[m];
        st.push(0.5 * f0.hessian(w).cwiseProduct(gap).sum());
      }
      mean.add(st.mean());
      var += st.variance() / static_cast<double>(per_node);
    }
    const double dg = static_cast<double>(grid);
    out.integral = {mean.value() / dg, std::sqrt(var) / dg};
  }
  const double l2 = f0.bounds().L_mixed(2);
  out.gap_bound = l2 == 0.0 ? 0.0 : 0.5 * l2 * covariance_gap_sum(n).elementwise;
  return out;
}

// ---------------------------------------------------------------------------
// The summarization bound
// ---------------------------------------------------------------------------

/// 9.5 m4^{1/2} L'_2 n^{1/2} + 13 m3 L'_3 n, split into its two terms.
inline BoundReport thm12_bound_terms(double m3, double m4, double l2p, double l3p, std::size_t n) {
  if (m3 < 0.0 || m4 < 0.0 || l2p < 0.0 || l3p < 0.0) throw std::invalid_argument("thm12_bound: negative input");
  const double dn = static_cast<double>(n);
  BoundReport r;
  const double second = l2p == 0.0 ? 0.0 : 9.5 * std::sqrt(m4) * l2p * std::sqrt(dn);
  const double third = l3p == 0.0 ? 0.0 : 13.0 * m3 * l3p * dn;
  r.components = {{"second_order_term", second}, {"third_order_term", third}};
  r.bound = r.component_sum();
  return r;
}

inline double thm12_bound(double m3, double m4, double l2p, double l3p, std::size_t n) {
  return thm12_bound_terms(m3, m4, l2p, l3p, n).bound;
}

/// m_p = E|X_1 - mu_hat|^p. Exact for a multiset (mu_hat is then fixed);
/// Monte Carlo plus 3 stderr otherwise.
inline double centered_abs_moment(const ExchangeableSpec& spec, double p, RandomSeed seed = RandomSeed{11},
                                  std::size_t replicates = 100000) {
  if (const auto* ms = std::get_if<MultisetPermutation>(&spec)) {
    const auto s = center_and_scale(ms->values);
    double acc = 0.0;
    for (double v : ms->values) acc += std::pow(std::abs(v - s.mu_hat), p);
    return acc / static_cast<double>(ms->values.size());
  }
  Engine rng = make_engine(seed);
  std::vector<double> x(dimension(spec));
  RunningStats st;
  for (std::size_t r = 0; r < replicates; ++r) {
    sample_into(spec, rng, x);
    const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    st.push(std::pow(std::abs(x[0] - mu), p));
  }
  return st.mean() + 3.0 * st.standard_error();
}

/// Samples X, builds Y = mu_hat + sigma_hat (Z - Zbar) from the same X, and
/// reports the Monte Carlo gap next to the bound.
inline BoundReport end_to_end_check(const ExchangeableSpec& spec, const SmoothFunction& f, std::size_t replicates,
                                    RandomSeed seed, unsigned threads = 1) {
  validate(spec);
  if (!is_exchangeable(spec)) throw std::invalid_argument("end_to_end_check: spec must be exchangeable");
  const std::size_t n = dimension(spec);
  if (f.arity() != n) throw std::invalid_argument("end_to_end_check: arity mismatch");
  const double m3 = centered_abs_moment(spec, 3.0, derive_seed(seed, 7));
  const double m4 = centered_abs_moment(spec, 4.0, derive_seed(seed, 8));
  BoundReport report = thm12_bound_terms(m3, m4, f.bounds().L_mixed(2), f.bounds().L_mixed(3), n);
  auto blocks = for_each_block(replicates, threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Engine rng = make_engine(derive_seed(seed, 100 + b));
    std::normal_distribution<double> gauss;
    std::vector<double> x(n), z(n);
    RunningStats st;
    for (std::size_t r = begin; r < end; ++r) {
      sample_into(spec, rng, x);
      for (auto& v : z) v = gauss(rng);
      const auto s = center_and_scale(x);
      const auto y = build_y(s.mu_hat, s.sigma_hat, z);
      st.push(f.value(x) - f.value(y));
    }
    return st;
  });
  RunningStats total;
  for (const auto& b : blocks) total.merge(b);
  report.mc_estimate = total.mean();
  report.mc_stderr = total.standard_error();
  report.replicates = replicates;
  return report;
}

// ---------------------------------------------------------------------------
// Side facts the bound leans on
// ---------------------------------------------------------------------------

/// max over random points and columns j of |d_j^r f1| / (L'_r(f0) 2^r), where
/// f1(x) = f0(G^{-1} x). Index r-1 in the result.
inline std::array<double, 3> chain_rule_check(SmoothFunctionPtr f0, std::size_t points, RandomSeed seed) {
  const std::size_t n = f0->arity();
  const GTransform g(n);
  const LinearPullback f1(f0, g.inverse());
  Engine rng = make_engine(seed);
  std::normal_distribution<double> gauss;
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  std::vector<double> x(n);
  for (std::size_t p = 0; p < points; ++p) {
    for (auto& v : x) v = 2.0 * gauss(rng);
    for (std::size_t j = 0; j < n; ++j) {
      for (int r = 1; r <= 3; ++r) {
        const double lp = f0->bounds().L_mixed(r);
        const double measured = std::abs(f1.partial(x, j, r));
        if (lp == 0.0) {
          if (measured > 1e-12) worst[r - 1] = kUnbounded;
          continue;
        }
        worst[r - 1] = std::max(worst[r - 1], measured / (lp * std::pow(2.0, r)));
      }
    }
  }
  return worst;
}

struct JensenCheck {
  Estimate sigma_power;    // E(sigma_hat^r)
  Estimate centered_power; // E|X_1 - mu_hat|^r
};

inline JensenCheck jensen_check(const ExchangeableSpec& spec, double r, std::size_t replicates, RandomSeed seed) {
  validate(spec);
  Engine rng = make_engine(seed);
  std::vector<double> x(dimension(spec));
  RunningStats sp, cp;
  for (std::size_t k = 0; k < replicates; ++k) {
    sample_into(spec, rng, x);
    const auto s = center_and_scale(x);
    sp.push(std::pow(s.sigma_hat, r));
    cp.push(std::pow(std::abs(x[0] - s.mu_hat), r));
  }
  return {{sp.mean(), sp.standard_error()}, {cp.mean(), cp.standard_error()}};
}

/// sum_{i=1}^n (n-i+1)^{-1/2}
inline double inverse_sqrt_tail_sum(std::size_t n) {
  CompensatedSum s;
  for (std::size_t k = 1; k <= n; ++k) s.add(1.0 / std::sqrt(static_cast<double>(k)));
  return s.value();
}

/// E|V|^3 for V standard normal: 2 sqrt(2/pi).
inline double gaussian_abs_third_moment() { return 2.0 * std::sqrt(2.0 / std::numbers::pi); }

} // namespace lindeberg
