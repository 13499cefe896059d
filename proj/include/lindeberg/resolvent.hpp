#pragma once

// Resolvent calculus for h(x) = N^{-1} Tr (A(x) - zI)^{-1}, where A(x) is the
// Wigner map over upper-triangle coordinates: exact partials of order 1..3,
// Hilbert-Schmidt trace bounds, and the constants that control g(Re h).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lindeberg/core/seed.hpp"
#include "lindeberg/smooth_function.hpp"
#include "lindeberg/spectral.hpp"
#include "lindeberg/swapping.hpp"

namespace lindeberg {

/// Upper-triangle coordinate alpha = (i, j), i <= j, 0-based.
struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

inline void validate(IndexPair a, std::size_t N) {
  if (a.i > a.j || a.j >= N) throw std::out_of_range("IndexPair: need i <= j < N");
}

/// Inverse of upper_index.
inline IndexPair triangle_pair(std::size_t N, std::size_t k) {
  if (k >= triangle_size(N)) throw std::out_of_range("triangle_pair: index out of range");
  std::size_t i = 0;
  while (k >= N - i) {
    k -= N - i;
    ++i;
  }
  return {i, i + k};
}

// ---------------------------------------------------------------------------
// Resolvent
// ---------------------------------------------------------------------------

/// Eigendecomposition of A kept so that G(z) is cheap for any z.
class ResolventWorkspace {
public:
  ResolventWorkspace(const Eigen::MatrixXd& a, cplx z) {
    require_symmetric(a);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw std::runtime_error("ResolventWorkspace: eigensolver failed");
    q_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    set_z(z);
  }

  void set_z(cplx z) {
    require_nonreal(z);
    z_ = z;
    const Eigen::VectorXcd d = (lambda_.cast<cplx>().array() - z).inverse();
    const Eigen::MatrixXcd qc = q_.cast<cplx>();
    g_ = qc * d.asDiagonal() * qc.transpose();
    g2_ = g_ * g_;
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(lambda_.size()); }
  cplx z() const noexcept { return z_; }
  const Eigen::MatrixXcd& G() const noexcept { return g_; }
  const Eigen::MatrixXcd& G2() const noexcept { return g2_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return lambda_; }

  /// h = N^{-1} Tr G.
  cplx h() const { return g_.trace() / static_cast<double>(size()); }

  /// max |G (A - zI) - I|, to be read against 1/|Im z|.
  double residual(const Eigen::MatrixXd& a) const {
    const auto m = static_cast<Eigen::Index>(size());
    const Eigen::MatrixXcd shifted = a.cast<cplx>() - z_ * Eigen::MatrixXcd::Identity(m, m);
    return (g_ * shifted - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff();
  }

  /// max_i 1/|lambda_i - z|.
  double spectral_radius() const { return (lambda_.cast<cplx>().array() - z_).abs().inverse().maxCoeff(); }

private:
  Eigen::MatrixXd q_;
  Eigen::VectorXd lambda_;
  cplx z_;
  Eigen::MatrixXcd g_;
  Eigen::MatrixXcd g2_;
};

inline Eigen::MatrixXcd resolvent(const Eigen::MatrixXd& a, cplx z) { return ResolventWorkspace(a, z).G(); }

// ---------------------------------------------------------------------------
// Partials of h
// ---------------------------------------------------------------------------

namespace detail {

// Nonzero entries of d_alpha A / N^{-1/2}: one on the diagonal, two off it.
inline int entries_of(IndexPair a, std::array<std::pair<std::size_t, std::size_t>, 2>& out) {
  out[0] = {a.i, a.j};
  if (a.i == a.j) return 1;
  out[1] = {a.j, a.i};
  return 2;
}

} // namespace detail

/// Tr(G E_1 G E_2 ... G E_k G) with E_m = d_{alpha_m} A. With E = s e_p e_q^T
/// this collapses to s^k (G^2)_{q_k p_1} prod_m G_{q_m p_{m+1}}.
inline cplx resolvent_trace(const ResolventWorkspace& ws, std::span<const IndexPair> alphas) {
  const std::size_t N = ws.size();
  const std::size_t k = alphas.size();
  if (k == 0 || k > 3) throw std::invalid_argument("resolvent_trace: 1 to 3 indices");
  std::array<std::array<std::pair<std::size_t, std::size_t>, 2>, 3> ent{};
  std::array<int, 3> cnt{};
  for (std::size_t m = 0; m < k; ++m) {
    validate(alphas[m], N);
    cnt[m] = detail::entries_of(alphas[m], ent[m]);
  }
  const auto& G = ws.G();
  const auto& G2 = ws.G2();
  cplx total = 0.0;
  std::array<int, 3> c{};
  while (true) {
    cplx term = G2(ent[k - 1][c[k - 1]].second, ent[0][c[0]].first);
    for (std::size_t m = 0; m + 1 < k; ++m) term *= G(ent[m][c[m]].second, ent[m + 1][c[m + 1]].first);
    total += term;
    std::size_t m = 0;
    while (m < k && ++c[m] == cnt[m]) c[m++] = 0;
    if (m == k) break;
  }
  return total * std::pow(static_cast<double>(N), -0.5 * static_cast<double>(k));
}

/// h and its partials along alpha, (alpha, beta), (alpha, beta, gamma).
struct ResolventJet {
  cplx h = 0.0;
  cplx d1 = 0.0;
  cplx d2 = 0.0;
  cplx d3 = 0.0;
};

/// d_alpha h = -N^{-1} Tr(G E_a G).
inline cplx h_d1(const ResolventWorkspace& ws, IndexPair a) {
  const std::array<IndexPair, 1> seq{a};
  return -resolvent_trace(ws, seq) / static_cast<double>(ws.size());
}

/// Sum over both orderings of (a, b), sign +.
inline cplx h_d2(const ResolventWorkspace& ws, IndexPair a, IndexPair b) {
  const std::array<IndexPair, 2> ba{b, a}, ab{a, b};
  return (resolvent_trace(ws, ba) + resolvent_trace(ws, ab)) / static_cast<double>(ws.size());
}

/// Sum over all six orderings of (a, b, c), sign -.
inline cplx h_d3(const ResolventWorkspace& ws, IndexPair a, IndexPair b, IndexPair c) {
  const std::array<IndexPair, 3> p{a, b, c};
  std::array<int, 3> order{0, 1, 2};
  cplx s = 0.0;
  do {
    const std::array<IndexPair, 3> seq{p[order[0]], p[order[1]], p[order[2]]};
    s += resolvent_trace(ws, seq);
  } while (std::next_permutation(order.begin(), order.end()));
  return -s / static_cast<double>(ws.size());
}

inline ResolventJet resolvent_partials(const ResolventWorkspace& ws, IndexPair a, IndexPair b, IndexPair c) {
  return {ws.h(), h_d1(ws, a), h_d2(ws, a, b), h_d3(ws, a, b, c)};
}

inline ResolventJet resolvent_partials(const ResolventWorkspace& ws, IndexPair a) {
  return resolvent_partials(ws, a, a, a);
}

/// Convenience form taking the upper-triangle point x directly.
inline ResolventJet resolvent_partials(std::size_t N, std::span<const double> x, cplx z, IndexPair a, IndexPair b,
                                       IndexPair c) {
  const ResolventWorkspace ws(wigner_from_entries(N, x), z);
  return resolvent_partials(ws, a, b, c);
}

inline cplx resolvent_h(std::size_t N, std::span<const double> x, cplx z) {
  return ResolventWorkspace(wigner_from_entries(N, x), z).h();
}

// ---------------------------------------------------------------------------
// Hilbert-Schmidt norm and trace bounds
// ---------------------------------------------------------------------------

template <class Derived>
double hs_norm(const Eigen::MatrixBase<Derived>& b) {
  return std::sqrt(b.cwiseAbs2().sum());
}

/// d_alpha A as a dense matrix.
inline Eigen::MatrixXd wigner_direction(std::size_t N, IndexPair a) {
  validate(a, N);
  const auto m = static_cast<Eigen::Index>(N);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, m);
  const double s = 1.0 / std::sqrt(static_cast<double>(N));
  e(a.i, a.j) = s;
  e(a.j, a.i) = s;
  return e;
}

/// Per-order trace bounds T_r and h-partial bounds H_r = (1, 2, 6) T_r / N.
struct ResolventBounds {
  std::array<double, 3> T{};
  std::array<double, 3> H{};
};

inline ResolventBounds resolvent_bounds(double v, std::size_t N) {
  if (v == 0.0) throw std::domain_error("resolvent_bounds: Im z must be nonzero");
  const double av = std::abs(v);
  const double dn = static_cast<double>(N);
  ResolventBounds b;
  // |Tr(E G^2)| <= 2 N^{-1/2} max|(G^2)_ij| <= 2 |v|^{-2} N^{-1/2}.
  b.T[0] = 2.0 * std::pow(av, -2.0) * std::pow(dn, -0.5);
  // |Tr(E G E G^2)| <= ||E G|| ||E G^2|| <= ||E||^2 |v|^{-3}, ||E||^2 <= 2/N.
  b.T[1] = 2.0 * std::pow(av, -3.0) / dn;
  b.T[2] = std::pow(2.0, 1.5) * std::pow(av, -4.0) * std::pow(dn, -1.5);
  b.H = {b.T[0] / dn, 2.0 * b.T[1] / dn, 6.0 * b.T[2] / dn};
  return b;
}

/// Largest measured |Tr(...)| / T_r over random index tuples, order r at index r-1.
struct TraceBoundRatios {
  std::array<double, 3> trace{};
  std::array<double, 3> partial{};  // |d^r h| / H_r
  bool ok() const {
    for (int r = 0; r < 3; ++r) {
      if (trace[r] > 1.0 || partial[r] > 1.0) return false;
    }
    return true;
  }
};

inline TraceBoundRatios trace_bound_check(const Eigen::MatrixXd& a, cplx z, std::size_t trials, RandomSeed seed) {
  const ResolventWorkspace ws(a, z);
  const std::size_t N = ws.size();
  const auto bounds = resolvent_bounds(z.imag(), N);
  Engine rng = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, triangle_size(N) - 1);
  TraceBoundRatios out;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::array<IndexPair, 3> idx{triangle_pair(N, pick(rng)), triangle_pair(N, pick(rng)),
                                       triangle_pair(N, pick(rng))};
    for (std::size_t r = 1; r <= 3; ++r) {
      const double tr = std::abs(resolvent_trace(ws, std::span<const IndexPair>(idx.data(), r)));
      out.trace[r - 1] = std::max(out.trace[r - 1], tr / bounds.T[r - 1]);
    }
    const auto jet = resolvent_partials(ws, idx[0], idx[1], idx[2]);
    out.partial[0] = std::max(out.partial[0], std::abs(jet.d1) / bounds.H[0]);
    out.partial[1] = std::max(out.partial[1], std::abs(jet.d2) / bounds.H[1]);
    out.partial[2] = std::max(out.partial[2], std::abs(jet.d3) / bounds.H[2]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constants for f = g(Re h)
// ---------------------------------------------------------------------------

struct Lemma41Constants {
  double K1 = 0.0;
  double K2 = 0.0;
  double L2p_bound = 0.0;  // K1 N^{-2}
  double L3p_bound = 0.0;  // K2 N^{-5/2}
  double C1 = 0.0;
  double C2 = 0.0;
};

/// Chain rule for f = g(Re h) with |d h| <= H_1, |d^2 h| <= H_2, |d^3 h| <= H_3:
///   |d^2 f| <= B2 H_1^2 + B1 H_2
///          = N^{-2} (4 B2 |v|^-4 N^-1 + 4 B1 |v|^-3)
///   |d^3 f| <= B3 H_1^3 + 3 B2 H_1 H_2 + B1 H_3
///          = N^{-5/2} (8 B3 |v|^-6 N^-2 + 24 B2 |v|^-5 N^-1 + 6 2^{3/2} B1 |v|^-4)
inline Lemma41Constants lemma41_constants(double b1, double b2, double b3, double v, std::size_t N) {
  if (b1 < 0.0 || b2 < 0.0 || b3 < 0.0) throw std::invalid_argument("lemma41_constants: negative derivative bound");
  if (v == 0.0) throw std::domain_error("lemma41_constants: v must be nonzero");
  if (N == 0) throw std::invalid_argument("lemma41_constants: N must be >= 1");
  const double av = std::abs(v);
  const double dn = static_cast<double>(N);
  Lemma41Constants k;
  k.K1 = 4.0 * b2 * std::pow(av, -4.0) / dn + 4.0 * b1 * std::pow(av, -3.0);
  k.K2 = 8.0 * b3 * std::pow(av, -6.0) / (dn * dn) + 24.0 * b2 * std::pow(av, -5.0) / dn +
         6.0 * std::pow(2.0, 1.5) * b1 * std::pow(av, -4.0);
  k.L2p_bound = k.K1 * std::pow(dn, -2.0);
  k.L3p_bound = k.K2 * std::pow(dn, -2.5);
  k.C1 = 9.5 * k.K1 * std::sqrt((dn + 1.0) / (2.0 * dn));
  k.C2 = 6.5 * k.K2 * (dn + 1.0) / dn;
  return k;
}

inline Lemma41Constants lemma41_constants(const ScalarProfile& g, double v, std::size_t N) {
  return lemma41_constants(g.bound(1), g.bound(2), g.bound(3), v, N);
}

/// The summarization bound with n = N(N+1)/2 coordinates, which equals
/// C1 N^-1 m4^{1/2} + C2 N^-1/2 m3.
inline BoundReport lemma41_bound(const Lemma41Constants& k, double m3, double m4, std::size_t N) {
  if (m3 < 0.0 || m4 < 0.0) throw std::invalid_argument("lemma41_bound: negative moment");
  const double n = static_cast<double>(triangle_size(N));
  BoundReport r;
  const double second = k.L2p_bound == 0.0 ? 0.0 : 9.5 * std::sqrt(m4) * k.L2p_bound * std::sqrt(n);
  const double third = k.L3p_bound == 0.0 ? 0.0 : 13.0 * m3 * k.L3p_bound * n;
  r.components = {{"second_order_term", second}, {"third_order_term", third}};
  r.bound = r.component_sum();
  return r;
}

/// f(x) = g(Re h(x)) or g(Im h(x)) on R^{N(N+1)/2}, with analytic partials.
class StieltjesComposition final : public SmoothFunction {
public:
  enum class Part { real, imag };

  StieltjesComposition(std::size_t N, cplx z, ScalarProfile g, Part part = Part::real)
      : N_(N), z_(z), g_(g), part_(part) {
    require_nonreal(z);
    const auto k = lemma41_constants(g, z.imag(), N);
    const auto hb = resolvent_bounds(z.imag(), N);
    bounds_.mixed = {g.bound(1) * hb.H[0], k.L2p_bound, k.L3p_bound};
    bounds_.unmixed = bounds_.mixed;
  }

  std::size_t arity() const override { return triangle_size(N_); }
  std::size_t order() const noexcept { return N_; }
  cplx z() const noexcept { return z_; }
  const ScalarProfile& profile() const noexcept { return g_; }
  double pick(cplx w) const { return part_ == Part::real ? w.real() : w.imag(); }

  double value(std::span<const double> x) const override { return g_(pick(resolvent_h(N_, x, z_))); }

  double partial(std::span<const double> x, std::size_t i, int order) const override {
    const auto a = triangle_pair(N_, i);
    return mixed(ResolventWorkspace(wigner_from_entries(N_, x), z_), a, a, a, order);
  }

  Eigen::MatrixXd hessian(std::span<const double> x) const override {
    const ResolventWorkspace ws(wigner_from_entries(N_, x), z_);
    const auto n = static_cast<Eigen::Index>(arity());
    Eigen::MatrixXd hs(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = 0; q <= p; ++q) {
        hs(p, q) = hs(q, p) = mixed(ws, triangle_pair(N_, p), triangle_pair(N_, q), IndexPair{}, 2);
      }
    }
    return hs;
  }

  /// d_a f, d_a d_b f, or d_a d_b d_c f at the workspace's matrix.
  double mixed(const ResolventWorkspace& ws, IndexPair a, IndexPair b, IndexPair c, int order) const {
    const double t = pick(ws.h());
    if (order == 0) return g_(t);
    auto d1 = [&](IndexPair p) { return pick(h_d1(ws, p)); };
    auto d2 = [&](IndexPair p, IndexPair q) { return pick(h_d2(ws, p, q)); };
    if (order == 1) return g_(t, 1) * d1(a);
    if (order == 2) return g_(t, 2) * d1(a) * d1(b) + g_(t, 1) * d2(a, b);
    if (order != 3) throw std::invalid_argument("StieltjesComposition: order must be 0..3");
    return compose3(t, d1(a), d1(b), d1(c), d2(a, b), d2(a, c), d2(b, c), pick(h_d3(ws, a, b, c)));
  }

  /// Faa di Bruno at order 3 from the partials of the inner function.
  double compose3(double t, double da, double db, double dc, double dab, double dac, double dbc,
                  double dabc) const {
    return g_(t, 3) * da * db * dc + g_(t, 2) * (dab * dc + dac * db + dbc * da) + g_(t, 1) * dabc;
  }

private:

  std::size_t N_;
  cplx z_;
  ScalarProfile g_;
  Part part_;
};

/// max over all coordinate pairs and triples of |d^2 f| and |d^3 f| (and
/// over coordinates of |d f|) at the matrix A(x). Index r-1 holds order r.
inline std::array<double, 3> measured_lipschitz(const StieltjesComposition& f, std::span<const double> x) {
  const std::size_t N = f.order();
  const std::size_t n = triangle_size(N);
  const ResolventWorkspace ws(wigner_from_entries(N, x), f.z());
  const auto& g = f.profile();
  const double t = f.pick(ws.h());
  std::vector<IndexPair> idx(n);
  std::vector<double> d1(n);
  for (std::size_t p = 0; p < n; ++p) {
    idx[p] = triangle_pair(N, p);
    d1[p] = f.pick(h_d1(ws, idx[p]));
  }
  Eigen::MatrixXd d2(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < n; ++p) {
    worst[0] = std::max(worst[0], std::abs(g(t, 1) * d1[p]));
    for (std::size_t q = 0; q <= p; ++q) {
      d2(p, q) = d2(q, p) = f.pick(h_d2(ws, idx[p], idx[q]));
      worst[1] = std::max(worst[1], std::abs(g(t, 2) * d1[p] * d1[q] + g(t, 1) * d2(p, q)));
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q <= p; ++q) {
      for (std::size_t r = 0; r <= q; ++r) {
        const double d3 = f.pick(h_d3(ws, idx[p], idx[q], idx[r]));
        const double v = f.compose3(t, d1[p], d1[q], d1[r], d2(p, q), d2(p, r), d2(q, r), d3);
        worst[2] = std::max(worst[2], std::abs(v));
      }
    }
  }
  return worst;
}

} // namespace lindeberg
