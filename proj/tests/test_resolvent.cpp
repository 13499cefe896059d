#include <gtest/gtest.h>

#include <cmath>

#include "lindeberg/lindeberg.hpp"

using namespace lindeberg;

namespace {

std::vector<double> gaussian_point(Engine& rng, std::size_t n) {
  std::normal_distribution<double> gauss;
  std::vector<double> x(n);
  for (auto& v : x) v = gauss(rng);
  return x;
}

// Central difference of a complex-valued function of one coordinate.
template <class F>
cplx fd_complex(const F& f, double x0) {
  const double h = fd::step(1, std::abs(x0));
  auto re = [&](double t) { return f(t).real(); };
  auto im = [&](double t) { return f(t).imag(); };
  return {fd::derivative(re, x0, 1, h), fd::derivative(im, x0, 1, h)};
}

} // namespace

TEST(Resolvent, ScalarExamples) {
  const cplx i(0.0, 1.0);
  const auto g = resolvent(Eigen::MatrixXd::Zero(1, 1), i);
  EXPECT_NEAR(std::abs(g(0, 0) - i), 0.0, 1e-15);
  const auto gi = resolvent(Eigen::MatrixXd::Identity(4, 4), cplx(0.0, 2.0));
  const cplx d = 1.0 / cplx(1.0, -2.0);
  EXPECT_LE((gi - d * Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(resolvent(Eigen::MatrixXd::Zero(2, 2), cplx(1.0, 0.0)), std::domain_error);

  const double x = 0.7;
  const cplx z(0.2, 0.9);
  const std::vector<double> pt{x};
  const auto jet = resolvent_partials(1, pt, z, {0, 0}, {0, 0}, {0, 0});
  EXPECT_LE(std::abs(jet.h - 1.0 / (x - z)), 1e-15);
  EXPECT_LE(std::abs(jet.d1 + 1.0 / ((x - z) * (x - z))), 1e-14);
  EXPECT_LE(std::abs(jet.d2 - 2.0 / std::pow(x - z, 3)), 1e-14);
  EXPECT_LE(std::abs(jet.d3 + 6.0 / std::pow(x - z, 4)), 1e-13);
}

TEST(Resolvent, ResidualAndSpectralBound) {
  Engine rng = make_engine(RandomSeed{60});
  for (std::size_t N : {2u, 6u, 30u}) {
    const auto a = wigner_from_entries(N, gaussian_point(rng, triangle_size(N)));
    for (const cplx z : {cplx(0, 1), cplx(0.5, 0.1), cplx(-1, -2)}) {
      const ResolventWorkspace ws(a, z);
      EXPECT_LE(ws.residual(a), 1e-8 / std::abs(z.imag()));
      EXPECT_LE(ws.spectral_radius(), 1.0 / std::abs(z.imag()) + 1e-12);
      const double v2 = std::pow(std::abs(z.imag()), -2.0);
      EXPECT_LE(ws.G2().cwiseAbs().maxCoeff(), v2 + 1e-12);
    }
  }
}

TEST(Resolvent, PartialsMatchFiniteDifferences) {
  Engine rng = make_engine(RandomSeed{61});
  const cplx z(0.3, 1.0);
  int tuples = 0;
  for (std::size_t N = 2; N <= 8; ++N) {
    const std::size_t n = triangle_size(N);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const int per_n = N <= 3 ? 7 : 8;
    for (int t = 0; t < per_n; ++t, ++tuples) {
      auto x = gaussian_point(rng, n);
      const std::size_t pa = pick(rng), pb = pick(rng), pc = pick(rng);
      const auto a = triangle_pair(N, pa), b = triangle_pair(N, pb), c = triangle_pair(N, pc);
      const auto bounds = resolvent_bounds(z.imag(), N);
      const auto jet = resolvent_partials(N, x, z, a, b, c);

      auto along = [&](std::size_t coord, auto fn) {
        return [&, coord, fn](double t) {
          auto y = x;
          y[coord] = t;
          return fn(ResolventWorkspace(wigner_from_entries(N, y), z));
        };
      };
      const cplx fd1 = fd_complex(along(pa, [](const ResolventWorkspace& ws) { return ws.h(); }), x[pa]);
      const cplx fd2 = fd_complex(along(pb, [a](const ResolventWorkspace& ws) { return h_d1(ws, a); }), x[pb]);
      const cplx fd3 = fd_complex(along(pc, [a, b](const ResolventWorkspace& ws) { return h_d2(ws, a, b); }), x[pc]);

      EXPECT_LE(std::abs(jet.d1 - fd1), 1e-6 * std::max(std::abs(jet.d1), bounds.H[0])) << N;
      EXPECT_LE(std::abs(jet.d2 - fd2), 1e-6 * std::max(std::abs(jet.d2), bounds.H[1])) << N;
      EXPECT_LE(std::abs(jet.d3 - fd3), 1e-6 * std::max(std::abs(jet.d3), bounds.H[2])) << N;
    }
  }
  EXPECT_EQ(tuples, 54);
}

TEST(Resolvent, TraceMatchesDenseProduct) {
  Engine rng = make_engine(RandomSeed{62});
  const std::size_t N = 5;
  const auto a = wigner_from_entries(N, gaussian_point(rng, triangle_size(N)));
  const cplx z(-0.4, 0.8);
  const ResolventWorkspace ws(a, z);
  const auto& G = ws.G();
  for (int t = 0; t < 20; ++t) {
    std::uniform_int_distribution<std::size_t> pick(0, triangle_size(N) - 1);
    const std::array<IndexPair, 3> idx{triangle_pair(N, pick(rng)), triangle_pair(N, pick(rng)),
                                       triangle_pair(N, pick(rng))};
    Eigen::MatrixXcd prod = G;
    for (std::size_t r = 1; r <= 3; ++r) {
      prod = prod * wigner_direction(N, idx[r - 1]).cast<cplx>() * G;
      const cplx got = resolvent_trace(ws, std::span<const IndexPair>(idx.data(), r));
      EXPECT_LE(std::abs(got - prod.trace()), 1e-12);
    }
  }
}

TEST(Resolvent, TraceBoundRatios) {
  Engine rng = make_engine(RandomSeed{63});
  for (std::size_t N : {2u, 5u, 12u, 25u}) {
    const auto a = wigner_from_entries(N, gaussian_point(rng, triangle_size(N)));
    for (const cplx z : {cplx(0, 1), cplx(0.1, 0.2), cplx(1, 1)}) {
      const auto r = trace_bound_check(a, z, 200, RandomSeed{N});
      EXPECT_TRUE(r.ok()) << N << " " << z << " " << r.trace[0] << " " << r.trace[1] << " " << r.trace[2];
    }
  }
  // N = 1, A = [x], z = i: |Tr(G dA G)| = 1/(x^2 + 1) <= 2.
  const ResolventWorkspace ws(Eigen::MatrixXd::Constant(1, 1, 0.6), cplx(0, 1));
  const std::array<IndexPair, 1> d{IndexPair{0, 0}};
  EXPECT_NEAR(std::abs(resolvent_trace(ws, d)), 1.0 / 1.36, 1e-15);
  EXPECT_EQ(resolvent_bounds(1.0, 1).T[0], 2.0);
}

TEST(Resolvent, MixedPartialSymmetryAndRealCommutation) {
  Engine rng = make_engine(RandomSeed{64});
  const std::size_t N = 6;
  const auto a = wigner_from_entries(N, gaussian_point(rng, triangle_size(N)));
  const ResolventWorkspace ws(a, cplx(0.2, 0.7));
  std::uniform_int_distribution<std::size_t> pick(0, triangle_size(N) - 1);
  for (int t = 0; t < 30; ++t) {
    const auto p = triangle_pair(N, pick(rng)), q = triangle_pair(N, pick(rng)), r = triangle_pair(N, pick(rng));
    EXPECT_LE(std::abs(h_d2(ws, p, q) - h_d2(ws, q, p)), 1e-10);
    EXPECT_LE(std::abs(h_d3(ws, p, q, r) - h_d3(ws, r, p, q)), 1e-10);
  }
  // d(Re h) by differencing Re h equals Re of the complex partial.
  auto x = gaussian_point(rng, triangle_size(N));
  const cplx z(0.2, 0.7);
  const std::size_t k = 4;
  auto re_h = [&](double t) {
    auto y = x;
    y[k] = t;
    return resolvent_h(N, y, z).real();
  };
  const auto jet = resolvent_partials(N, x, z, triangle_pair(N, k), triangle_pair(N, k), triangle_pair(N, k));
  EXPECT_NEAR(fd::derivative(re_h, x[k], 1), jet.d1.real(), 1e-8);
}

TEST(HilbertSchmidt, Properties) {
  EXPECT_NEAR(hs_norm(Eigen::MatrixXd::Identity(7, 7)), std::sqrt(7.0), 1e-15);
  const std::size_t N = 9;
  EXPECT_NEAR(hs_norm(wigner_direction(N, {2, 5})), std::sqrt(2.0 / N), 1e-15);
  EXPECT_NEAR(hs_norm(wigner_direction(N, {3, 3})), std::sqrt(1.0 / N), 1e-15);
  Engine rng = make_engine(RandomSeed{65});
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXcd b = Eigen::MatrixXcd::Random(6, 6), c = Eigen::MatrixXcd::Random(6, 6);
    EXPECT_LE(std::abs((b * c).trace()), hs_norm(b) * hs_norm(c) + 1e-12);
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Eigen::MatrixXcd::Random(6, 6));
    const Eigen::MatrixXcd u = qr.householderQ();
    EXPECT_NEAR(hs_norm(u * c), hs_norm(c), 1e-10);
    EXPECT_NEAR(hs_norm(c * u), hs_norm(c), 1e-10);
    // ||G C|| <= max|eig G| ||C|| for the normal matrix G.
    const auto a = wigner_from_entries(6, gaussian_point(rng, triangle_size(6)));
    const ResolventWorkspace ws(a, cplx(0.1, 0.5));
    EXPECT_LE(hs_norm(ws.G() * c), ws.spectral_radius() * hs_norm(c) + 1e-10);
  }
}

TEST(Constants, Examples) {
  const auto k = lemma41_constants(1.0, 0.0, 0.0, 1.0, 10);
  EXPECT_DOUBLE_EQ(k.K1, 4.0);
  EXPECT_NEAR(k.K2, 6.0 * std::pow(2.0, 1.5), 1e-14);
  EXPECT_NEAR(k.K2, 16.97, 5e-3);
  EXPECT_NEAR(k.L2p_bound, 4.0 / 100.0, 1e-15);
  const auto zero = lemma41_constants(0.0, 0.0, 0.0, 0.5, 10);
  EXPECT_EQ(zero.K1, 0.0);
  EXPECT_EQ(zero.K2, 0.0);
  EXPECT_EQ(lemma41_bound(zero, 1.0, 1.0, 10).bound, 0.0);
  EXPECT_THROW(lemma41_constants(1.0, 1.0, 1.0, 0.0, 3), std::domain_error);
  EXPECT_THROW(lemma41_constants(-1.0, 1.0, 1.0, 1.0, 3), std::invalid_argument);
}

TEST(Constants, BoundEqualsCFormAndRates) {
  const auto g = ScalarProfile::tanh_clamp(1.0);
  for (std::size_t N : {10u, 100u, 1000u, 10000u}) {
    const auto k = lemma41_constants(g, 1.0, N);
    const double m3 = 1.3, m4 = 2.1;
    const auto rep = lemma41_bound(k, m3, m4, N);
    const double dn = static_cast<double>(N);
    const double c_form = k.C1 * std::sqrt(m4) / dn + k.C2 * m3 / std::sqrt(dn);
    EXPECT_NEAR(rep.bound, c_form, 1e-12 * c_form) << N;
    EXPECT_NEAR(rep.bound, rep.component_sum(), 1e-15);
  }
  // Theta(N^-1/2) overall: quadrupling N halves the bound asymptotically.
  const auto b1 = lemma41_bound(lemma41_constants(g, 1.0, 40000), 1.0, 1.0, 40000).bound;
  const auto b4 = lemma41_bound(lemma41_constants(g, 1.0, 160000), 1.0, 1.0, 160000).bound;
  EXPECT_NEAR(b1 / b4, 2.0, 0.01);
}

TEST(Composition, AnalyticMatchesFiniteDifferences) {
  Engine rng = make_engine(RandomSeed{66});
  const std::size_t N = 4;
  const StieltjesComposition f(N, cplx(0.1, 1.0), ScalarProfile::tanh_clamp(1.0));
  EXPECT_EQ(f.arity(), 10u);
  const auto x = gaussian_point(rng, f.arity());
  for (std::size_t i = 0; i < f.arity(); ++i) {
    for (int r = 1; r <= 3; ++r) {
      auto prev = [&](double t) {
        auto y = x;
        y[i] = t;
        return r == 1 ? f.value(y) : f.partial(y, i, r - 1);
      };
      const double fdv = fd::derivative(prev, x[i], 1);
      EXPECT_NEAR(f.partial(x, i, r), fdv, 1e-6 * std::max(1e-3, std::abs(fdv))) << i << " " << r;
    }
  }
  const FiniteDifferenceFunction g(f.arity(), [&](std::span<const double> y) { return f.value(y); });
  EXPECT_LE((f.hessian(x) - g.hessian(x)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Composition, MeasuredLipschitzWithinBounds) {
  Engine rng = make_engine(RandomSeed{67});
  for (std::size_t N : {4u, 8u}) {
    for (const cplx z : {cplx(0, 1), cplx(0.5, 0.5)}) {
      const StieltjesComposition f(N, z, ScalarProfile::tanh_clamp(0.5));
      for (int t = 0; t < 3; ++t) {
        const auto w = measured_lipschitz(f, gaussian_point(rng, f.arity()));
        EXPECT_LE(w[0], f.bounds().L_mixed(1)) << N;
        EXPECT_LE(w[1], f.bounds().L_mixed(2)) << N;
        EXPECT_LE(w[2], f.bounds().L_mixed(3)) << N;
      }
    }
  }
}
