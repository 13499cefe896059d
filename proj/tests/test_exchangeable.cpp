#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "lindeberg/lindeberg.hpp"

using namespace lindeberg;
using boost::multiprecision::cpp_rational;

namespace {

MultisetPermutation rademacher_like(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = k % 2 == 0 ? 1.0 : -1.0;
  return {v};
}

std::vector<MultisetPermutation> small_multisets() {
  std::vector<MultisetPermutation> out;
  for (std::size_t n = 3; n <= 7; ++n) {
    std::vector<double> skew(n);
    for (std::size_t k = 0; k < n; ++k) skew[k] = std::pow(static_cast<double>(k), 1.7) - 0.3 * static_cast<double>(k);
    out.push_back({skew});
    out.push_back(rademacher_like(n));
    std::vector<double> ties(n, 0.0);
    ties[0] = 5.0;
    ties[1] = 5.0;
    out.push_back({ties});
  }
  return out;
}

// Sigma~ = G^{-1} G^{-T} over the rationals, straight from the entries of G^{-1}.
std::vector<std::vector<cpp_rational>> sigma_tilde_rational(std::size_t n) {
  auto ginv = [&](std::size_t i, std::size_t j) -> cpp_rational {
    if (i == j) return 1;
    if (i < j) return 0;
    return cpp_rational(-1, static_cast<long>(n - j - 1));
  };
  std::vector<std::vector<cpp_rational>> s(n, std::vector<cpp_rational>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cpp_rational acc = 0;
      for (std::size_t k = 0; k <= j; ++k) acc += ginv(i, k) * ginv(j, k);
      s[i][j] = s[j][i] = acc;
    }
  }
  return s;
}

} // namespace

// ---------------------------------------------------------------------------

TEST(GTransform, SmallExamples) {
  const GTransform g(3);
  Eigen::Matrix3d expect_g, expect_inv;
  expect_g << 1, 0, 0, 0.5, 1, 0, 1, 1, 1;
  expect_inv << 1, 0, 0, -0.5, 1, 0, -0.5, -1, 1;
  EXPECT_EQ((g.matrix() - expect_g).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((g.inverse() - expect_inv).cwiseAbs().maxCoeff(), 0.0);
  const GTransform one(1);
  EXPECT_EQ(one.matrix()(0, 0), 1.0);
  EXPECT_EQ(one.inverse()(0, 0), 1.0);
  EXPECT_EQ(one.chain_rule_factor(), 1.0);
  EXPECT_THROW(GTransform(0), std::invalid_argument);
}

TEST(GTransform, InverseAndChainFactor) {
  for (std::size_t n : {1u, 2u, 3u, 10u, 100u, 1000u}) {
    const GTransform g(n);
    EXPECT_LE(g.identity_residual(), 1e-10) << n;
    if (n >= 2) {
      EXPECT_NEAR(g.chain_rule_factor(), 2.0, 1e-12) << n;
    }
  }
  // Column sums are 2 in exact arithmetic; the float sum is within an ulp or so.
  for (long n = 2; n <= 60; ++n) {
    for (long j = 0; j + 1 < n; ++j) {
      cpp_rational col = 1;
      for (long i = j + 1; i < n; ++i) col += cpp_rational(1, n - j - 1);
      EXPECT_EQ(col, 2) << n << " " << j;
    }
  }
}

TEST(GTransform, FastActionsMatchMatrices) {
  Engine rng = make_engine(RandomSeed{21});
  std::normal_distribution<double> gauss;
  for (std::size_t n : {1u, 2u, 7u, 40u}) {
    const GTransform g(n);
    std::vector<double> x(n);
    for (auto& v : x) v = gauss(rng);
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(n));
    const Eigen::VectorXd gx = g.matrix() * xv, gix = g.inverse() * xv;
    const auto a = g.apply(x), b = g.apply_inverse(x);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(a[i], gx(static_cast<Eigen::Index>(i)), 1e-12);
      EXPECT_NEAR(b[i], gix(static_cast<Eigen::Index>(i)), 1e-12);
    }
    const auto back = g.apply(b);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
  }
  EXPECT_THROW(GTransform(3).apply(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(RTransform, Examples) {
  const auto r = r_transform(std::vector<double>{-1.0, 1.0});
  EXPECT_EQ(r[0], -1.0);
  EXPECT_EQ(r[1], 0.0);
  for (double v : r_transform(std::vector<double>(4, 0.0))) EXPECT_EQ(v, 0.0);
  const double a = std::sqrt(1.5);
  const auto r3 = r_transform(std::vector<double>{-a, 0.0, a});
  EXPECT_NEAR(r3[0], -a, 1e-15);
  EXPECT_NEAR(r3[1], -a / 2, 1e-15);
  EXPECT_NEAR(r3[2], 0.0, 1e-15);
  EXPECT_THROW(r_transform(std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Enumeration, ConditionalMeanExamples) {
  const MultisetPermutation three{{-1.0, 0.0, 1.0}};
  const auto e = enumerate_conditionals(standardized(three).values, 2);
  ASSERT_EQ(e.groups.size(), 3u);
  for (const auto& g : e.groups) {
    EXPECT_NEAR(g.mean_x, -g.prefix[0] / 2.0, 1e-15);
    EXPECT_NEAR(g.probability, 1.0 / 3.0, 1e-15);
  }
  const auto first = enumerate_conditionals(standardized(three).values, 1);
  ASSERT_EQ(first.groups.size(), 1u);
  EXPECT_NEAR(first.groups[0].mean_x, 0.0, 1e-15);
  EXPECT_THROW(enumerate_conditionals(std::vector<double>(8, 1.0), 1), std::invalid_argument);
  EXPECT_THROW(enumerate_conditionals(std::vector<double>(3, 1.0), 4), std::out_of_range);
}

TEST(Enumeration, IdentitiesHoldExactly) {
  for (const auto& spec : small_multisets()) {
    const std::size_t n = spec.values.size();
    for (std::size_t i = 1; i <= n; ++i) {
      EXPECT_LE(conditional_mean_identity_check(spec, i), 1e-12) << n << " " << i;
      EXPECT_LE(martingale_check(spec, i), 1e-12) << n << " " << i;
      const auto rep = second_moment_identity_check(spec, i);
      EXPECT_TRUE(rep.exact);
      EXPECT_NEAR(rep.mean_square_lhs.value, rep.mean_square_rhs, 1e-12) << n << " " << i;
      EXPECT_NEAR(rep.mean_square_rhs, (i - 1.0) / ((n - i + 1.0) * (n - 1.0)), 1e-15);
      EXPECT_TRUE(rep.inequalities_hold()) << n << " " << i;
    }
  }
}

TEST(Enumeration, LastCoordinateIsForced) {
  const MultisetPermutation spec{{0.2, 1.0, 3.5, -2.0, 0.7}};
  const auto e = enumerate_conditionals(standardized(spec).values, 5);
  for (const auto& g : e.groups) {
    const double s = std::accumulate(g.prefix.begin(), g.prefix.end(), 0.0);
    EXPECT_NEAR(g.mean_x, -s, 1e-12);
    EXPECT_NEAR(g.mean_x2, g.mean_x * g.mean_x, 1e-12);
  }
}

TEST(Enumeration, EqFourValues) {
  const auto rep = second_moment_identity_check(MultisetPermutation{{-1.0, 0.0, 1.0}}, 2);
  EXPECT_NEAR(rep.mean_square_lhs.value, 0.25, 1e-15);
  EXPECT_EQ(second_moment_identity_check(MultisetPermutation{{-1.0, 0.0, 1.0}}, 1).mean_square_lhs.value, 0.0);
  // standardized {-1,0,1} is {-a,0,a}, a^2 = 3/2, so E X~^4 = (2/3)(9/4) = 3/2
  EXPECT_NEAR(rep.variance_rhs, 1.5 / 2.0, 1e-14);
  EXPECT_LE(rep.variance_lhs.value, rep.variance_rhs);
}

TEST(Enumeration, MonteCarloModeAgreesWithClosedForm) {
  std::vector<double> v(30);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::sin(1.3 * static_cast<double>(k)) + 0.01 * k * k;
  const MultisetPermutation spec{v};
  for (std::size_t i : {1u, 5u, 17u, 30u}) {
    const auto rep = second_moment_identity_check(spec, i, {60000, RandomSeed{i}});
    EXPECT_FALSE(rep.exact);
    EXPECT_LE(std::abs(rep.mean_square_lhs.value - rep.mean_square_rhs),
              4.0 * rep.mean_square_lhs.std_error + 1e-12)
        << i;
    EXPECT_TRUE(rep.inequalities_hold(1e-12, 3.0)) << i;
  }
}

// ---------------------------------------------------------------------------

TEST(Covariance, ExamplesAtThreeAndTwo) {
  const auto c = covariance_matrices(3);
  EXPECT_NEAR(c.sigma_tilde(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(c.sigma_tilde(1, 1), 1.25, 1e-15);
  EXPECT_NEAR(c.sigma_tilde(2, 2), 2.25, 1e-15);
  EXPECT_NEAR(c.sigma_tilde(1, 0), -0.5, 1e-15);
  EXPECT_NEAR(c.sigma_tilde(2, 0), -0.5, 1e-15);
  EXPECT_NEAR(c.sigma_tilde(2, 1), -0.75, 1e-15);
  EXPECT_NEAR(c.sigma(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.sigma(0, 1), -1.0 / 3.0, 1e-15);
  const auto two = covariance_matrices(2);
  EXPECT_NEAR(two.sigma_tilde(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(two.sigma_tilde(0, 1), -1.0, 1e-15);
  EXPECT_NEAR(two.sigma_tilde(1, 1), 2.0, 1e-15);
  EXPECT_THROW(covariance_matrices(1), std::invalid_argument);
}

TEST(Covariance, ClosedFormMatchesInverseProduct) {
  for (std::size_t n : {2u, 3u, 5u, 20u, 200u}) {
    const auto c = covariance_matrices(n);
    const GTransform g(n);
    const Eigen::MatrixXd oracle = g.inverse() * g.inverse().transpose();
    EXPECT_LE((c.sigma_tilde - oracle).cwiseAbs().maxCoeff(), 1e-12) << n;
    EXPECT_LE(c.telescoping_gap, 1e-12);
  }
}

TEST(Covariance, EmpiricalCovarianceOfU) {
  const std::size_t n = 6, reps = 200000;
  const GTransform g(n);
  const auto c = covariance_matrices(n);
  Engine rng = make_engine(RandomSeed{99});
  std::normal_distribution<double> gauss;
  std::vector<RunningStats> prod(n * n);
  std::vector<double> v(n);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& x : v) x = gauss(rng);
    const auto u = g.apply_inverse(v);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) prod[i * n + j].push(u[i] * u[j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const auto& st = prod[i * n + j];
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      EXPECT_LE(std::abs(st.mean() - c.sigma_tilde(ii, jj)), 4.0 * st.standard_error()) << i << "," << j;
    }
  }
}

TEST(Covariance, GapSumEqualsHarmonicFormExactly) {
  for (std::size_t n = 2; n <= 50; ++n) {
    const auto st = sigma_tilde_rational(n);
    cpp_rational gap = 0;
    const cpp_rational dn(static_cast<long>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const cpp_rational s = i == j ? (dn - 1) / dn : cpp_rational(-1) / dn;
        gap += boost::multiprecision::abs(s - st[i][j]);
      }
    }
    cpp_rational closed = 3;
    for (std::size_t k = 2; k < n; ++k) closed += cpp_rational(2, static_cast<long>(k));
    EXPECT_EQ(gap, closed) << n;
    const auto got = covariance_gap_sum(n);
    EXPECT_NEAR(got.elementwise, static_cast<double>(closed), 1e-10) << n;
    EXPECT_NEAR(got.closed_form, static_cast<double>(closed), 1e-12) << n;
  }
  EXPECT_NEAR(covariance_gap_sum(2).elementwise, 3.0, 1e-14);
  EXPECT_NEAR(covariance_gap_sum(3).elementwise, 4.0, 1e-14);
}

TEST(Covariance, CrudeBoundUpToTenThousand) {
  for (std::size_t n = 2; n <= 10000; n = n < 100 ? n + 1 : n + 97) {
    const auto g = covariance_gap_sum(n);
    EXPECT_LE(g.closed_form, g.crude_bound) << n;
  }
  const auto g = covariance_gap_sum(10000);
  EXPECT_LE(g.elementwise, g.crude_bound);
  EXPECT_NEAR(g.elementwise, g.closed_form, 1e-9);
}

// ---------------------------------------------------------------------------

TEST(Stein, Examples) {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  const auto cube = stein_identity_exact(Polynomial(2, {{1.0, {3, 0}}}), id);
  EXPECT_DOUBLE_EQ(cube.lhs[0], 3.0);
  EXPECT_DOUBLE_EQ(cube.rhs[0], 3.0);
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.7, 0.7, 1.0;
  const auto lin = stein_identity_exact(Polynomial(2, {{1.0, {0, 1}}}), cov);
  EXPECT_DOUBLE_EQ(lin.lhs[0], 0.7);
  EXPECT_DOUBLE_EQ(lin.rhs[0], 0.7);
  const auto mixed = stein_identity_exact(Polynomial(2, {{1.0, {1, 1}}}), id);
  EXPECT_EQ(mixed.lhs[0], 0.0);
  EXPECT_EQ(mixed.rhs[0], 0.0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(stein_identity_exact(Polynomial(2, {{1.0, {1, 0}}}), bad), std::invalid_argument);
}

TEST(Stein, IsserlisAgainstHandFormulas) {
  Eigen::MatrixXd c(3, 3);
  c << 2.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 1.5;
  EXPECT_NEAR(gaussian_moment({0, 0, 0, 0}, c), 3 * 4.0, 1e-14);
  EXPECT_NEAR(gaussian_moment({0, 0, 1, 1}, c), 2.0 * 1.0 + 2 * 0.25, 1e-14);
  EXPECT_NEAR(gaussian_moment({0, 1, 2, 2}, c), 0.5 * 1.5 + 2 * (-0.3 * 0.2), 1e-14);
  EXPECT_EQ(gaussian_moment({0, 1, 2}, c), 0.0);
  EXPECT_EQ(gaussian_moment({}, c), 1.0);
}

TEST(Stein, AllLowDegreeMonomialsUnderRandomCovariances) {
  Engine rng = make_engine(RandomSeed{5});
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd a(3, 3);
    for (auto& v : a.reshaped()) v = gauss(rng);
    if (trial == 4) a.col(2).setZero();  // singular
    const Eigen::MatrixXd cov = a * a.transpose();
    for (int e0 = 0; e0 <= 3; ++e0) {
      for (int e1 = 0; e0 + e1 <= 3; ++e1) {
        for (int e2 = 0; e0 + e1 + e2 <= 3; ++e2) {
          const auto s = stein_identity_exact(Polynomial(3, {{1.0, {e0, e1, e2}}}), cov);
          EXPECT_LE(s.max_deviation, 1e-10) << e0 << e1 << e2;
        }
      }
    }
  }
}

TEST(Stein, MonteCarloForNonPolynomial) {
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 0.4, -0.2, 0.4, 2.0, 0.3, -0.2, 0.3, 0.5;
  const RidgeFunction h(ScalarProfile::logistic_step(0.3, 0.5), {0.5, -1.0, 0.8});
  const auto s = stein_identity_mc(h, cov, 100000, RandomSeed{17});
  EXPECT_LE(s.max_z, 4.0);
  EXPECT_GT(std::abs(s.lhs[1]), 10.0 * s.std_error[1]);  // not trivially zero
}

// ---------------------------------------------------------------------------

TEST(Interpolation, QuadraticAtThree) {
  const QuadraticFunction f0(Eigen::MatrixXd::Identity(3, 3) * (2.0 / 3.0), Eigen::VectorXd::Zero(3));
  const auto r = interpolation_difference(f0, 200000, 32, RandomSeed{1});
  EXPECT_LE(std::abs(r.direct.value + 5.0 / 6.0), 4.0 * r.direct.std_error);
  // The integrand is constant here, so the integral form is exact.
  EXPECT_NEAR(r.integral.value, -5.0 / 6.0, 1e-12);
  EXPECT_TRUE(r.consistent());
  EXPECT_TRUE(r.within_gap_bound());
  EXPECT_NEAR(r.gap_bound, 0.5 * (2.0 / 3.0) * 4.0, 1e-14);
}

TEST(Interpolation, LinearAndConstant) {
  const auto lin = QuadraticFunction::linear({1.0, -2.0, 0.5, 3.0});
  const auto r = interpolation_difference(lin, 50000, 32, RandomSeed{2});
  EXPECT_LE(std::abs(r.direct.value), 4.0 * r.direct.std_error);
  EXPECT_EQ(r.integral.value, 0.0);
  const auto c = interpolation_difference(QuadraticFunction::constant(4, 2.5), 1000, 10, RandomSeed{3});
  EXPECT_EQ(c.direct.value, 0.0);
  EXPECT_EQ(c.integral.value, 0.0);
}

TEST(Interpolation, SmoothRidgeConsistencyAndRefinement) {
  const RidgeFunction f0(ScalarProfile::cosine(), {0.9, -0.1, 0.4, 0.2, -0.6, 0.3, 0.5, -0.2});
  const auto r32 = interpolation_difference(f0, 128000, 32, RandomSeed{4});
  const auto r64 = interpolation_difference(f0, 128000, 64, RandomSeed{4});
  EXPECT_TRUE(r32.consistent());
  EXPECT_TRUE(r32.within_gap_bound());
  EXPECT_LE(std::abs(r32.integral.value - r64.integral.value),
            std::hypot(r32.integral.std_error, r64.integral.std_error));
  EXPECT_EQ(r32.grid, 32u);
}

// ---------------------------------------------------------------------------

TEST(GaussianBound, BoundExamples) {
  EXPECT_DOUBLE_EQ(thm12_bound(1.0, 1.0, 1.0, 1.0, 4), 71.0);
  EXPECT_EQ(thm12_bound(1.0, 1.0, 0.0, 0.0, 10), 0.0);
  const auto rep = thm12_bound_terms(2.0, 4.0, 0.5, 0.25, 9);
  EXPECT_NEAR(rep.bound, rep.component_sum(), 1e-12);
  EXPECT_THROW(thm12_bound(-1.0, 1.0, 1.0, 1.0, 4), std::invalid_argument);
}

TEST(GaussianBound, LinearAndDegenerateGiveZeroGap) {
  const MultisetPermutation spec{{1.0, 2.0, 4.0, 8.0, 16.0}};
  const auto lin = QuadraticFunction::linear(std::vector<double>(5, 1.0));
  const auto rep = end_to_end_check(spec, lin, 5000, RandomSeed{8});
  EXPECT_EQ(rep.bound, 0.0);
  EXPECT_NEAR(rep.mc_estimate, 0.0, 1e-12);
  const MultisetPermutation flat{{3.0, 3.0, 3.0, 3.0}};
  const auto f = RidgeFunction::of_normalized_sum(ScalarProfile::cosine(), 4);
  const auto r2 = end_to_end_check(flat, f, 2000, RandomSeed{9});
  EXPECT_EQ(r2.mc_estimate, 0.0);
  EXPECT_LE(std::abs(r2.mc_estimate), r2.bound);
}

TEST(GaussianBound, EndToEndDomination) {
  for (std::size_t n : {10u, 50u}) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = k % 3 == 0 ? 2.0 : -1.0;
    const MultisetPermutation spec{v};
    // Unequal weights: a ridge of the plain sum is permutation invariant.
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) w[k] = std::sqrt(2.0 / static_cast<double>(n)) * std::sin(k + 1.0);
    const RidgeFunction f(ScalarProfile::cosine(), w);
    const auto rep = end_to_end_check(spec, f, 20000, RandomSeed{n}, 2);
    EXPECT_TRUE(rep.dominated(3.0)) << n;
    if (n == 10) {
      EXPECT_GT(std::abs(rep.mc_estimate), 3.0 * rep.mc_stderr) << "gap should be visible at n = 10";
    }
    EXPECT_EQ(rep.replicates, 20000u);
  }
}

TEST(GaussianBound, EndToEndThreadInvariance) {
  const MultisetPermutation spec{{-1.0, 0.5, 0.5, 2.0, -2.0, 0.0}};
  const RidgeFunction f(ScalarProfile::rational_decay(), {0.6, -0.2, 0.3, 0.1, -0.5, 0.4});
  const auto a = end_to_end_check(spec, f, 5000, RandomSeed{3}, 1);
  const auto b = end_to_end_check(spec, f, 5000, RandomSeed{3}, 4);
  EXPECT_GT(a.mc_stderr, 0.0);
  EXPECT_EQ(a.mc_estimate, b.mc_estimate);
  EXPECT_EQ(a.mc_stderr, b.mc_stderr);
}

TEST(GaussianBound, CenteredMomentsOfMultiset) {
  const MultisetPermutation spec{{-1.0, 0.0, 1.0}};
  EXPECT_NEAR(centered_abs_moment(spec, 3.0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(centered_abs_moment(spec, 4.0), 2.0 / 3.0, 1e-15);
}

// ---------------------------------------------------------------------------

TEST(SideFacts, ChainRuleRatiosAtMostOne) {
  for (std::size_t n : {2u, 5u, 12u}) {
    auto f0 = std::make_shared<RidgeFunction>(RidgeFunction::of_normalized_sum(ScalarProfile::cosine(), n));
    const auto w = chain_rule_check(f0, 50, RandomSeed{n});
    for (double r : w) EXPECT_LE(r, 1.0 + 1e-12) << n;
  }
  auto sep = std::make_shared<SeparableSum>(ScalarProfile::tanh_clamp(0.7), 6, 1.0);
  for (double r : chain_rule_check(sep, 50, RandomSeed{2})) EXPECT_LE(r, 1.0 + 1e-12);
}

TEST(SideFacts, Jensen) {
  const ExchangeableSpec spec = IidFromDistribution{Distribution::exponential(1.0), 8};
  for (double r : {2.0, 3.0}) {
    const auto j = jensen_check(spec, r, 50000, RandomSeed{static_cast<std::uint64_t>(r)});
    EXPECT_LE(j.sigma_power.value, j.centered_power.value + 3.0 * j.centered_power.std_error) << r;
  }
}

TEST(SideFacts, ConstantsAndSums) {
  EXPECT_NEAR(gaussian_abs_third_moment(), 1.5957691216057308, 1e-15);
  EXPECT_LE(gaussian_abs_third_moment(), 1.7);
  for (std::size_t n = 1; n <= 10000; ++n) {
    ASSERT_LE(inverse_sqrt_tail_sum(n), 2.0 * std::sqrt(static_cast<double>(n))) << n;
  }
}
