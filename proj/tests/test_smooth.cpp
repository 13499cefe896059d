#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "lindeberg/lindeberg.hpp"

using namespace lindeberg;

namespace {

std::vector<ScalarProfile> bounded_profiles() {
  return {ScalarProfile::cosine(), ScalarProfile::rational_decay(), ScalarProfile::logistic_step(0.3, 0.7),
          ScalarProfile::tanh_clamp(1.5), ScalarProfile::identity()};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::vector<double> random_point(Engine& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g;
  std::vector<double> x(n);
  for (auto& v : x) v = scale * g(rng);
  return x;
}

} // namespace

TEST(ScalarProfile, DerivativesMatchFiniteDifferences) {
  for (const auto& g : bounded_profiles()) {
    for (double t = -4.0; t <= 4.0; t += 0.37) {
      for (int r = 1; r <= 3; ++r) {
        auto prev = [&](double s) { return g(s, r - 1); };
        EXPECT_LE(rel_err(g(t, r), fd::derivative(prev, t, 1)), 1e-6) << g.name() << " r=" << r << " t=" << t;
      }
    }
  }
}

TEST(ScalarProfile, BoundsAreSupremaOnAGrid) {
  for (const auto& g : bounded_profiles()) {
    for (int r = 1; r <= 3; ++r) {
      double sup = 0.0;
      for (double t = -30.0; t <= 30.0; t += 1e-4) sup = std::max(sup, std::abs(g(t, r)));
      EXPECT_LE(sup, g.bound(r) * (1 + 1e-12)) << g.name() << " r=" << r;
      // Tight to grid resolution.
      if (g.bound(r) > 0.0) {
        EXPECT_GE(sup, g.bound(r) * (1 - 1e-6)) << g.name() << " r=" << r;
      }
    }
  }
}

TEST(ScalarProfile, TanhClampClosedBounds) {
  const double s = 2.0;
  const auto g = ScalarProfile::tanh_clamp(s);
  EXPECT_DOUBLE_EQ(g.bound(1), 1.0);
  EXPECT_NEAR(g.bound(2), 4.0 / (3.0 * std::sqrt(3.0) * s), 1e-15);
  EXPECT_LE(g.bound(2), 0.77 / s);
  EXPECT_DOUBLE_EQ(g.bound(3), 2.0 / (s * s));
}

TEST(ScalarProfile, PowerBounds) {
  const auto cube = ScalarProfile::power(3);
  EXPECT_EQ(cube.bound(3), 6.0);
  EXPECT_TRUE(std::isinf(cube.bound(2)));
  EXPECT_EQ(ScalarProfile::power(1).bound(2), 0.0);
  EXPECT_THROW(ScalarProfile::power(-1), std::invalid_argument);
}

TEST(SmoothFunction, RidgePartialsAgainstFiniteDifferences) {
  Engine rng = make_engine(RandomSeed{3});
  const RidgeFunction f(ScalarProfile::rational_decay(), {0.3, -0.8, 0.5, 1.1}, 0.2, 1.7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_point(rng, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (int r = 1; r <= 3; ++r) {
        auto prev = [&](double t) {
          auto y = x;
          y[i] += t;
          return r == 1 ? f.value(y) : f.partial(y, i, r - 1);
        };
        EXPECT_LE(rel_err(f.partial(x, i, r), fd::derivative(prev, 0.0, 1)), 1e-6);
      }
    }
  }
}

TEST(SmoothFunction, BoundsHoldAtRandomPoints) {
  Engine rng = make_engine(RandomSeed{4});
  const std::size_t n = 6;
  std::vector<std::shared_ptr<SmoothFunction>> fs{
      std::make_shared<RidgeFunction>(RidgeFunction::of_normalized_sum(ScalarProfile::cosine(), n)),
      std::make_shared<RidgeFunction>(RidgeFunction::of_normalized_sum(ScalarProfile::logistic_step(0.5, 0.4), n)),
      std::make_shared<SeparableSum>(ScalarProfile::tanh_clamp(0.8), n, 0.5)};
  for (const auto& f : fs) {
    for (int p = 0; p < 100; ++p) {
      const auto x = random_point(rng, n, 2.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (int r = 1; r <= 3; ++r) EXPECT_LE(std::abs(f->partial(x, i, r)), f->bounds().L(r) * (1 + 1e-12));
      }
    }
  }
}

TEST(SmoothFunction, HessianMatchesDefaultFiniteDifferences) {
  Engine rng = make_engine(RandomSeed{5});
  const RidgeFunction f(ScalarProfile::cosine(), {0.4, -0.2, 0.9});
  const FiniteDifferenceFunction g(3, [&](std::span<const double> x) { return f.value(x); });
  const auto x = random_point(rng, 3);
  const Eigen::MatrixXd diff = f.hessian(x) - g.hessian(x);
  EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-6);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int r = 1; r <= 3; ++r) EXPECT_LE(rel_err(g.partial(x, i, r), f.partial(x, i, r)), 2e-5);
  }
}

TEST(SmoothFunction, DirectionalMatchesHessianContraction) {
  const QuadraticFunction q((Eigen::MatrixXd(2, 2) << 2.0, -1.0, -1.0, 3.0).finished(), Eigen::Vector2d(1.0, 0.5));
  const std::vector<double> x{0.3, -0.2}, d{1.0, 2.0};
  EXPECT_NEAR(q.directional(x, d, 2), 2.0 - 4.0 + 12.0, 1e-14);
  EXPECT_EQ(q.bounds().L(3), 0.0);
  EXPECT_EQ(q.bounds().L(2), 3.0);
  EXPECT_EQ(q.bounds().L_mixed(2), 3.0);
}

TEST(SmoothFunction, PolynomialDerivatives) {
  // p = 2 x0^2 x1 - x2^3 + 4
  const Polynomial p(3, {{2.0, {2, 1, 0}}, {-1.0, {0, 0, 3}}, {4.0, {0, 0, 0}}});
  const std::vector<double> x{1.5, -0.5, 2.0};
  EXPECT_NEAR(p.value(x), 2 * 2.25 * -0.5 - 8 + 4, 1e-14);
  EXPECT_NEAR(p.partial(x, 0, 1), 4 * 1.5 * -0.5, 1e-14);
  EXPECT_NEAR(p.partial(x, 2, 3), -6.0, 1e-14);
  const auto h = p.hessian(x);
  EXPECT_NEAR(h(0, 1), 4 * 1.5, 1e-14);
  EXPECT_NEAR(h(2, 2), -12.0, 1e-14);
  EXPECT_EQ(p.degree(), 3);
  const std::vector<double> d{0.2, 1.0, -1.0};
  auto along = [&](double t) {
    std::vector<double> y{x[0] + t * d[0], x[1] + t * d[1], x[2] + t * d[2]};
    return p.value(y);
  };
  for (int r = 1; r <= 3; ++r) EXPECT_LE(rel_err(p.directional(x, d, r), fd::derivative(along, 0.0, r)), 1e-5);
}

TEST(SmoothFunction, PullbackChainRule) {
  auto inner = std::make_shared<RidgeFunction>(RidgeFunction::of_normalized_sum(ScalarProfile::cosine(), 3));
  Eigen::MatrixXd m(3, 3);
  m << 1, 0, 0, 0.5, 1, 0, 1, 1, 1;
  const LinearPullback f(inner, m);
  const std::vector<double> x{0.1, -0.4, 0.7};
  const Eigen::MatrixXd h = f.hessian(x);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(f.partial(x, j, 2), h(j, j), 1e-12);
  // column sums of |M| are 2.5, 2, 1
  EXPECT_NEAR(f.bounds().L_mixed(1), inner->bounds().L_mixed(1) * 2.5, 1e-14);
}
