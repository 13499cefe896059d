#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lindeberg {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Declared derivative bounds. `unmixed[r-1]` bounds |d_i^r f| for every
/// coordinate i; `mixed[r-1]` bounds every r-th order partial including mixed
/// ones. Infinity marks an unbounded derivative.
struct DerivativeBounds {
  std::array<double, 3> unmixed{kUnbounded, kUnbounded, kUnbounded};
  std::array<double, 3> mixed{kUnbounded, kUnbounded, kUnbounded};

  double L(int r) const { return unmixed.at(static_cast<std::size_t>(r - 1)); }
  double L_mixed(int r) const { return mixed.at(static_cast<std::size_t>(r - 1)); }
};

// ---------------------------------------------------------------------------
// Central finite differences
// ---------------------------------------------------------------------------

namespace fd {

/// Step for an order-r central difference at a point of magnitude |x|:
/// eps^(1/(r+2)) (1 + |x|). Order 1 gives the usual cube root of epsilon.
inline double step(int order, double x_magnitude) {
  const double eps = std::numeric_limits<double>::epsilon();
  return std::pow(eps, 1.0 / (order + 2)) * (1.0 + x_magnitude);
}

/// r-th derivative of a scalar function at t by central differences with step h.
template <class F>
double derivative(const F& g, double t, int order, double h) {
  switch (order) {
  case 0:
    return g(t);
  case 1:
    return (g(t + h) - g(t - h)) / (2.0 * h);
  case 2:
    return (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h);
  case 3:
    return (g(t + 2.0 * h) - 2.0 * g(t + h) + 2.0 * g(t - h) - g(t - 2.0 * h)) / (2.0 * h * h * h);
  default:
    throw std::invalid_argument("fd::derivative: order must be 0..3");
  }
}

template <class F>
double derivative(const F& g, double t, int order) {
  return derivative(g, t, order, step(order, std::abs(t)));
}

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

} // namespace fd

// ---------------------------------------------------------------------------
// SmoothFunction
// ---------------------------------------------------------------------------

/// f: R^n -> R with derivatives up to order three. Subclasses with closed-form
/// derivatives override the virtuals; the defaults fall back to central
/// differences.
class SmoothFunction {
public:
  virtual ~SmoothFunction() = default;

  virtual std::size_t arity() const = 0;
  virtual double value(std::span<const double> x) const = 0;

  /// d_i^r f(x), r in {1, 2, 3}.
  virtual double partial(std::span<const double> x, std::size_t i, int order) const {
    std::vector<double> point(x.begin(), x.end());
    const double base = point[i];
    auto along = [&](double t) {
      point[i] = base + t;
      const double v = value(point);
      point[i] = base;
      return v;
    };
    return fd::derivative(along, 0.0, order, fd::step(order, std::abs(base)));
  }

  /// r-th derivative of t -> f(x + t d) at t = 0.
  virtual double directional(std::span<const double> x, std::span<const double> d, int order) const {
    std::vector<double> point(x.size());
    auto along = [&](double t) {
      for (std::size_t k = 0; k < x.size(); ++k) point[k] = x[k] + t * d[k];
      return value(point);
    };
    const double scale = fd::max_abs(d);
    if (scale == 0.0) return order == 0 ? value(x) : 0.0;
    return fd::derivative(along, 0.0, order, fd::step(order, fd::max_abs(x)) / scale);
  }

  virtual Eigen::MatrixXd hessian(std::span<const double> x) const {
    const std::size_t n = x.size();
    Eigen::MatrixXd hess(n, n);
    std::vector<double> point(x.begin(), x.end());
    const double h = fd::step(2, fd::max_abs(x));
    for (std::size_t i = 0; i < n; ++i) {
      hess(i, i) = partial(x, i, 2);
      for (std::size_t j = 0; j < i; ++j) {
        auto eval = [&](double si, double sj) {
          point[i] = x[i] + si * h;
          point[j] = x[j] + sj * h;
          const double v = value(point);
          point[i] = x[i];
          point[j] = x[j];
          return v;
        };
        const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * h * h);
        hess(i, j) = v;
        hess(j, i) = v;
      }
    }
    return hess;
  }

  std::vector<double> gradient(std::span<const double> x) const {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = partial(x, i, 1);
    return g;
  }

  const DerivativeBounds& bounds() const noexcept { return bounds_; }

protected:
  DerivativeBounds bounds_;
};

using SmoothFunctionPtr = std::shared_ptr<const SmoothFunction>;

// ---------------------------------------------------------------------------
// Scalar profiles g: R -> R with closed-form derivatives and sup bounds
// ---------------------------------------------------------------------------

class ScalarProfile {
public:
  enum class Kind { identity, power, cosine, rational_decay, logistic_step, tanh_clamp };

  static ScalarProfile identity() { return {Kind::identity, 1.0, 0.0, 1}; }
  static ScalarProfile power(int k) {
    if (k < 0) throw std::invalid_argument("ScalarProfile::power: negative exponent");
    return {Kind::power, 1.0, 0.0, k};
  }
  static ScalarProfile cosine() { return {Kind::cosine, 1.0, 0.0, 0}; }
  /// t -> 1 / (1 + t^2)
  static ScalarProfile rational_decay() { return {Kind::rational_decay, 1.0, 0.0, 0}; }
  /// Smoothed indicator of t <= threshold: 1 / (1 + exp((t - threshold) / width)).
  static ScalarProfile logistic_step(double threshold, double width) {
    if (!(width > 0.0)) throw std::invalid_argument("ScalarProfile::logistic_step: width must be positive");
    return {Kind::logistic_step, width, threshold, 0};
  }
  /// t -> s tanh(t / s), a smooth clamp to (-s, s).
  static ScalarProfile tanh_clamp(double s) {
    if (!(s > 0.0)) throw std::invalid_argument("ScalarProfile::tanh_clamp: scale must be positive");
    return {Kind::tanh_clamp, s, 0.0, 0};
  }

  Kind kind() const noexcept { return kind_; }

  /// g^{(r)}(t), r in 0..3.
  double operator()(double t, int r = 0) const {
    switch (kind_) {
    case Kind::identity:
      return r == 0 ? t : (r == 1 ? 1.0 : 0.0);
    case Kind::power: {
      if (r > exponent_) return 0.0;
      double c = 1.0;
      for (int m = 0; m < r; ++m) c *= static_cast<double>(exponent_ - m);
      return c * std::pow(t, exponent_ - r);
    }
    case Kind::cosine:
      switch (r & 3) {
      case 0: return std::cos(t);
      case 1: return -std::sin(t);
      case 2: return -std::cos(t);
      default: return std::sin(t);
      }
    case Kind::rational_decay: {
      const double q = 1.0 + t * t;
      switch (r) {
      case 0: return 1.0 / q;
      case 1: return -2.0 * t / (q * q);
      case 2: return (6.0 * t * t - 2.0) / (q * q * q);
      default: return 24.0 * t * (1.0 - t * t) / (q * q * q * q);
      }
    }
    case Kind::logistic_step: {
      // g(t) = 1 - sigma(u), u = (t - threshold) / width.
      const double u = (t - shift_) / scale_;
      const double p = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
      const double q = p * (1.0 - p);
      switch (r) {
      case 0: return 1.0 - p;
      case 1: return -q / scale_;
      case 2: return -q * (1.0 - 2.0 * p) / (scale_ * scale_);
      default: return -q * (1.0 - 6.0 * p + 6.0 * p * p) / (scale_ * scale_ * scale_);
      }
    }
    case Kind::tanh_clamp: {
      const double th = std::tanh(t / scale_);
      const double sech2 = 1.0 - th * th;
      switch (r) {
      case 0: return scale_ * th;
      case 1: return sech2;
      case 2: return -2.0 * th * sech2 / scale_;
      default: return -2.0 * sech2 * (1.0 - 3.0 * th * th) / (scale_ * scale_);
      }
    }
    }
    return 0.0;
  }

  /// sup_t |g^{(r)}(t)|, r in 1..3.
  double bound(int r) const {
    switch (kind_) {
    case Kind::identity:
      return r == 1 ? 1.0 : 0.0;
    case Kind::power: {
      if (r > exponent_) return 0.0;
      if (r < exponent_) return kUnbounded;
      double c = 1.0;
      for (int m = 1; m <= r; ++m) c *= m;
      return c;
    }
    case Kind::cosine:
      return 1.0;
    case Kind::rational_decay:
      switch (r) {
      // |g'| peaks at t^2 = 1/3; |g''| at t = 0.
      case 1: return 3.0 * std::sqrt(3.0) / 8.0;
      case 2: return 2.0;
      default: {
        // g''' = 24 t (1 - t^2) / (1 + t^2)^4 peaks where 5t^4 - 10t^2 + 1 = 0,
        // the larger value at t^2 = 1 - 2/sqrt(5).
        const double t = std::sqrt(1.0 - 2.0 / std::sqrt(5.0));
        return std::abs((*this)(t, 3));
      }
      }
    case Kind::logistic_step:
      // With p = sigma(u): |p(1-p)| <= 1/4; |p(1-p)(1-2p)| <= 1/(6 sqrt 3);
      // |p(1-p)(1-6p+6p^2)| <= 1/8, attained at p = 1/2.
      switch (r) {
      case 1: return 0.25 / scale_;
      case 2: return 1.0 / (6.0 * std::sqrt(3.0) * scale_ * scale_);
      default: return 0.125 / (scale_ * scale_ * scale_);
      }
    case Kind::tanh_clamp:
      // With T = tanh(t/s): g' = 1 - T^2 <= 1;
      // |g''| = 2|T|(1-T^2)/s <= 4/(3 sqrt 3 s), maximised at T^2 = 1/3;
      // |g'''| = 2(1-T^2)|1-3T^2|/s^2 <= 2/s^2, maximised at T = 0.
      switch (r) {
      case 1: return 1.0;
      case 2: return 4.0 / (3.0 * std::sqrt(3.0) * scale_);
      default: return 2.0 / (scale_ * scale_);
      }
    }
    return kUnbounded;
  }

  std::string name() const {
    switch (kind_) {
    case Kind::identity: return "identity";
    case Kind::power: return "power" + std::to_string(exponent_);
    case Kind::cosine: return "cos";
    case Kind::rational_decay: return "rational_decay";
    case Kind::logistic_step: return "logistic_step";
    case Kind::tanh_clamp: return "tanh_clamp";
    }
    return "unknown";
  }

private:
  ScalarProfile(Kind kind, double scale, double shift, int exponent)
      : kind_(kind), scale_(scale), shift_(shift), exponent_(exponent) {}

  Kind kind_;
  double scale_;
  double shift_;
  int exponent_;
};

// ---------------------------------------------------------------------------
// Built-in families
// ---------------------------------------------------------------------------

/// f(x) = amplitude * g(<w, x> + offset).
class RidgeFunction final : public SmoothFunction {
public:
  RidgeFunction(ScalarProfile g, std::vector<double> weights, double offset = 0.0, double amplitude = 1.0)
      : g_(g), w_(std::move(weights)), offset_(offset), amplitude_(amplitude) {
    if (w_.empty()) throw std::invalid_argument("RidgeFunction: empty weight vector");
    const double wmax = fd::max_abs(w_);
    for (int r = 1; r <= 3; ++r) {
      const double gb = g_.bound(r);
      // Every r-th partial is amplitude * w_{i1}...w_{ir} * g^{(r)}.
      const double b = (gb == 0.0 || wmax == 0.0) ? 0.0 : std::abs(amplitude_) * std::pow(wmax, r) * gb;
      bounds_.unmixed[r - 1] = b;
      bounds_.mixed[r - 1] = b;
    }
  }

  /// g(sum(x) / sqrt(n)).
  static RidgeFunction of_normalized_sum(ScalarProfile g, std::size_t n) {
    return RidgeFunction(g, std::vector<double>(n, 1.0 / std::sqrt(static_cast<double>(n))));
  }

  std::size_t arity() const override { return w_.size(); }
  const std::vector<double>& weights() const noexcept { return w_; }

  double argument(std::span<const double> x) const {
    double s = offset_;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * x[i];
    return s;
  }

  double value(std::span<const double> x) const override { return amplitude_ * g_(argument(x)); }

  double partial(std::span<const double> x, std::size_t i, int order) const override {
    return amplitude_ * std::pow(w_[i], order) * g_(argument(x), order);
  }

  double directional(std::span<const double> x, std::span<const double> d, int order) const override {
    double wd = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) wd += w_[i] * d[i];
    return amplitude_ * std::pow(wd, order) * g_(argument(x), order);
  }

  Eigen::MatrixXd hessian(std::span<const double> x) const override {
    const Eigen::Map<const Eigen::VectorXd> w(w_.data(), static_cast<Eigen::Index>(w_.size()));
    return amplitude_ * g_(argument(x), 2) * (w * w.transpose());
  }

private:
  ScalarProfile g_;
  std::vector<double> w_;
  double offset_;
  double amplitude_;
};

/// f(x) = amplitude * sum_i g(x_i).
class SeparableSum final : public SmoothFunction {
public:
  SeparableSum(ScalarProfile g, std::size_t n, double amplitude = 1.0) : g_(g), n_(n), amplitude_(amplitude) {
    if (n == 0) throw std::invalid_argument("SeparableSum: arity must be positive");
    for (int r = 1; r <= 3; ++r) {
      const double gb = g_.bound(r);
      const double b = gb == 0.0 ? 0.0 : std::abs(amplitude_) * gb;
      bounds_.unmixed[r - 1] = b;
      bounds_.mixed[r - 1] = b;  // mixed partials vanish
    }
  }

  std::size_t arity() const override { return n_; }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += g_(x[i]);
    return amplitude_ * s;
  }

  double partial(std::span<const double> x, std::size_t i, int order) const override {
    return amplitude_ * g_(x[i], order);
  }

  double directional(std::span<const double> x, std::span<const double> d, int order) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += std::pow(d[i], order) * g_(x[i], order);
    return amplitude_ * s;
  }

  Eigen::MatrixXd hessian(std::span<const double> x) const override {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) h(i, i) = amplitude_ * g_(x[i], 2);
    return h;
  }

private:
  ScalarProfile g_;
  std::size_t n_;
  double amplitude_;
};

/// f(x) = 0.5 x'Qx + b'x + c with symmetric Q.
class QuadraticFunction final : public SmoothFunction {
public:
  QuadraticFunction(Eigen::MatrixXd q, Eigen::VectorXd b, double c = 0.0)
      : q_(std::move(q)), b_(std::move(b)), c_(c) {
    if (q_.rows() != q_.cols() || q_.rows() != b_.size()) {
      throw std::invalid_argument("QuadraticFunction: dimension mismatch");
    }
    if (!q_.isApprox(q_.transpose(), 1e-14) && q_.norm() > 0.0) {
      throw std::invalid_argument("QuadraticFunction: Q must be symmetric");
    }
    const bool flat = q_.cwiseAbs().maxCoeff() == 0.0;
    bounds_.unmixed = {flat ? b_.cwiseAbs().maxCoeff() : kUnbounded, q_.diagonal().cwiseAbs().maxCoeff(), 0.0};
    bounds_.mixed = {bounds_.unmixed[0], q_.cwiseAbs().maxCoeff(), 0.0};
  }

  static QuadraticFunction constant(std::size_t n, double c) {
    const auto m = static_cast<Eigen::Index>(n);
    return {Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m), c};
  }
  static QuadraticFunction linear(std::vector<double> b, double c = 0.0) {
    const auto m = static_cast<Eigen::Index>(b.size());
    return {Eigen::MatrixXd::Zero(m, m), Eigen::Map<Eigen::VectorXd>(b.data(), m), c};
  }

  std::size_t arity() const override { return static_cast<std::size_t>(b_.size()); }

  double value(std::span<const double> x) const override {
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), b_.size());
    return 0.5 * v.dot(q_ * v) + b_.dot(v) + c_;
  }

  double partial(std::span<const double> x, std::size_t i, int order) const override {
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), b_.size());
    const auto k = static_cast<Eigen::Index>(i);
    switch (order) {
    case 1: return q_.row(k).dot(v) + b_(k);
    case 2: return q_(k, k);
    default: return 0.0;
    }
  }

  double directional(std::span<const double> x, std::span<const double> d, int order) const override {
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), b_.size());
    const Eigen::Map<const Eigen::VectorXd> dir(d.data(), b_.size());
    switch (order) {
    case 1: return dir.dot(q_ * v + b_);
    case 2: return dir.dot(q_ * dir);
    default: return 0.0;
    }
  }

  Eigen::MatrixXd hessian(std::span<const double>) const override { return q_; }

private:
  Eigen::MatrixXd q_;
  Eigen::VectorXd b_;
  double c_;
};

/// Sum of coefficient * prod_k x_k^{e_k}. Unbounded derivatives in general.
class Polynomial final : public SmoothFunction {
public:
  struct Term {
    double coefficient = 1.0;
    std::vector<int> exponents;
  };

  Polynomial(std::size_t n, std::vector<Term> terms) : n_(n), terms_(std::move(terms)) {
    int degree = 0;
    for (const auto& t : terms_) {
      if (t.exponents.size() != n_) throw std::invalid_argument("Polynomial: exponent vector has wrong length");
      int d = 0;
      for (int e : t.exponents) {
        if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
        d += e;
      }
      degree = std::max(degree, d);
    }
    degree_ = degree;
    for (int r = 1; r <= 3; ++r) {
      const double b = r > degree ? 0.0 : kUnbounded;
      bounds_.unmixed[r - 1] = b;
      bounds_.mixed[r - 1] = b;
    }
  }

  static Polynomial monomial(std::vector<int> exponents, double coefficient = 1.0) {
    const std::size_t n = exponents.size();
    return Polynomial(n, {Term{coefficient, std::move(exponents)}});
  }

  std::size_t arity() const override { return n_; }
  int degree() const noexcept { return degree_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }

  /// d/dx_j as a polynomial.
  Polynomial derivative(std::size_t j) const {
    std::vector<Term> out;
    for (const auto& t : terms_) {
      if (t.exponents[j] == 0) continue;
      Term d = t;
      d.coefficient *= t.exponents[j];
      --d.exponents[j];
      out.push_back(std::move(d));
    }
    return Polynomial(n_, std::move(out));
  }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (const auto& t : terms_) {
      double m = t.coefficient;
      for (std::size_t k = 0; k < n_; ++k) {
        for (int e = 0; e < t.exponents[k]; ++e) m *= x[k];
      }
      s += m;
    }
    return s;
  }

  double partial(std::span<const double> x, std::size_t i, int order) const override {
    Polynomial p = *this;
    for (int r = 0; r < order; ++r) p = p.derivative(i);
    return p.value(x);
  }

  Eigen::MatrixXd hessian(std::span<const double> x) const override {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd h(n, n);
    for (std::size_t i = 0; i < n_; ++i) {
      const Polynomial di = derivative(i);
      for (std::size_t j = 0; j <= i; ++j) {
        h(i, j) = h(j, i) = di.derivative(j).value(x);
      }
    }
    return h;
  }

  double directional(std::span<const double> x, std::span<const double> d, int order) const override {
    // D^r p [d,...,d] as the r-fold derivative of the polynomial t -> p(x + t d).
    if (order == 0) return value(x);
    Polynomial cur = *this;
    for (int r = 0; r < order; ++r) {
      std::vector<Term> next;
      for (std::size_t j = 0; j < n_; ++j) {
        if (d[j] == 0.0) continue;
        const Polynomial dj = cur.derivative(j);
        for (auto t : dj.terms()) {
          t.coefficient *= d[j];
          next.push_back(std::move(t));
        }
      }
      cur = Polynomial(n_, std::move(next));
    }
    return cur.value(x);
  }

private:
  std::size_t n_;
  std::vector<Term> terms_;
  int degree_ = 0;
};

/// f1(x) = f0(M x). Derivative bounds follow from the column absolute sums of
/// M: every r-th partial of f1 is a contraction of the r-th derivative tensor
/// of f0 with r columns of M.
class LinearPullback final : public SmoothFunction {
public:
  LinearPullback(SmoothFunctionPtr inner, Eigen::MatrixXd m) : inner_(std::move(inner)), m_(std::move(m)) {
    if (static_cast<std::size_t>(m_.rows()) != inner_->arity() || m_.rows() != m_.cols()) {
      throw std::invalid_argument("LinearPullback: matrix must be square with the inner arity");
    }
    const double col = m_.cwiseAbs().colwise().sum().maxCoeff();
    for (int r = 1; r <= 3; ++r) {
      const double lp = inner_->bounds().L_mixed(r);
      const double b = lp == 0.0 ? 0.0 : lp * std::pow(col, r);
      bounds_.unmixed[r - 1] = b;
      bounds_.mixed[r - 1] = b;
    }
  }

  std::size_t arity() const override { return static_cast<std::size_t>(m_.cols()); }

  double value(std::span<const double> x) const override { return inner_->value(map(x)); }

  double partial(std::span<const double> x, std::size_t j, int order) const override {
    const Eigen::VectorXd col = m_.col(static_cast<Eigen::Index>(j));
    return inner_->directional(map(x), std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                               order);
  }

  double directional(std::span<const double> x, std::span<const double> d, int order) const override {
    const Eigen::VectorXd md = m_ * Eigen::Map<const Eigen::VectorXd>(d.data(), m_.cols());
    return inner_->directional(map(x), std::span<const double>(md.data(), static_cast<std::size_t>(md.size())),
                               order);
  }

  Eigen::MatrixXd hessian(std::span<const double> x) const override {
    return m_.transpose() * inner_->hessian(map(x)) * m_;
  }

private:
  std::vector<double> map(std::span<const double> x) const {
    const Eigen::VectorXd y = m_ * Eigen::Map<const Eigen::VectorXd>(x.data(), m_.cols());
    return {y.data(), y.data() + y.size()};
  }

  SmoothFunctionPtr inner_;
  Eigen::MatrixXd m_;
};

/// Any callable, with all derivatives by central differences. Bounds are
/// whatever the caller declares.
class FiniteDifferenceFunction final : public SmoothFunction {
public:
  FiniteDifferenceFunction(std::size_t n, std::function<double(std::span<const double>)> f,
                           DerivativeBounds declared = {})
      : n_(n), f_(std::move(f)) {
    bounds_ = declared;
  }

  std::size_t arity() const override { return n_; }
  double value(std::span<const double> x) const override { return f_(x); }

private:
  std::size_t n_;
  std::function<double(std::span<const double>)> f_;
};

} // namespace lindeberg
