#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include "lindeberg/core/seed.hpp"

namespace lindeberg {

/// Univariate law of the form loc + scale * B, where B is one of a handful of
/// base laws. Exact moments where a closed form exists, adaptive quadrature
/// otherwise.
class Distribution {
public:
  enum class Kind { point_mass, normal, rademacher, uniform, student_t, exponential };

  Distribution() = default;
  Distribution(Kind kind, double loc, double scale, double df = 0.0)
      : kind_(kind), loc_(loc), scale_(scale), df_(df) {
    if (!(scale >= 0.0) || !std::isfinite(loc) || !std::isfinite(scale)) {
      throw std::invalid_argument("Distribution: scale must be finite and nonnegative");
    }
    if (kind == Kind::student_t && !(df > 0.0)) {
      throw std::invalid_argument("Distribution: student_t needs df > 0");
    }
  }

  static Distribution point_mass(double c) { return {Kind::point_mass, c, 0.0}; }
  static Distribution normal(double mean = 0.0, double sd = 1.0) { return {Kind::normal, mean, sd}; }
  static Distribution rademacher() { return {Kind::rademacher, 0.0, 1.0}; }
  /// Uniform on [lo, hi].
  static Distribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi - lo}; }
  static Distribution student_t(double df) { return {Kind::student_t, 0.0, 1.0, df}; }
  static Distribution exponential(double rate = 1.0) { return {Kind::exponential, 0.0, 1.0 / rate}; }

  Kind kind() const noexcept { return kind_; }
  double loc() const noexcept { return loc_; }
  double scale() const noexcept { return scale_; }
  double df() const noexcept { return df_; }
  bool is_discrete() const noexcept {
    return kind_ == Kind::point_mass || kind_ == Kind::rademacher || scale_ == 0.0;
  }

  double mean() const { return loc_ + scale_ * base_mean(); }
  double variance() const { return scale_ * scale_ * base_variance(); }
  double second_moment() const {
    const double m = mean();
    return m * m + variance();
  }

  /// Same family, shifted and scaled to mean 0 and variance 1.
  Distribution standardized() const {
    const double v = base_variance();
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::domain_error("Distribution: cannot standardize a law with zero or infinite variance");
    }
    const double s = 1.0 / std::sqrt(v);
    return Distribution(kind_, -base_mean() * s, s, df_);
  }

  /// E|X|^p.
  double abs_moment(double p) const {
    switch (kind_) {
    case Kind::point_mass:
      return std::pow(std::abs(loc_), p);
    case Kind::rademacher:
      return 0.5 * (std::pow(std::abs(loc_ + scale_), p) + std::pow(std::abs(loc_ - scale_), p));
    case Kind::normal:
      if (scale_ == 0.0) return std::pow(std::abs(loc_), p);
      if (p == 3.0) return normal_abs_third(loc_, scale_);
      break;
    case Kind::student_t:
      if (p >= df_) return std::numeric_limits<double>::infinity();
      break;
    default:
      break;
    }
    if (scale_ == 0.0) return std::pow(std::abs(loc_ + 0.0), p);
    return quadrature_abs_moment(p);
  }

  /// Density of a continuous law.
  double pdf(double x) const {
    if (is_discrete()) throw std::domain_error("Distribution: discrete law has no density");
    const double u = (x - loc_) / scale_;
    return base_pdf(u) / scale_;
  }

  double sample(Engine& rng) const {
    switch (kind_) {
    case Kind::point_mass:
      return loc_;
    case Kind::normal:
      return loc_ + scale_ * std::normal_distribution<double>{}(rng);
    case Kind::rademacher:
      return loc_ + scale_ * (std::bernoulli_distribution{0.5}(rng) ? 1.0 : -1.0);
    case Kind::uniform:
      return loc_ + scale_ * std::uniform_real_distribution<double>{}(rng);
    case Kind::student_t:
      return loc_ + scale_ * std::student_t_distribution<double>{df_}(rng);
    case Kind::exponential:
      return loc_ + scale_ * std::exponential_distribution<double>{1.0}(rng);
    }
    return loc_;
  }

  void sample_into(Engine& rng, std::span<double> out) const {
    if (kind_ == Kind::normal) {
      std::normal_distribution<double> gauss;
      for (double& x : out) x = loc_ + scale_ * gauss(rng);
      return;
    }
    for (double& x : out) x = sample(rng);
  }

  static std::string kind_name(Kind k) {
    switch (k) {
    case Kind::point_mass: return "point_mass";
    case Kind::normal: return "normal";
    case Kind::rademacher: return "rademacher";
    case Kind::uniform: return "uniform";
    case Kind::student_t: return "student_t";
    case Kind::exponential: return "exponential";
    }
    return "unknown";
  }

  static Kind kind_from_name(const std::string& name) {
    for (Kind k : {Kind::point_mass, Kind::normal, Kind::rademacher, Kind::uniform,
                   Kind::student_t, Kind::exponential}) {
      if (kind_name(k) == name) return k;
    }
    throw std::invalid_argument("Distribution: unknown kind '" + name + "'");
  }

  friend void to_json(nlohmann::json& j, const Distribution& d) {
    j = nlohmann::json{{"kind", kind_name(d.kind_)}, {"loc", d.loc_}, {"scale", d.scale_}};
    if (d.kind_ == Kind::student_t) j["df"] = d.df_;
  }

  friend void from_json(const nlohmann::json& j, Distribution& d) {
    const Kind k = kind_from_name(j.at("kind").get<std::string>());
    d = Distribution(k, j.value("loc", 0.0), j.value("scale", 1.0), j.value("df", 0.0));
  }

  friend bool operator==(const Distribution&, const Distribution&) = default;

private:
  // E|m + s V|^3 for V standard normal.
  static double normal_abs_third(double m, double s) {
    const double a = m / s;
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double big_phi = 0.5 * std::erfc(a / std::numbers::sqrt2);  // P(V > a) = Phi(-a)
    return s * s * s * ((a * a * a + 3.0 * a) * (1.0 - 2.0 * big_phi) + 2.0 * (a * a + 2.0) * phi);
  }

  double base_mean() const {
    switch (kind_) {
    case Kind::uniform: return 0.5;
    case Kind::exponential: return 1.0;
    case Kind::student_t:
      return df_ > 1.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    default: return 0.0;
    }
  }

  double base_variance() const {
    switch (kind_) {
    case Kind::point_mass: return 0.0;
    case Kind::normal: return 1.0;
    case Kind::rademacher: return 1.0;
    case Kind::uniform: return 1.0 / 12.0;
    case Kind::student_t:
      return df_ > 2.0 ? df_ / (df_ - 2.0) : std::numeric_limits<double>::infinity();
    case Kind::exponential: return 1.0;
    }
    return 0.0;
  }

  double base_pdf(double u) const {
    switch (kind_) {
    case Kind::normal: return boost::math::pdf(boost::math::normal_distribution<double>{}, u);
    case Kind::uniform: return (u >= 0.0 && u <= 1.0) ? 1.0 : 0.0;
    case Kind::student_t: return boost::math::pdf(boost::math::students_t_distribution<double>{df_}, u);
    case Kind::exponential: return u >= 0.0 ? std::exp(-u) : 0.0;
    default: throw std::domain_error("Distribution: discrete law has no density");
    }
  }

  double quadrature_abs_moment(double p) const {
    using boost::math::quadrature::gauss_kronrod;
    const double inf = std::numeric_limits<double>::infinity();
    double lo = -inf, hi = inf;
    if (kind_ == Kind::uniform) { lo = 0.0; hi = 1.0; }
    if (kind_ == Kind::exponential) { lo = 0.0; }
    auto integrand = [&](double u) { return std::pow(std::abs(loc_ + scale_ * u), p) * base_pdf(u); };
    // Split at the kink of |loc + scale u| when it falls inside the support.
    const double kink = -loc_ / scale_;
    auto piece = [&](double a, double b) {
      return gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-13);
    };
    if (kink > lo && kink < hi) return piece(lo, kink) + piece(kink, hi);
    return piece(lo, hi);
  }

  Kind kind_ = Kind::normal;
  double loc_ = 0.0;
  double scale_ = 1.0;
  double df_ = 0.0;
};

} // namespace lindeberg
