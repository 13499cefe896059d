#pragma once

// Spectra of real symmetric matrices: empirical spectral distributions,
// Stieltjes transforms, the semicircle law, KS distances, the rank
// inequality, and the exchangeable-Wigner experiment.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lindeberg/core/io.hpp"
#include "lindeberg/core/seed.hpp"
#include "lindeberg/sampling.hpp"

namespace lindeberg {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Wigner construction
// ---------------------------------------------------------------------------

/// Number of upper-triangle entries (diagonal included) of an N x N matrix.
inline std::size_t triangle_size(std::size_t N) { return N * (N + 1) / 2; }

/// Row-major position of (i, j), i <= j, in the upper-triangle vector.
inline std::size_t upper_index(std::size_t N, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  if (j >= N) throw std::out_of_range("upper_index: index outside the matrix");
  return i * N - i * (i - 1) / 2 + (j - i);
}

/// A(x)_ij = N^{-1/2} x_ij for i <= j, mirrored below the diagonal.
inline Eigen::MatrixXd wigner_from_entries(std::size_t N, std::span<const double> x) {
  if (N == 0) throw std::invalid_argument("wigner_from_entries: N must be >= 1");
  if (x.size() != triangle_size(N)) throw std::invalid_argument("wigner_from_entries: need N(N+1)/2 entries");
  const double s = 1.0 / std::sqrt(static_cast<double>(N));
  const auto m = static_cast<Eigen::Index>(N);
  Eigen::MatrixXd a(m, m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j, ++k) a(i, j) = a(j, i) = s * x[k];
  }
  return a;
}

struct WignerEnsembleSpec {
  std::size_t N = 0;
  std::string name = "custom";
  /// Entry law over the n = N(N+1)/2 upper-triangle values. Empty means the
  /// i.i.d. standard Gaussian baseline.
  std::optional<ExchangeableSpec> entries;

  static inline const std::vector<std::string> kNamed{"rademacher-perm", "student-t-perm", "contaminated",
                                                       "gaussian"};

  /// Canonical ensembles:
  ///   rademacher-perm  permutation of ceil(n/2) ones and floor(n/2) minus ones
  ///   student-t-perm   permutation of n standardized t(5) draws, frozen per N
  ///   contaminated     rademacher-perm with floor(n^0.4) entries set to +-n^{1/4}
  ///   gaussian         i.i.d. N(0, 1)
  static WignerEnsembleSpec named(const std::string& name, std::size_t N) {
    if (N == 0) throw std::invalid_argument("WignerEnsembleSpec: N must be >= 1");
    const std::size_t n = triangle_size(N);
    WignerEnsembleSpec spec{N, name, std::nullopt};
    if (name == "gaussian") return spec;
    std::vector<double> v(n);
    if (name == "rademacher-perm" || name == "contaminated") {
      for (std::size_t k = 0; k < n; ++k) v[k] = k < (n + 1) / 2 ? 1.0 : -1.0;
      if (name == "contaminated") {
        const auto outliers = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 0.4)));
        const double mag = std::pow(static_cast<double>(n), 0.25);
        for (std::size_t k = 0; k < outliers && k < n; ++k) v[k] = k % 2 == 0 ? mag : -mag;
      }
    } else if (name == "student-t-perm") {
      Engine rng = make_engine(derive_seed(RandomSeed{0x5eed75df}, N));
      std::student_t_distribution<double> t(5.0);
      for (auto& x : v) x = t(rng);
    } else {
      throw std::invalid_argument("WignerEnsembleSpec: unknown ensemble '" + name + "'");
    }
    spec.entries = standardized(MultisetPermutation{std::move(v)});
    return spec;
  }
};

struct WignerSample {
  Eigen::MatrixXd matrix;  // A_N
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  std::vector<double> entries;

  /// sigma_hat^{-1} A_N.
  Eigen::MatrixXd normalized() const {
    if (!(sigma_hat > 0.0)) throw std::domain_error("WignerSample: sigma_hat is zero, cannot normalize");
    return matrix / sigma_hat;
  }
};

inline WignerSample build_wigner(const WignerEnsembleSpec& spec, RandomSeed seed) {
  const std::size_t n = triangle_size(spec.N);
  if (spec.N == 0) throw std::invalid_argument("build_wigner: N must be >= 1");
  WignerSample out;
  out.entries.resize(n);
  Engine rng = make_engine(seed);
  if (spec.entries) {
    if (dimension(*spec.entries) != n) throw std::invalid_argument("build_wigner: entry spec has wrong dimension");
    sample_into(*spec.entries, rng, out.entries);
  } else {
    std::normal_distribution<double> gauss;
    for (auto& x : out.entries) x = gauss(rng);
  }
  const auto s = center_and_scale(out.entries);
  out.mu_hat = s.mu_hat;
  out.sigma_hat = s.sigma_hat;
  out.matrix = wigner_from_entries(spec.N, out.entries);
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalues and the ESD
// ---------------------------------------------------------------------------

inline void require_symmetric(const Eigen::MatrixXd& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix is not square");
  if (a.size() == 0) throw std::invalid_argument("matrix is empty");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw std::invalid_argument("matrix is not symmetric");
  }
}

struct SpectralSummary {
  std::vector<double> eigenvalues;  // ascending
  double trace = 0.0;
  double eigen_sum = 0.0;
  double frobenius_sq = 0.0;
  double eigen_sq_sum = 0.0;
  double max_abs_entry = 0.0;

  double trace_tolerance() const {
    const double N = static_cast<double>(eigenvalues.size());
    return 1e-8 * N * std::max(max_abs_entry, 1e-300) * std::sqrt(N);
  }
  bool trace_ok() const { return std::abs(eigen_sum - trace) <= trace_tolerance(); }
  bool second_moment_ok() const {
    return std::abs(eigen_sq_sum - frobenius_sq) <= trace_tolerance() * std::max(max_abs_entry, 1.0);
  }
};

/// Dense symmetric eigensolve (Householder tridiagonalization followed by
/// implicit symmetric QR).
inline SpectralSummary eigenvalues(const Eigen::MatrixXd& a) {
  require_symmetric(a);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigenvalues: solver did not converge");
  SpectralSummary out;
  out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  out.trace = a.trace();
  out.frobenius_sq = a.squaredNorm();
  out.max_abs_entry = a.cwiseAbs().maxCoeff();
  for (double l : out.eigenvalues) {
    out.eigen_sum += l;
    out.eigen_sq_sum += l * l;
  }
  return out;
}

/// x -> (1/N) #{i : lambda_i <= x}.
class EsdFunction {
public:
  explicit EsdFunction(std::vector<double> eigs) : eigs_(std::move(eigs)) {
    if (eigs_.empty()) throw std::invalid_argument("EsdFunction: no eigenvalues");
    std::sort(eigs_.begin(), eigs_.end());
  }

  double operator()(double x) const {
    return static_cast<double>(std::upper_bound(eigs_.begin(), eigs_.end(), x) - eigs_.begin()) / size();
  }
  /// F(x-).
  double left_limit(double x) const {
    return static_cast<double>(std::lower_bound(eigs_.begin(), eigs_.end(), x) - eigs_.begin()) / size();
  }

  const std::vector<double>& eigenvalues() const noexcept { return eigs_; }
  double size() const noexcept { return static_cast<double>(eigs_.size()); }

private:
  std::vector<double> eigs_;
};

inline void require_nonreal(cplx z) {
  if (z.imag() == 0.0) throw std::domain_error("Stieltjes transform needs Im z != 0");
}

/// (1/N) sum_i 1/(lambda_i - z).
inline cplx stieltjes_esd(std::span<const double> eigs, cplx z) {
  require_nonreal(z);
  if (eigs.empty()) throw std::invalid_argument("stieltjes_esd: no eigenvalues");
  cplx acc = 0.0;
  for (double l : eigs) acc += 1.0 / (l - z);
  return acc / static_cast<double>(eigs.size());
}

// ---------------------------------------------------------------------------
// Semicircle law on [-2, 2]
// ---------------------------------------------------------------------------

namespace semicircle {

inline double density(double x) {
  if (x <= -2.0 || x >= 2.0) return 0.0;
  return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

inline double cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + (x * std::sqrt(4.0 - x * x) + 4.0 * std::asin(x / 2.0)) / (4.0 * std::numbers::pi);
}

/// Root of m^2 + z m + 1 = 0 with Im m of the same sign as Im z; this is the
/// root with |m| < 1, so |m| <= 1/|Im z| as well.
inline cplx stieltjes(cplx z) {
  require_nonreal(z);
  const cplx s = std::sqrt(z * z - 4.0);
  const cplx m1 = 0.5 * (-z + s);
  const cplx m2 = 0.5 * (-z - s);
  return (m1.imag() > 0.0) == (z.imag() > 0.0) ? m1 : m2;
}

} // namespace semicircle

// ---------------------------------------------------------------------------
// KS distance and the rank inequality
// ---------------------------------------------------------------------------

/// sup |F - G| for two step functions: both are constant between the union
/// of jump points, so checking each jump and its left limit is exact.
inline double ks_distance(const EsdFunction& f, const EsdFunction& g) {
  double worst = 0.0;
  for (const auto* e : {&f.eigenvalues(), &g.eigenvalues()}) {
    for (double x : *e) {
      worst = std::max({worst, std::abs(f(x) - g(x)), std::abs(f.left_limit(x) - g.left_limit(x))});
    }
  }
  return worst;
}

/// sup |F - G| for a step function F and a continuous cdf G. Between jumps
/// F is constant and G monotone, so the sup sits at a jump, approached from
/// one side or the other.
inline double ks_distance(const EsdFunction& f, const std::function<double(double)>& cdf) {
  double worst = 0.0;
  for (double x : f.eigenvalues()) {
    const double c = cdf(x);
    worst = std::max({worst, std::abs(f(x) - c), std::abs(f.left_limit(x) - c)});
  }
  return worst;
}

inline double ks_to_semicircle(const EsdFunction& f) {
  return ks_distance(f, std::function<double(double)>(semicircle::cdf));
}

/// Count of singular values above 1e-10 times the largest one.
inline std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-10) {
  if (m.size() == 0) return 0;
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double top = s.size() ? s(0) : 0.0;
  if (top == 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > rel_tol * top) ++r;
  }
  return r;
}

struct RankCheck {
  double ks = 0.0;
  std::size_t rank = 0;
  double bound = 0.0;
  bool ok = false;
};

inline RankCheck rank_inequality_check(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("rank_inequality_check: size mismatch");
  const EsdFunction fa(eigenvalues(a).eigenvalues);
  const EsdFunction fb(eigenvalues(b).eigenvalues);
  RankCheck out;
  out.ks = ks_distance(fa, fb);
  out.rank = numerical_rank(a - b);
  out.bound = static_cast<double>(out.rank) / static_cast<double>(a.rows());
  out.ok = out.ks <= out.bound + 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// The exchangeable-Wigner experiment
// ---------------------------------------------------------------------------

inline const std::vector<cplx>& default_z_grid() {
  static const std::vector<cplx> grid{{0.0, 1.0}, {0.0, 2.0}, {1.0, 1.0}};
  return grid;
}

struct Thm13Row {
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::string ensemble;
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double m4_tilde = 0.0;  // mean of x~^4 over the upper-triangle entries
  double ks = 0.0;        // KS(F of sigma_hat^{-1} A_N, semicircle)
  std::vector<cplx> z;
  std::vector<cplx> m_esd;
  std::vector<cplx> m_sc;

  double stieltjes_gap(std::size_t k) const { return std::abs(m_esd.at(k) - m_sc.at(k)); }
};

inline Thm13Row thm13_experiment(const WignerEnsembleSpec& spec, RandomSeed seed,
                                 const std::vector<cplx>& z_grid = default_z_grid()) {
  const auto sample = build_wigner(spec, seed);
  if (!(sample.sigma_hat > 0.0)) throw std::domain_error("thm13_experiment: degenerate entries (sigma_hat = 0)");
  Thm13Row row;
  row.N = spec.N;
  row.seed = seed.value;
  row.ensemble = spec.name;
  row.mu_hat = sample.mu_hat;
  row.sigma_hat = sample.sigma_hat;
  double m4 = 0.0;
  for (double x : sample.entries) m4 += std::pow((x - sample.mu_hat) / sample.sigma_hat, 4);
  row.m4_tilde = m4 / static_cast<double>(sample.entries.size());
  const auto summary = eigenvalues(sample.normalized());
  const EsdFunction esd(summary.eigenvalues);
  row.ks = ks_to_semicircle(esd);
  row.z = z_grid;
  for (const cplx z : z_grid) {
    row.m_esd.push_back(stieltjes_esd(summary.eigenvalues, z));
    row.m_sc.push_back(semicircle::stieltjes(z));
  }
  return row;
}

inline std::vector<std::string> thm13_csv_header(const std::vector<cplx>& z_grid) {
  std::vector<std::string> h{"N", "seed", "ensemble", "mu_hat", "sigma_hat", "m4_tilde", "ks"};
  for (const cplx z : z_grid) {
    h.push_back("re_gap[" + format_complex(z) + "]");
    h.push_back("im_gap[" + format_complex(z) + "]");
  }
  return h;
}

inline std::vector<std::string> thm13_csv_fields(const Thm13Row& r) {
  std::vector<std::string> f{std::to_string(r.N), std::to_string(r.seed), r.ensemble, format_double(r.mu_hat),
                             format_double(r.sigma_hat), format_double(r.m4_tilde), format_double(r.ks)};
  for (std::size_t k = 0; k < r.z.size(); ++k) {
    const cplx gap = r.m_esd[k] - r.m_sc[k];
    f.push_back(format_double(gap.real()));
    f.push_back(format_double(gap.imag()));
  }
  return f;
}

} // namespace lindeberg
