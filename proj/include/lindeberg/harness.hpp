#pragma once

// Configuration-driven runner behind the command-line tool and the
// acceptance binary. Every command writes CSV tables and a JSON summary with
// one pass/fail entry per check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lindeberg/core/io.hpp"
#include "lindeberg/core/seed.hpp"
#include "lindeberg/core/stats.hpp"
#include "lindeberg/exchangeable.hpp"
#include "lindeberg/resolvent.hpp"
#include "lindeberg/sampling.hpp"
#include "lindeberg/smooth_function.hpp"
#include "lindeberg/spectral.hpp"
#include "lindeberg/swapping.hpp"

namespace lindeberg::harness {

/// Bad input: unknown command, malformed config, out-of-range parameter.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"thm11-check",     "thm12-check",    "identities",
                                          "resolvent-check", "wigner-sweep",   "semicircle-table"};
  return c;
}

/// Accepts "a", "bi", "a+bi", "a-bi"; a bare "i" is 1i.
inline cplx parse_complex(std::string s) {
  std::erase_if(s, [](char c) { return c == ' '; });
  if (s.empty()) throw ConfigError("empty complex number");
  auto number = [&](const std::string& t, double sign_only) -> double {
    if (t.empty() || t == "+") return sign_only;
    if (t == "-") return -sign_only;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ConfigError("bad complex number '" + s + "'");
    }
    if (used != t.size()) throw ConfigError("bad complex number '" + s + "'");
    return v;
  };
  if (s.back() != 'i') return {number(s, 0.0), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  std::size_t split = std::string::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string::npos) return {0.0, number(body, 1.0)};
  const std::string re = body.substr(0, split);
  if (re.empty() || re == "+" || re == "-") throw ConfigError("bad complex number '" + s + "'");
  return {number(re, 0.0), number(body.substr(split), 1.0)};
}

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out = ".";
  unsigned threads = 0;          // 0: LINDEBERG_THREADS or 1
  std::size_t replicates = 0;    // 0: command default
  std::vector<std::size_t> n;    // vector lengths
  std::vector<double> multiset;  // explicit values (identities, thm12-check)
  std::vector<std::size_t> N;    // matrix orders
  std::size_t seeds = 20;
  std::vector<std::string> ensembles;
  std::vector<cplx> z;
  std::vector<double> x;
  std::size_t tuples = 50;
  std::size_t trials = 200;
  std::size_t rank_trials = 100;
  std::vector<std::size_t> lipschitz_N;
  double k_stderr = 3.0;
  std::map<std::string, double> ks_tolerance;
  double stieltjes_tolerance = 0.05;

  unsigned thread_count() const { return threads ? threads : default_thread_count(); }
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  std::vector<std::string> zs;
  for (const cplx z : c.z) zs.push_back(format_complex(z));
  j = nlohmann::json{{"command", c.command},
                     {"seed", c.seed},
                     {"out", c.out},
                     {"threads", c.threads},
                     {"replicates", c.replicates},
                     {"n", c.n},
                     {"multiset", c.multiset},
                     {"N", c.N},
                     {"seeds", c.seeds},
                     {"ensembles", c.ensembles},
                     {"z", zs},
                     {"x", c.x},
                     {"tuples", c.tuples},
                     {"trials", c.trials},
                     {"rank_trials", c.rank_trials},
                     {"lipschitz_N", c.lipschitz_N},
                     {"k_stderr", c.k_stderr},
                     {"ks_tolerance", c.ks_tolerance},
                     {"stieltjes_tolerance", c.stieltjes_tolerance}};
}

/// Strict: unknown keys and wrong types are errors. Missing keys keep their
/// defaults.
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") c.command = v.get<std::string>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "threads") c.threads = v.get<unsigned>();
      else if (key == "replicates") c.replicates = v.get<std::size_t>();
      else if (key == "n") c.n = v.get<std::vector<std::size_t>>();
      else if (key == "multiset") c.multiset = v.get<std::vector<double>>();
      else if (key == "N") c.N = v.get<std::vector<std::size_t>>();
      else if (key == "seeds") c.seeds = v.get<std::size_t>();
      else if (key == "ensembles") c.ensembles = v.get<std::vector<std::string>>();
      else if (key == "z") {
        c.z.clear();
        for (const auto& s : v.get<std::vector<std::string>>()) c.z.push_back(parse_complex(s));
      } else if (key == "x") c.x = v.get<std::vector<double>>();
      else if (key == "tuples") c.tuples = v.get<std::size_t>();
      else if (key == "trials") c.trials = v.get<std::size_t>();
      else if (key == "rank_trials") c.rank_trials = v.get<std::size_t>();
      else if (key == "lipschitz_N") c.lipschitz_N = v.get<std::vector<std::size_t>>();
      else if (key == "k_stderr") c.k_stderr = v.get<double>();
      else if (key == "ks_tolerance") c.ks_tolerance = v.get<std::map<std::string, double>>();
      else if (key == "stieltjes_tolerance") c.stieltjes_tolerance = v.get<double>();
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return j.get<ExperimentConfig>();
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
};

struct RunResult {
  std::string command;
  std::vector<Check> checks;
  std::vector<std::string> files;  // relative to the output directory
  nlohmann::json config;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> f;
    for (const auto& c : checks) {
      if (!c.pass) f.push_back(c.name);
    }
    return f;
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
  /// All checks whose name starts with `prefix` pass (and there is at least one).
  bool passed(const std::string& prefix) const {
    bool any = false;
    for (const auto& c : checks) {
      if (c.name.rfind(prefix, 0) == 0) {
        any = true;
        if (!c.pass) return false;
      }
    }
    return any;
  }

  nlohmann::json summary() const {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks) {
      cs.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}});
    }
    return {{"command", command}, {"schema_version", kSchemaVersion}, {"pass", ok()},
            {"checks", cs},       {"files", files},                   {"config", config}};
  }
};

namespace detail {

using Rows = std::vector<std::vector<std::string>>;

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

class Output {
public:
  Output(const ExperimentConfig& cfg, RunResult& res) : dir_(cfg.out), res_(res) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_.string());
  }

  void csv(const std::string& name, const std::vector<std::string>& header, const Rows& rows) {
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    CsvWriter w(os, header);
    for (const auto& r : rows) w.row(r);
    res_.files.push_back(name);
  }

  void summary() {
    const std::string name = res_.command + ".summary.json";
    res_.files.push_back(name);
    std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
    os << res_.summary().dump(2) << '\n';
  }

private:
  std::filesystem::path dir_;
  RunResult& res_;
};

inline void check(RunResult& r, std::string name, bool pass, double value = 0.0, double limit = 0.0) {
  r.checks.push_back({std::move(name), pass, value, limit});
}

/// Results of fn(0..count-1) in index order, computed on up to `threads` workers.
template <class Fn>
auto parallel_map(std::size_t count, unsigned threads, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  std::vector<decltype(fn(std::size_t{}))> out(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto work = [&] {
    try {
      for (std::size_t k = next++; k < count; k = next++) out[k] = fn(k);
    } catch (...) {
      std::lock_guard lock(m);
      if (!failure) failure = std::current_exception();
      next = count;
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <class T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline std::string cell(const std::string& base, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s = base + "[";
  for (std::size_t k = 0; k < kv.size(); ++k) s += (k ? "," : "") + kv[k].first + "=" + kv[k].second;
  return s + "]";
}

// ---------------------------------------------------------------------------
// thm11-check: swapping bound for i.i.d., permuted and Markov inputs
// ---------------------------------------------------------------------------

struct SuiteSpec {
  std::string name;
  ExchangeableSpec spec;
};

inline std::vector<SuiteSpec> suite_specs(std::size_t n) {
  std::vector<double> rad(n);
  for (std::size_t k = 0; k < n; ++k) rad[k] = k < (n + 1) / 2 ? 1.0 : -1.0;
  MarkovChain chain{{-1.0, 1.0}, {0.5, 0.5}, {{0.6, 0.4}, {0.4, 0.6}}, n};
  return {{"iid-exponential", IidFromDistribution{Distribution::exponential().standardized(), n}},
          {"markov-two-state", chain},
          {"multiset-rademacher", standardized(MultisetPermutation{rad})}};
}

inline std::vector<std::pair<std::string, ScalarProfile>> suite_profiles() {
  return {{"cos", ScalarProfile::cosine()},
          {"logistic", ScalarProfile::logistic_step(0.5, 0.25)},
          {"rational", ScalarProfile::rational_decay()}};
}

inline void run_thm11(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  const auto ns = cfg.n.empty() ? std::vector<std::size_t>{5, 20, 50} : sorted_unique(cfg.n);
  const std::size_t reps = cfg.replicates ? cfg.replicates : 100000;
  const Distribution y = Distribution::normal();
  Rows rows;
  const RandomSeed root{cfg.seed};
  // Sorted by (spec, n, f).
  for (std::size_t si = 0; si < 3; ++si) {
    for (std::size_t n : ns) {
      const auto spec = suite_specs(n)[si];
      for (const auto& [fname, g] : suite_profiles()) {
        const auto f = RidgeFunction::of_normalized_sum(g, n);
        const RandomSeed s = derive_seed(derive_seed(derive_seed(root, name_hash(spec.name)), n), name_hash(fname));
        const auto rep = lindeberg_check(f, spec.spec, y, reps, s, cfg.thread_count());
        const bool dom = rep.dominated(cfg.k_stderr);
        rows.push_back({spec.name, fmt(n), fname, fmt(reps), fmt(rep.mc_estimate), fmt(rep.mc_stderr), fmt(rep.bound),
                        fmt(rep.components.at(0).second), fmt(rep.components.at(1).second),
                        fmt(rep.components.at(2).second), fmt(dom)});
        check(res, cell("dominated", {{"spec", spec.name}, {"n", fmt(n)}, {"f", fname}}), dom,
              std::abs(rep.mc_estimate), rep.bound + cfg.k_stderr * rep.mc_stderr);
      }
    }
  }
  out.csv("thm11-check.csv",
          {"spec", "n", "f", "replicates", "mc_estimate", "mc_stderr", "bound", "first_moment_term", "second_moment_term", "third_moment_term",
           "dominated"},
          rows);
}

// ---------------------------------------------------------------------------
// thm12-check: summarization bound, interpolation, chain rule
// ---------------------------------------------------------------------------

inline MultisetPermutation default_multiset(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = k % 3 == 0 ? 2.0 : -1.0;
  return {v};
}

/// Unequal weights sqrt(2/n) sin(k+1). A ridge of the plain sum would be
/// constant under permutation, so both sides would agree trivially.
inline std::vector<double> mixing_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = std::sqrt(2.0 / static_cast<double>(n)) * std::sin(static_cast<double>(k + 1));
  return w;
}

inline void run_thm12(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  std::vector<MultisetPermutation> specs;
  if (!cfg.multiset.empty()) {
    specs.push_back({cfg.multiset});
  } else {
    for (std::size_t n : cfg.n.empty() ? std::vector<std::size_t>{10, 50} : sorted_unique(cfg.n)) {
      specs.push_back(default_multiset(n));
    }
  }
  const std::size_t reps = cfg.replicates ? cfg.replicates : 100000;
  const RandomSeed root{cfg.seed};
  const std::vector<std::pair<std::string, ScalarProfile>> profiles{
      {"cos", ScalarProfile::cosine()}, {"logistic", ScalarProfile::logistic_step(0.5, 0.25)}};
  Rows rows;
  for (const auto& spec : specs) {
    const std::size_t n = spec.values.size();
    const double m3 = centered_abs_moment(spec, 3.0), m4 = centered_abs_moment(spec, 4.0);
    for (const auto& [fname, g] : profiles) {
      const RidgeFunction f(g, mixing_weights(n));
      const auto rep = end_to_end_check(spec, f, reps, derive_seed(derive_seed(root, n), name_hash(fname)),
                                        cfg.thread_count());
      const bool dom = rep.dominated(cfg.k_stderr);
      rows.push_back({fmt(n), fname, fmt(reps), fmt(m3), fmt(m4), fmt(rep.mc_estimate), fmt(rep.mc_stderr),
                      fmt(rep.bound), fmt(rep.components.at(0).second), fmt(rep.components.at(1).second),
                      fmt(dom)});
      check(res, cell("dominated", {{"n", fmt(n)}, {"f", fname}}), dom, std::abs(rep.mc_estimate),
            rep.bound + cfg.k_stderr * rep.mc_stderr);
    }
  }
  out.csv("thm12-check.csv",
          {"n", "f", "replicates", "m3", "m4", "mc_estimate", "mc_stderr", "bound", "second_term", "third_term",
           "dominated"},
          rows);

  // Interpolation between U = G^{-1} V and the centred Gaussian.
  Rows irows;
  auto interp = [&](const std::string& name, const SmoothFunction& f0, std::size_t r, std::size_t grid,
                    RandomSeed s) {
    const auto ir = interpolation_difference(f0, r, grid, s);
    irows.push_back({name, fmt(f0.arity()), fmt(grid), fmt(r), fmt(ir.direct.value), fmt(ir.direct.std_error),
                     fmt(ir.integral.value), fmt(ir.integral.std_error), fmt(ir.gap_bound), fmt(ir.consistent()),
                     fmt(ir.within_gap_bound())});
    check(res, cell("interpolation_consistent", {{"case", name}, {"grid", fmt(grid)}}), ir.consistent(),
          std::abs(ir.direct.value - ir.integral.value), 4.0 * std::hypot(ir.direct.std_error, ir.integral.std_error));
    check(res, cell("interpolation_gap_bound", {{"case", name}, {"grid", fmt(grid)}}), ir.within_gap_bound(),
          std::max(std::abs(ir.direct.value), std::abs(ir.integral.value)), ir.gap_bound);
    return ir;
  };
  const QuadraticFunction quad(Eigen::MatrixXd::Identity(3, 3) * (2.0 / 3.0), Eigen::VectorXd::Zero(3));
  const auto q = interp("quadratic", quad, 200000, 32, derive_seed(root, 501));
  check(res, "interpolation_quadratic_value", std::abs(q.direct.value + 5.0 / 6.0) <= 4.0 * q.direct.std_error,
        q.direct.value, -5.0 / 6.0);
  check(res, "interpolation_quadratic_integral", std::abs(q.integral.value + 5.0 / 6.0) <= 1e-12, q.integral.value,
        -5.0 / 6.0);
  const RidgeFunction ridge(ScalarProfile::cosine(), {0.9, -0.1, 0.4, 0.2, -0.6, 0.3, 0.5, -0.2});
  const auto r32 = interp("cos-ridge", ridge, 128000, 32, derive_seed(root, 502));
  const auto r64 = interp("cos-ridge", ridge, 128000, 64, derive_seed(root, 502));
  const double refine = std::abs(r32.integral.value - r64.integral.value);
  const double refine_se = std::hypot(r32.integral.std_error, r64.integral.std_error);
  check(res, "interpolation_refinement", refine <= refine_se, refine, refine_se);
  out.csv("thm12-check.interpolation.csv",
          {"case", "n", "grid", "replicates", "direct", "direct_stderr", "integral", "integral_stderr", "gap_bound",
           "consistent", "within_gap_bound"},
          irows);

  // |d_j^r f0(G^{-1} x)| <= 2^r L'_r(f0).
  for (std::size_t n : {2u, 10u, 50u}) {
    auto f0 = std::make_shared<RidgeFunction>(RidgeFunction::of_normalized_sum(ScalarProfile::cosine(), n));
    const auto w = chain_rule_check(f0, 20, derive_seed(root, 600 + n));
    const double worst = *std::max_element(w.begin(), w.end());
    check(res, cell("chain_rule", {{"n", fmt(n)}}), worst <= 1.0 + 1e-12, worst, 1.0);
  }
}

// ---------------------------------------------------------------------------
// identities: exact conditional-moment checks and the formula objects
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, MultisetPermutation>> identity_multisets(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, MultisetPermutation>> out;
  if (!cfg.multiset.empty()) {
    out.push_back({"given", {cfg.multiset}});
    return out;
  }
  const auto ns = cfg.n.empty() ? std::vector<std::size_t>{3, 4, 5, 6, 7} : sorted_unique(cfg.n);
  for (std::size_t n : ns) {
    std::vector<double> ramp(n), rad(n), ties(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      ramp[k] = std::pow(static_cast<double>(k), 1.7) - 0.3 * static_cast<double>(k);
      rad[k] = k % 2 == 0 ? 1.0 : -1.0;
    }
    ties[0] = ties[1 % n] = 5.0;
    out.push_back({"ramp", {ramp}});
    out.push_back({"signs", {rad}});
    out.push_back({"ties", {ties}});
  }
  return out;
}

inline void run_identities(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  const double tol = 1e-12;
  Rows rows;
  std::set<std::size_t> sizes;
  for (const auto& [label, spec] : identity_multisets(cfg)) {
    const std::size_t n = spec.values.size();
    sizes.insert(n);
    double worst_mean = 0.0, worst_mart = 0.0, worst_square = 0.0;
    bool ineq = true;
    for (std::size_t i = 1; i <= n; ++i) {
      const double d3 = conditional_mean_identity_check(spec, i);
      const double d6 = martingale_check(spec, i);
      const auto m = second_moment_identity_check(spec, i);
      worst_mean = std::max(worst_mean, d3);
      worst_mart = std::max(worst_mart, d6);
      worst_square = std::max(worst_square, std::abs(m.mean_square_lhs.value - m.mean_square_rhs));
      ineq = ineq && m.inequalities_hold(tol);
      rows.push_back({label, fmt(n), fmt(i), fmt(d3), fmt(d6), fmt(m.mean_square_lhs.value), fmt(m.mean_square_rhs),
                      fmt(m.variance_lhs.value), fmt(m.variance_rhs), fmt(m.deviation_lhs.value),
                      fmt(m.deviation_rhs), fmt(m.third_lhs.value), fmt(m.third_rhs)});
    }
    const auto key = std::vector<std::pair<std::string, std::string>>{{"multiset", label}, {"n", fmt(n)}};
    check(res, cell("conditional_mean", key), worst_mean <= tol, worst_mean, tol);
    check(res, cell("martingale", key), worst_mart <= tol, worst_mart, tol);
    check(res, cell("second_moment_equality", key), worst_square <= tol, worst_square, tol);
    check(res, cell("moment_inequalities", key), ineq);
  }
  out.csv("identities.csv",
          {"multiset", "n", "i", "conditional_mean_deviation", "martingale_deviation", "mean_square_lhs", "mean_square_rhs",
           "variance_lhs", "variance_rhs", "deviation_lhs", "deviation_rhs", "third_lhs", "third_rhs"},
          rows);

  // G and its inverse.
  std::set<std::size_t> gn{1, 2, 3, 10, 100, 1000};
  gn.insert(sizes.begin(), sizes.end());
  Rows grows;
  for (std::size_t n : gn) {
    const GTransform g(n);
    const double resid = g.identity_residual(), factor = g.chain_rule_factor();
    grows.push_back({fmt(n), fmt(resid), fmt(factor)});
    check(res, cell("g_inverse", {{"n", fmt(n)}}), resid <= 1e-10, resid, 1e-10);
    const double expect = n >= 2 ? 2.0 : 1.0;
    check(res, cell("chain_factor", {{"n", fmt(n)}}), std::abs(factor - expect) <= 1e-12, factor, expect);
  }
  out.csv("identities.g.csv", {"n", "identity_residual", "chain_factor"}, grows);

  // Covariance gap: elementwise sum against 3 + 2 H-tail, and the crude bound.
  Rows crows;
  std::set<std::size_t> cn{100, 1000, 10000};
  for (std::size_t n = 2; n <= 50; ++n) cn.insert(n);
  for (std::size_t n : cn) {
    const auto g = covariance_gap_sum(n);
    crows.push_back({fmt(n), fmt(g.elementwise), fmt(g.closed_form), fmt(g.crude_bound)});
    check(res, cell("covariance_gap_equality", {{"n", fmt(n)}}), std::abs(g.elementwise - g.closed_form) <= 1e-10,
          g.elementwise, g.closed_form);
  }
  double worst_ratio = 0.0;
  CompensatedSum harmonic;  // sum_{k=2}^{n-1} 1/k
  for (std::size_t n = 2; n <= 10000; ++n) {
    if (n >= 3) harmonic.add(1.0 / static_cast<double>(n - 1));
    worst_ratio = std::max(worst_ratio, (3.0 + 2.0 * harmonic.value()) / (3.0 * std::sqrt(static_cast<double>(n))));
  }
  check(res, "covariance_gap_crude_bound", worst_ratio <= 1.0, worst_ratio, 1.0);
  out.csv("identities.covariance.csv", {"n", "elementwise", "closed_form", "crude_bound"}, crows);

  // Stein identity: exact for all monomials of degree <= 3, Monte Carlo for a ridge.
  Engine rng = make_engine(derive_seed(RandomSeed{cfg.seed}, 700));
  std::normal_distribution<double> gauss;
  double worst = 0.0;
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd a(3, 3);
    for (auto& v : a.reshaped()) v = gauss(rng);
    const Eigen::MatrixXd cov = a * a.transpose();
    for (int e0 = 0; e0 <= 3; ++e0) {
      for (int e1 = 0; e0 + e1 <= 3; ++e1) {
        for (int e2 = 0; e0 + e1 + e2 <= 3; ++e2) {
          worst = std::max(worst, stein_identity_exact(Polynomial(3, {{1.0, {e0, e1, e2}}}), cov).max_deviation);
        }
      }
    }
  }
  check(res, "stein_exact", worst <= 1e-10, worst, 1e-10);
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 0.4, -0.2, 0.4, 2.0, 0.3, -0.2, 0.3, 0.5;
  const RidgeFunction h(ScalarProfile::logistic_step(0.3, 0.5), {0.5, -1.0, 0.8});
  const std::size_t reps = cfg.replicates ? cfg.replicates : 100000;
  const auto mc = stein_identity_mc(h, cov, reps, derive_seed(RandomSeed{cfg.seed}, 701));
  check(res, "stein_monte_carlo", mc.max_z <= 4.0, mc.max_z, 4.0);
}

// ---------------------------------------------------------------------------
// resolvent-check: exact partials, trace bounds, composed constants
// ---------------------------------------------------------------------------

template <class F>
cplx central_difference(const F& f, double x0) {
  const double h = fd::step(1, std::abs(x0));
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

inline std::string pair_str(IndexPair a) { return std::to_string(a.i) + ":" + std::to_string(a.j); }

inline void run_resolvent(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  const auto Ns = cfg.N.empty() ? std::vector<std::size_t>{2, 3, 4, 5, 6, 7, 8} : sorted_unique(cfg.N);
  const RandomSeed root{cfg.seed};
  const cplx z_fd(0.3, 1.0);
  Rows rows;
  std::array<double, 3> worst{0.0, 0.0, 0.0};
  for (std::size_t t = 0; t < cfg.tuples; ++t) {
    const std::size_t N = Ns[t % Ns.size()];
    const std::size_t n = triangle_size(N);
    Engine rng = make_engine(derive_seed(root, t));
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> x(n);
    for (auto& v : x) v = gauss(rng);
    const std::array<std::size_t, 3> p{pick(rng), pick(rng), pick(rng)};
    const IndexPair a = triangle_pair(N, p[0]), b = triangle_pair(N, p[1]), c = triangle_pair(N, p[2]);
    const auto jet = resolvent_partials(N, x, z_fd, a, b, c);
    const auto hb = resolvent_bounds(z_fd.imag(), N);
    auto moved = [&](std::size_t coord, auto fn) {
      return [&, coord, fn](double v) {
        auto y = x;
        y[coord] = v;
        return fn(ResolventWorkspace(wigner_from_entries(N, y), z_fd));
      };
    };
    const std::array<cplx, 3> fd{
        central_difference(moved(p[0], [](const ResolventWorkspace& ws) { return ws.h(); }), x[p[0]]),
        central_difference(moved(p[1], [a](const ResolventWorkspace& ws) { return h_d1(ws, a); }), x[p[1]]),
        central_difference(moved(p[2], [a, b](const ResolventWorkspace& ws) { return h_d2(ws, a, b); }), x[p[2]])};
    const std::array<cplx, 3> an{jet.d1, jet.d2, jet.d3};
    for (int r = 0; r < 3; ++r) {
      // Relative to the larger of the value and its a-priori bound, so values
      // that vanish by symmetry are not divided by zero.
      const double rel = std::abs(an[r] - fd[r]) / std::max(std::abs(an[r]), hb.H[r]);
      worst[r] = std::max(worst[r], rel);
      rows.push_back({fmt(t), fmt(N), pair_str(a), pair_str(b), pair_str(c), fmt(std::size_t(r + 1)),
                      fmt(an[r].real()), fmt(an[r].imag()), fmt(fd[r].real()), fmt(fd[r].imag()), fmt(rel)});
    }
  }
  for (int r = 0; r < 3; ++r) {
    check(res, cell("finite_difference", {{"order", fmt(std::size_t(r + 1))}}), worst[r] <= 1e-6, worst[r], 1e-6);
  }
  out.csv("resolvent-check.csv",
          {"tuple", "N", "alpha", "beta", "gamma", "order", "analytic_re", "analytic_im", "fd_re", "fd_im",
           "rel_error"},
          rows);

  // Trace and partial bounds over random index triples.
  const auto zs = cfg.z.empty() ? default_z_grid() : cfg.z;
  Rows brows;
  for (std::size_t N : {2u, 5u, 12u, 25u}) {
    Engine rng = make_engine(derive_seed(root, 1000 + N));
    std::normal_distribution<double> gauss;
    std::vector<double> x(triangle_size(N));
    for (auto& v : x) v = gauss(rng);
    const auto a = wigner_from_entries(N, x);
    for (const cplx z : zs) {
      const auto r = trace_bound_check(a, z, cfg.trials, derive_seed(root, 2000 + N));
      brows.push_back({fmt(N), format_complex(z), fmt(cfg.trials), fmt(r.trace[0]), fmt(r.trace[1]), fmt(r.trace[2]),
                       fmt(r.partial[0]), fmt(r.partial[1]), fmt(r.partial[2])});
      const double m = std::max({r.trace[0], r.trace[1], r.trace[2], r.partial[0], r.partial[1], r.partial[2]});
      check(res, cell("trace_bounds", {{"N", fmt(N)}, {"z", format_complex(z)}}), r.ok(), m, 1.0);
    }
  }
  out.csv("resolvent-check.bounds.csv",
          {"N", "z", "trials", "trace1_ratio", "trace2_ratio", "trace3_ratio", "partial1_ratio", "partial2_ratio",
           "partial3_ratio"},
          brows);

  // Measured L'_r of g(Re h) against the composed constants.
  const auto LNs = cfg.lipschitz_N.empty() ? std::vector<std::size_t>{4, 8, 16} : sorted_unique(cfg.lipschitz_N);
  const auto g = ScalarProfile::tanh_clamp(0.5);
  Rows lrows;
  for (std::size_t N : LNs) {
    for (const cplx z : {cplx(0.0, 1.0), cplx(0.5, 0.5)}) {
      const StieltjesComposition f(N, z, g);
      const auto& bd = f.bounds();
      Engine rng = make_engine(derive_seed(derive_seed(root, 3000 + N), name_hash(format_complex(z))));
      std::normal_distribution<double> gauss;
      for (std::size_t s = 0; s < 2; ++s) {
        std::vector<double> x(f.arity());
        for (auto& v : x) v = gauss(rng);
        const auto w = measured_lipschitz(f, x);
        lrows.push_back({fmt(N), format_complex(z), fmt(s), fmt(w[0]), fmt(w[1]), fmt(w[2]), fmt(bd.L_mixed(1)),
                         fmt(bd.L_mixed(2)), fmt(bd.L_mixed(3))});
        const auto key = std::vector<std::pair<std::string, std::string>>{
            {"N", fmt(N)}, {"z", format_complex(z)}, {"sample", fmt(s)}};
        check(res, cell("lipschitz2", key), w[1] <= bd.L_mixed(2), w[1], bd.L_mixed(2));
        check(res, cell("lipschitz3", key), w[2] <= bd.L_mixed(3), w[2], bd.L_mixed(3));
      }
    }
  }
  out.csv("resolvent-check.lipschitz.csv",
          {"N", "z", "sample", "measured1", "measured2", "measured3", "bound1", "bound2", "bound3"}, lrows);
}

// ---------------------------------------------------------------------------
// wigner-sweep: ESD convergence for exchangeable Wigner matrices
// ---------------------------------------------------------------------------

inline const std::map<std::string, double>& default_ks_tolerance() {
  static const std::map<std::string, double> t{{"gaussian", 0.06}, {"rademacher-perm", 0.10},
                                               {"student-t-perm", 0.10}};
  return t;
}

inline void run_rank_checks(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  Rows rows;
  const RandomSeed root = derive_seed(RandomSeed{cfg.seed}, 0xa11);
  bool all = true;
  double worst = 0.0;
  for (std::size_t N : {20u, 100u}) {
    for (std::size_t k : {1u, 2u, 5u}) {
      auto cellrows = parallel_map(cfg.rank_trials, cfg.thread_count(), [&](std::size_t t) {
        Engine rng = make_engine(derive_seed(derive_seed(root, N * 16 + k), t));
        std::normal_distribution<double> gauss;
        std::vector<double> x(triangle_size(N));
        for (auto& v : x) v = gauss(rng);
        const auto a = wigner_from_entries(N, x);
        const auto m = static_cast<Eigen::Index>(N);
        Eigen::MatrixXd u(m, static_cast<Eigen::Index>(k));
        for (auto& v : u.reshaped()) v = gauss(rng);
        Eigen::VectorXd w(static_cast<Eigen::Index>(k));
        for (auto& v : w) v = gauss(rng);
        const Eigen::MatrixXd b = a + u * w.asDiagonal() * u.transpose() / std::sqrt(static_cast<double>(N));
        return rank_inequality_check(a, b);
      });
      for (std::size_t t = 0; t < cellrows.size(); ++t) {
        const auto& r = cellrows[t];
        const bool ok = r.ok && r.rank == k;
        all = all && ok;
        worst = std::max(worst, r.ks - r.bound);
        rows.push_back({fmt(N), fmt(k), fmt(t), fmt(r.ks), fmt(r.rank), fmt(r.bound), fmt(ok)});
      }
    }
  }
  check(res, "rank_inequality", all, worst, 0.0);
  const auto eq = rank_inequality_check(Eigen::MatrixXd::Identity(10, 10), Eigen::MatrixXd::Zero(10, 10));
  check(res, "rank_equality_case", eq.ks == 1.0 && eq.bound == 1.0 && eq.ok, eq.ks, eq.bound);
  out.csv("wigner-sweep.rank.csv", {"N", "k", "trial", "ks", "rank", "bound", "ok"}, rows);
}

inline void run_wigner(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  const auto Ns = cfg.N.empty() ? std::vector<std::size_t>{50, 100, 200, 400} : sorted_unique(cfg.N);
  const auto ens = cfg.ensembles.empty() ? std::vector<std::string>{"gaussian", "rademacher-perm"}
                                         : sorted_unique(cfg.ensembles);
  const auto zs = cfg.z.empty() ? default_z_grid() : cfg.z;
  const RandomSeed root{cfg.seed};
  struct Cell {
    std::string ensemble;
    std::size_t N;
    std::size_t s;
  };
  std::vector<Cell> cells;
  for (const auto& e : ens) {
    for (std::size_t N : Ns) {
      for (std::size_t s = 0; s < cfg.seeds; ++s) cells.push_back({e, N, s});
    }
  }
  std::map<std::pair<std::string, std::size_t>, WignerEnsembleSpec> specs;
  for (const auto& e : ens) {
    for (std::size_t N : Ns) specs.emplace(std::pair{e, N}, WignerEnsembleSpec::named(e, N));
  }
  const auto rows = parallel_map(cells.size(), cfg.thread_count(), [&](std::size_t k) {
    const auto& c = cells[k];
    const RandomSeed s = derive_seed(derive_seed(derive_seed(root, name_hash(c.ensemble)), c.N), c.s);
    return thm13_experiment(specs.at({c.ensemble, c.N}), s, zs);
  });
  Rows csv;
  for (const auto& r : rows) csv.push_back(thm13_csv_fields(r));
  out.csv("wigner-sweep.csv", thm13_csv_header(zs), csv);

  Rows med;
  std::size_t k = 0;
  for (const auto& e : ens) {
    std::vector<double> ks_by_N;
    std::vector<std::vector<double>> gap_by_N;
    for (std::size_t N : Ns) {
      std::vector<double> ks;
      std::vector<std::vector<double>> gaps(zs.size());
      for (std::size_t s = 0; s < cfg.seeds; ++s, ++k) {
        ks.push_back(rows[k].ks);
        for (std::size_t q = 0; q < zs.size(); ++q) gaps[q].push_back(rows[k].stieltjes_gap(q));
      }
      std::vector<std::string> line{e, fmt(N), fmt(cfg.seeds), fmt(median(ks))};
      std::vector<double> mg;
      for (auto& g : gaps) {
        mg.push_back(median(g));
        line.push_back(fmt(mg.back()));
      }
      ks_by_N.push_back(median(ks));
      gap_by_N.push_back(mg);
      med.push_back(line);
    }
    if (Ns.size() >= 2) {
      bool dec = true;
      for (std::size_t q = 1; q < ks_by_N.size(); ++q) dec = dec && ks_by_N[q] < ks_by_N[q - 1];
      check(res, cell("ks_decreasing", {{"ensemble", e}}), dec, ks_by_N.back(), ks_by_N.front());
    }
    double tol = -1.0;
    if (auto it = cfg.ks_tolerance.find(e); it != cfg.ks_tolerance.end()) {
      tol = it->second;
    } else if (auto d = default_ks_tolerance().find(e); d != default_ks_tolerance().end()) {
      tol = d->second;
    }
    if (tol >= 0.0) {
      check(res, cell("ks_at_largest_N", {{"ensemble", e}, {"N", fmt(Ns.back())}}), ks_by_N.back() <= tol,
            ks_by_N.back(), tol);
      for (std::size_t q = 0; q < zs.size(); ++q) {
        const double gq = gap_by_N.back()[q];
        check(res, cell("stieltjes_gap", {{"ensemble", e}, {"N", fmt(Ns.back())}, {"z", format_complex(zs[q])}}),
              gq <= cfg.stieltjes_tolerance, gq, cfg.stieltjes_tolerance);
      }
    }
  }
  std::vector<std::string> mh{"ensemble", "N", "seeds", "median_ks"};
  for (const cplx z : zs) mh.push_back("median_gap[" + format_complex(z) + "]");
  out.csv("wigner-sweep.medians.csv", mh, med);
  if (cfg.rank_trials > 0) run_rank_checks(cfg, res, out);
}

// ---------------------------------------------------------------------------
// semicircle-table: reference values
// ---------------------------------------------------------------------------

inline void run_semicircle(const ExperimentConfig& cfg, RunResult& res, Output& out) {
  std::vector<double> xs = cfg.x;
  if (xs.empty()) {
    for (int k = -10; k <= 10; ++k) xs.push_back(0.25 * k);
  }
  xs = sorted_unique(xs);
  Rows rows;
  bool nonneg = true, monotone = true, range = true;
  double prev = -1.0;
  for (double x : xs) {
    const double d = semicircle::density(x), c = semicircle::cdf(x);
    nonneg = nonneg && d >= 0.0;
    monotone = monotone && c >= prev;
    range = range && c >= 0.0 && c <= 1.0;
    prev = c;
    rows.push_back({fmt(x), fmt(d), fmt(c)});
  }
  check(res, "density_nonnegative", nonneg);
  check(res, "cdf_monotone", monotone);
  check(res, "cdf_in_unit_interval", range);
  out.csv("semicircle-table.csv", {"x", "density", "cdf"}, rows);

  const auto zs = cfg.z.empty() ? default_z_grid() : cfg.z;
  Rows srows;
  double resid = 0.0, bound = 0.0;
  for (const cplx z : zs) {
    const cplx m = semicircle::stieltjes(z);
    resid = std::max(resid, std::abs(m * m + z * m + 1.0));
    bound = std::max(bound, std::abs(m) * std::abs(z.imag()));
    srows.push_back({format_complex(z), fmt(m.real()), fmt(m.imag())});
  }
  check(res, "stieltjes_equation", resid <= 1e-12, resid, 1e-12);
  check(res, "stieltjes_bound", bound <= 1.0 + 1e-12, bound, 1.0);
  out.csv("semicircle-table.stieltjes.csv", {"z", "re_m", "im_m"}, srows);
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
  const auto& cmds = commands();
  if (std::find(cmds.begin(), cmds.end(), c.command) == cmds.end()) {
    throw ConfigError("unknown command '" + c.command + "'");
  }
  if (c.replicates == 1) throw ConfigError("replicates must be 0 (default) or >= 2");
  if (!(c.k_stderr > 0.0)) throw ConfigError("k_stderr must be positive");
  if (!(c.stieltjes_tolerance >= 0.0)) throw ConfigError("stieltjes_tolerance must be nonnegative");
  for (const auto& [e, t] : c.ks_tolerance) {
    if (!(t >= 0.0)) throw ConfigError("ks_tolerance for '" + e + "' must be nonnegative");
  }
  for (double v : c.multiset) {
    if (!std::isfinite(v)) throw ConfigError("multiset values must be finite");
  }
  for (double v : c.x) {
    if (!std::isfinite(v)) throw ConfigError("x values must be finite");
  }
  for (const cplx z : c.z) {
    if (z.imag() == 0.0) throw ConfigError("z grid points need a nonzero imaginary part");
  }
  for (std::size_t v : c.n) {
    if (v == 0) throw ConfigError("n must be >= 1");
  }
  for (std::size_t v : c.N) {
    if (v == 0) throw ConfigError("N must be >= 1");
  }
  if (c.command == "identities") {
    if (!c.multiset.empty()) {
      if (c.multiset.size() < 2 || c.multiset.size() > kMaxEnumerationSize) {
        throw ConfigError("identities: multiset size must be in 2..7");
      }
      if (!c.n.empty() && (c.n.size() != 1 || c.n[0] != c.multiset.size())) {
        throw ConfigError("identities: --n does not match the multiset size");
      }
      if (center_and_scale(c.multiset).degenerate) throw ConfigError("identities: multiset is constant");
    }
    for (std::size_t v : c.n) {
      if (v < 2 || v > kMaxEnumerationSize) throw ConfigError("identities: n must be in 2..7");
    }
  }
  if (c.command == "thm12-check") {
    if (!c.multiset.empty() && c.multiset.size() < 2) throw ConfigError("thm12-check: multiset needs >= 2 values");
    for (std::size_t v : c.n) {
      if (v < 2) throw ConfigError("thm12-check: n must be >= 2");
    }
  }
  if (c.command == "wigner-sweep") {
    if (c.seeds == 0) throw ConfigError("wigner-sweep: seeds must be >= 1");
    for (std::size_t v : c.N) {
      if (v < 2) throw ConfigError("wigner-sweep: N must be >= 2 (one entry has no spread)");
    }
    for (const auto& e : c.ensembles) {
      const auto& known = WignerEnsembleSpec::kNamed;
      if (std::find(known.begin(), known.end(), e) == known.end()) {
        throw ConfigError("wigner-sweep: unknown ensemble '" + e + "'");
      }
    }
  }
  if (c.command == "resolvent-check") {
    if (c.tuples == 0 || c.trials == 0) throw ConfigError("resolvent-check: tuples and trials must be >= 1");
    for (std::size_t v : c.N) {
      if (v > 64) throw ConfigError("resolvent-check: N above 64 is not supported for finite differences");
    }
    for (std::size_t v : c.lipschitz_N) {
      if (v == 0 || v > 24) throw ConfigError("resolvent-check: lipschitz_N must be in 1..24");
    }
  }
}

/// Runs one command, writes its files under cfg.out, and returns the checks.
inline RunResult run(const ExperimentConfig& cfg) {
  validate(cfg);
  RunResult res;
  res.command = cfg.command;
  res.config = cfg;
  detail::Output out(cfg, res);
  if (cfg.command == "thm11-check") detail::run_thm11(cfg, res, out);
  else if (cfg.command == "thm12-check") detail::run_thm12(cfg, res, out);
  else if (cfg.command == "identities") detail::run_identities(cfg, res, out);
  else if (cfg.command == "resolvent-check") detail::run_resolvent(cfg, res, out);
  else if (cfg.command == "wigner-sweep") detail::run_wigner(cfg, res, out);
  else detail::run_semicircle(cfg, res, out);
  out.summary();
  return res;
}

} // namespace lindeberg::harness
