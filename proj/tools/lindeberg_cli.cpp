// Command-line front end for the experiment harness.
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 bad command line or
// config.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lindeberg/harness.hpp"

namespace {

using lindeberg::harness::ConfigError;
using lindeberg::harness::ExperimentConfig;

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;
  std::size_t replicates = 0;
  std::vector<std::size_t> n, N, lipschitz_N;
  std::vector<double> multiset, x;
  std::vector<std::string> ensembles, z;
  std::size_t seeds = 0, tuples = 0, trials = 0, rank_trials = 0;
  double k_stderr = 0.0, stieltjes_tolerance = 0.0;
};

struct Sub {
  CLI::App* app;
  Flags flags;
  std::map<std::string, CLI::Option*> opts;
};

void add_options(Sub& s, const std::string& cmd) {
  auto& f = s.flags;
  auto* a = s.app;
  s.opts["config"] = a->add_option("--config", f.config, "JSON config file; flags override it");
  s.opts["seed"] = a->add_option("--seed", f.seed, "root seed");
  s.opts["out"] = a->add_option("--out", f.out, "output directory");
  s.opts["threads"] = a->add_option("--threads", f.threads, "worker threads (results do not depend on it)");
  if (cmd == "thm11-check" || cmd == "thm12-check" || cmd == "identities") {
    s.opts["replicates"] = a->add_option("--replicates", f.replicates, "Monte Carlo replicates");
    s.opts["n"] = a->add_option("--n", f.n, "vector lengths")->delimiter(',');
    s.opts["k_stderr"] = a->add_option("--k-stderr", f.k_stderr, "standard errors allowed above the bound");
  }
  if (cmd == "thm12-check" || cmd == "identities") {
    s.opts["multiset"] = a->add_option("--multiset", f.multiset, "explicit multiset values")->delimiter(',');
  }
  if (cmd == "wigner-sweep" || cmd == "resolvent-check") {
    s.opts["N"] = a->add_option("--N", f.N, "matrix orders")->delimiter(',');
  }
  if (cmd == "wigner-sweep" || cmd == "resolvent-check" || cmd == "semicircle-table") {
    s.opts["z"] = a->add_option("--z", f.z, "spectral parameters such as i,2i,1+i")->delimiter(',');
  }
  if (cmd == "wigner-sweep") {
    s.opts["seeds"] = a->add_option("--seeds", f.seeds, "seeds per (ensemble, N)");
    s.opts["ensembles"] = a->add_option("--ensemble,--ensembles", f.ensembles, "ensemble names")->delimiter(',');
    s.opts["rank_trials"] = a->add_option("--rank-trials", f.rank_trials, "perturbations per rank cell (0 skips)");
    s.opts["stieltjes_tolerance"] =
        a->add_option("--stieltjes-tolerance", f.stieltjes_tolerance, "median Stieltjes gap allowed");
  }
  if (cmd == "resolvent-check") {
    s.opts["tuples"] = a->add_option("--tuples", f.tuples, "finite-difference tuples");
    s.opts["trials"] = a->add_option("--trials", f.trials, "index triples per trace-bound cell");
    s.opts["lipschitz_N"] = a->add_option("--lipschitz-N", f.lipschitz_N, "orders for measured constants")
                                ->delimiter(',');
  }
  if (cmd == "semicircle-table") {
    s.opts["x"] = a->add_option("--x", f.x, "evaluation points")->delimiter(',');
  }
}

bool given(const Sub& s, const std::string& key) {
  const auto it = s.opts.find(key);
  return it != s.opts.end() && it->second->count() > 0;
}

ExperimentConfig build_config(const Sub& s, const std::string& cmd) {
  const auto& f = s.flags;
  ExperimentConfig c = given(s, "config") ? lindeberg::harness::load_config(f.config) : ExperimentConfig{};
  if (!c.command.empty() && c.command != cmd) {
    throw ConfigError("config is for '" + c.command + "', not '" + cmd + "'");
  }
  c.command = cmd;
  if (given(s, "seed")) c.seed = f.seed;
  if (given(s, "out")) c.out = f.out;
  if (given(s, "threads")) c.threads = f.threads;
  if (given(s, "replicates")) c.replicates = f.replicates;
  if (given(s, "n")) c.n = f.n;
  if (given(s, "multiset")) c.multiset = f.multiset;
  if (given(s, "N")) c.N = f.N;
  if (given(s, "seeds")) c.seeds = f.seeds;
  if (given(s, "ensembles")) c.ensembles = f.ensembles;
  if (given(s, "z")) {
    c.z.clear();
    for (const auto& z : f.z) c.z.push_back(lindeberg::harness::parse_complex(z));
  }
  if (given(s, "x")) c.x = f.x;
  if (given(s, "tuples")) c.tuples = f.tuples;
  if (given(s, "trials")) c.trials = f.trials;
  if (given(s, "rank_trials")) c.rank_trials = f.rank_trials;
  if (given(s, "lipschitz_N")) c.lipschitz_N = f.lipschitz_N;
  if (given(s, "k_stderr")) c.k_stderr = f.k_stderr;
  if (given(s, "stieltjes_tolerance")) c.stieltjes_tolerance = f.stieltjes_tolerance;
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swapping-bound experiments for exchangeable vectors and Wigner matrices"};
  app.require_subcommand(1);
  const std::map<std::string, std::string> about{
      {"thm11-check", "swapping bound against Monte Carlo for iid, permuted and Markov inputs"},
      {"thm12-check", "Gaussian bound for exchangeable vectors, interpolation and chain rule"},
      {"identities", "exact conditional-moment identities and covariance facts"},
      {"resolvent-check", "resolvent partials, trace bounds and composed constants"},
      {"wigner-sweep", "spectral distribution of exchangeable Wigner matrices"},
      {"semicircle-table", "semicircle density, distribution and Stieltjes transform"}};
  std::vector<Sub> subs;
  subs.reserve(about.size());
  for (const auto& cmd : lindeberg::harness::commands()) {
    subs.push_back({app.add_subcommand(cmd, about.at(cmd)), {}, {}});
    add_options(subs.back(), cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    const std::string cmd = s.app->get_name();
    try {
      const auto cfg = build_config(s, cmd);
      const auto res = lindeberg::harness::run(cfg);
      for (const auto& name : res.failures()) std::cerr << "FAIL " << name << '\n';
      std::cout << cmd << ": " << res.checks.size() - res.failures().size() << "/" << res.checks.size()
                << " checks passed, output in " << cfg.out << '\n';
      return res.ok() ? 0 : 1;
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}
