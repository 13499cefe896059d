#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lindeberg/core/distribution.hpp"
#include "lindeberg/core/seed.hpp"

namespace lindeberg {

// ---------------------------------------------------------------------------
// Exchangeable (and weakly dependent) vector specifications
// ---------------------------------------------------------------------------

/// Uniformly random arrangement of a fixed list of values.
struct MultisetPermutation {
  std::vector<double> values;
  friend bool operator==(const MultisetPermutation&, const MultisetPermutation&) = default;
};

/// n i.i.d. draws from one law.
struct IidFromDistribution {
  Distribution dist;
  std::size_t n = 0;
  friend bool operator==(const IidFromDistribution&, const IidFromDistribution&) = default;
};

/// Finite-state Markov chain emitting `states[s]` in state s. Not
/// exchangeable in general; admitted only where weak dependence is enough.
struct MarkovChain {
  std::vector<double> states;
  std::vector<double> initial;
  std::vector<std::vector<double>> transition;
  std::size_t n = 0;
  friend bool operator==(const MarkovChain&, const MarkovChain&) = default;
};

/// Draw theta from `mixing`, then n i.i.d. values given theta:
/// location mode X_i = theta + E_i, scale mode X_i = theta * E_i, with E_i
/// distributed as `conditional`.
struct ConditionallyIid {
  enum class Mode { location, scale };
  Distribution mixing;
  Distribution conditional;
  Mode mode = Mode::location;
  std::size_t n = 0;
  friend bool operator==(const ConditionallyIid&, const ConditionallyIid&) = default;
};

using ExchangeableSpec = std::variant<MultisetPermutation, IidFromDistribution, MarkovChain, ConditionallyIid>;

inline std::size_t dimension(const ExchangeableSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) return s.values.size();
        else return s.n;
      },
      spec);
}

/// True for the variants whose law is permutation invariant.
inline bool is_exchangeable(const ExchangeableSpec& spec) {
  return !std::holds_alternative<MarkovChain>(spec);
}

inline void validate(const MarkovChain& chain) {
  const std::size_t k = chain.states.size();
  if (k == 0) throw std::invalid_argument("MarkovChain: no states");
  if (chain.initial.size() != k || chain.transition.size() != k) {
    throw std::invalid_argument("MarkovChain: initial/transition size does not match state count");
  }
  auto check_row = [](std::span<const double> row, const char* what) {
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw std::invalid_argument(std::string("MarkovChain: negative probability in ") + what);
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument(std::string("MarkovChain: ") + what + " does not sum to 1");
    }
  };
  check_row(chain.initial, "initial distribution");
  for (const auto& row : chain.transition) {
    if (row.size() != k) throw std::invalid_argument("MarkovChain: transition kernel is not square");
    check_row(row, "transition kernel row");
  }
}

inline void validate(const ExchangeableSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) {
          if (s.values.empty()) throw std::invalid_argument("MultisetPermutation: empty multiset");
        } else if constexpr (std::is_same_v<T, MarkovChain>) {
          if (s.n == 0) throw std::invalid_argument("MarkovChain: n must be >= 1");
          validate(s);
        } else {
          if (s.n == 0) throw std::invalid_argument("spec: n must be >= 1");
        }
      },
      spec);
}

namespace detail {

inline std::size_t categorical(Engine& rng, std::span<const double> probs) {
  const double u = std::uniform_real_distribution<double>{}(rng);
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < probs.size(); ++s) {
    acc += probs[s];
    if (u < acc) return s;
  }
  return probs.size() - 1;
}

} // namespace detail

/// Draws one vector from `spec` using `rng`. Callers that need a fixed stream
/// per replicate pass an engine built from a derived seed.
inline void sample_into(const ExchangeableSpec& spec, Engine& rng, std::span<double> out) {
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) {
          std::copy(s.values.begin(), s.values.end(), out.begin());
          // Fisher-Yates, drawing from the back.
          for (std::size_t i = out.size(); i > 1; --i) {
            const std::size_t j = std::uniform_int_distribution<std::size_t>{0, i - 1}(rng);
            std::swap(out[i - 1], out[j]);
          }
        } else if constexpr (std::is_same_v<T, IidFromDistribution>) {
          s.dist.sample_into(rng, out);
        } else if constexpr (std::is_same_v<T, MarkovChain>) {
          std::size_t state = detail::categorical(rng, s.initial);
          out[0] = s.states[state];
          for (std::size_t i = 1; i < out.size(); ++i) {
            state = detail::categorical(rng, s.transition[state]);
            out[i] = s.states[state];
          }
        } else {
          const double theta = s.mixing.sample(rng);
          s.conditional.sample_into(rng, out);
          for (double& x : out) x = s.mode == ConditionallyIid::Mode::location ? theta + x : theta * x;
        }
      },
      spec);
}

inline std::vector<double> sample_exchangeable(const ExchangeableSpec& spec, RandomSeed seed) {
  validate(spec);
  Engine rng = make_engine(seed);
  std::vector<double> out(dimension(spec));
  sample_into(spec, rng, out);
  return out;
}

// ---------------------------------------------------------------------------
// Standardization and the Gaussian surrogate
// ---------------------------------------------------------------------------

struct StandardizedVector {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  std::vector<double> x_tilde;
  bool degenerate = false;
};

/// Sample mean, root mean squared deviation, and the standardized vector.
/// A constant input is a flagged success with x_tilde = 0.
inline StandardizedVector center_and_scale(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("center_and_scale: empty vector");
  const double n = static_cast<double>(x.size());
  StandardizedVector out;
  out.mu_hat = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mu_hat) * (v - out.mu_hat);
  out.sigma_hat = std::sqrt(ss / n);
  out.x_tilde.assign(x.size(), 0.0);
  // Deviations at rounding level of mu_hat count as a constant vector.
  const double tiny = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(out.mu_hat));
  if (out.sigma_hat <= tiny) {
    out.degenerate = true;
    out.sigma_hat = 0.0;
    return out;
  }
  for (std::size_t i = 0; i < x.size(); ++i) out.x_tilde[i] = (x[i] - out.mu_hat) / out.sigma_hat;
  return out;
}

/// Y_i = mu_hat + sigma_hat (z_i - mean(z)).
inline std::vector<double> build_y(double mu_hat, double sigma_hat, std::span<const double> z) {
  if (z.empty()) return {};
  const double zbar = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  std::vector<double> y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = mu_hat + sigma_hat * (z[i] - zbar);
  return y;
}

/// Values of `spec` standardized to mean 0 and mean square 1.
inline MultisetPermutation standardized(const MultisetPermutation& spec) {
  auto s = center_and_scale(spec.values);
  return MultisetPermutation{std::move(s.x_tilde)};
}

// ---------------------------------------------------------------------------
// Exact conditional moments for a random permutation of a multiset
// ---------------------------------------------------------------------------

/// Mean (order 1) or mean square (order 2) of what remains of the multiset
/// after the values in `prefix` have been revealed.
inline double exact_conditional_moment(const MultisetPermutation& spec, std::span<const double> prefix, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("exact_conditional_moment: order must be 1 or 2");
  if (spec.values.empty()) throw std::invalid_argument("exact_conditional_moment: empty multiset");
  if (prefix.size() >= spec.values.size()) {
    throw std::invalid_argument("exact_conditional_moment: prefix leaves nothing to reveal");
  }
  std::map<double, std::size_t> remaining;
  for (double v : spec.values) ++remaining[v];
  for (double p : prefix) {
    auto it = remaining.find(p);
    if (it == remaining.end() || it->second == 0) {
      throw std::invalid_argument("exact_conditional_moment: prefix is not a sub-multiset of the values");
    }
    --it->second;
  }
  double acc = 0.0;
  for (const auto& [v, count] : remaining) acc += static_cast<double>(count) * (order == 1 ? v : v * v);
  return acc / static_cast<double>(spec.values.size() - prefix.size());
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json spec_to_json(const ExchangeableSpec& spec) {
  return std::visit(
      [](const auto& s) -> nlohmann::json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, MultisetPermutation>) {
          return {{"variant", "multiset_permutation"}, {"values", s.values}};
        } else if constexpr (std::is_same_v<T, IidFromDistribution>) {
          return {{"variant", "iid"}, {"dist", s.dist}, {"n", s.n}};
        } else if constexpr (std::is_same_v<T, MarkovChain>) {
          return {{"variant", "markov_chain"}, {"states", s.states}, {"initial", s.initial},
                  {"transition", s.transition}, {"n", s.n}};
        } else {
          return {{"variant", "conditionally_iid"}, {"mixing", s.mixing}, {"conditional", s.conditional},
                  {"mode", s.mode == ConditionallyIid::Mode::location ? "location" : "scale"}, {"n", s.n}};
        }
      },
      spec);
}

inline ExchangeableSpec spec_from_json(const nlohmann::json& j) {
  const auto variant = j.at("variant").get<std::string>();
  ExchangeableSpec spec;
  if (variant == "multiset_permutation") {
    spec = MultisetPermutation{j.at("values").get<std::vector<double>>()};
  } else if (variant == "iid") {
    spec = IidFromDistribution{j.at("dist").get<Distribution>(), j.at("n").get<std::size_t>()};
  } else if (variant == "markov_chain") {
    spec = MarkovChain{j.at("states").get<std::vector<double>>(), j.at("initial").get<std::vector<double>>(),
                       j.at("transition").get<std::vector<std::vector<double>>>(), j.at("n").get<std::size_t>()};
  } else if (variant == "conditionally_iid") {
    const auto mode = j.value("mode", std::string("location"));
    if (mode != "location" && mode != "scale") throw std::invalid_argument("conditionally_iid: bad mode '" + mode + "'");
    spec = ConditionallyIid{j.at("mixing").get<Distribution>(), j.at("conditional").get<Distribution>(),
                            mode == "location" ? ConditionallyIid::Mode::location : ConditionallyIid::Mode::scale,
                            j.at("n").get<std::size_t>()};
  } else {
    throw std::invalid_argument("spec: unknown variant '" + variant + "'");
  }
  validate(spec);
  return spec;
}

} // namespace lindeberg
