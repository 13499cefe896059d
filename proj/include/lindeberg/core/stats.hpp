#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace lindeberg {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// Welford mean/variance accumulator. `merge` combines two disjoint batches;
/// merging batches in a fixed order gives a result independent of how the
/// batches were scheduled.
class RunningStats {
public:
  void push(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    count_ += other.count_;
  }

  std::uint64_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  double stddev() const noexcept { return std::sqrt(variance()); }
  double standard_error() const noexcept {
    return count_ > 0 ? stddev() / std::sqrt(static_cast<double>(count_)) : 0.0;
  }

private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Thread count from LINDEBERG_THREADS, else 1.
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("LINDEBERG_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

inline constexpr std::size_t kReplicateBlock = 1024;

/// Runs `fn(block, begin, end)` over fixed-size blocks of [0, total) and
/// returns the per-block results in block order. Block boundaries depend only
/// on `total`, so results do not depend on `threads`.
template <class Fn>
auto for_each_block(std::size_t total, unsigned threads, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}, std::size_t{}, std::size_t{}));
  const std::size_t blocks = (total + kReplicateBlock - 1) / kReplicateBlock;
  std::vector<Result> out(blocks);
  auto run_block = [&](std::size_t b) {
    const std::size_t begin = b * kReplicateBlock;
    const std::size_t end = std::min(total, begin + kReplicateBlock);
    out[b] = fn(b, begin, end);
  };
  threads = std::max(1u, threads);
  if (threads == 1 || blocks <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return out;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

} // namespace lindeberg
