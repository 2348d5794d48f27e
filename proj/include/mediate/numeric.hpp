#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace mediate {

/// Neumaier's variant of Kahan summation. Order-dependent, so callers that
/// need reproducibility must feed values in a fixed order.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.comp_);
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <std::size_t N>
struct CompensatedArray {
  std::array<CompensatedSum, N> terms{};

  void add(std::size_t i, double x) noexcept { terms[i].add(x); }
  void merge(const CompensatedArray& other) noexcept {
    for (std::size_t i = 0; i < N; ++i) terms[i].merge(other.terms[i]);
  }
  double operator[](std::size_t i) const noexcept { return terms[i].value(); }
};

namespace detail {
inline std::atomic<unsigned>& thread_override() {
  static std::atomic<unsigned> value{0};
  return value;
}
}  // namespace detail

/// Worker count for parallel reductions. Resolution order: set_thread_count(),
/// the MEDIATE_THREADS environment variable, then hardware concurrency.
inline unsigned thread_count() {
  if (const unsigned forced = detail::thread_override().load(); forced > 0) return forced;
  if (const char* env = std::getenv("MEDIATE_THREADS"); env != nullptr) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// 0 restores the default resolution.
inline void set_thread_count(unsigned n) { detail::thread_override().store(n); }

/// Rows per reduction chunk. Fixed so that partial sums, and therefore the
/// combined result, do not depend on the number of workers.
inline constexpr std::size_t kChunkRows = 1u << 15;

/// Maps `fn(begin, end)` over fixed-size chunks of [0, n) and returns the
/// per-chunk results in chunk order.
template <class Fn>
auto map_chunks(std::size_t n, Fn&& fn, std::size_t chunk = kChunkRows) {
  using Partial = decltype(fn(std::size_t{0}, std::size_t{0}));
  const std::size_t n_chunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<Partial> partials(n_chunks);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(thread_count(), std::max<std::size_t>(n_chunks, 1)));

  auto run = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    partials[c] = fn(begin, std::min(n, begin + chunk));
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run(c);
    return partials;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) run(c);
      } catch (...) {
        failures[w] = std::current_exception();
        next.store(n_chunks);
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return partials;
}

/// Chunked map followed by an in-order merge of the partials.
template <class Partial, class Fn>
Partial reduce_chunks(std::size_t n, Fn&& fn, std::size_t chunk = kChunkRows) {
  auto partials = map_chunks(n, std::forward<Fn>(fn), chunk);
  Partial total{};
  for (const auto& p : partials) total.merge(p);
  return total;
}

}  // namespace mediate
