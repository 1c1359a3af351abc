// Shared vocabulary for the coopembed library: vector aliases, the
// coordinate sum S(u), error types, a counter-based RNG and a small
// deterministic parallel-for.

#ifndef COOPEMBED_CORE_HPP
#define COOPEMBED_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace coopembed {

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
using Mat = Eigen::Matrix<double, Dim, Dim>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;
using VecX = Vec<Eigen::Dynamic>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHalfPi = kPi / 2.0;

/// Input outside the mathematical domain of an operation (non-finite
/// values, off-hyperplane points passed to unlift, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or out-of-range configuration constants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A construction step (root bracketing, J/Q selection) could not be
/// completed with the requested guarantees.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coordinate sum u_1 + ... + u_n.
template <class Derived>
double coord_sum(const Eigen::MatrixBase<Derived>& u) {
  return u.sum();
}

/// Diagonal vector (1,...,1) of the given runtime size.
template <int Dim>
Vec<Dim> ones(int n) {
  return Vec<Dim>::Ones(n);
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& u) {
  return u.allFinite();
}

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite input");
}

// SplitMix64 applied to (seed, stream, counter): every draw is a pure
// function of its index, so sampling is reproducible regardless of how
// work is split among threads.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)))) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + 0x9E3779B97F4A7C15ULL * counter); }

  /// Uniform on [0,1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Sequential convenience wrapper.
  double next(double lo = 0.0, double hi = 1.0) { return uniform(counter_++, lo, hi); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Number of worker threads used by batch operations; 0 means "hardware".
inline unsigned& default_jobs() {
  static unsigned jobs = 0;
  return jobs;
}

inline unsigned resolve_jobs(unsigned jobs) {
  if (jobs == 0) jobs = default_jobs();
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return jobs;
}

/// Runs body(i) for i in [0, count). Work is split into contiguous
/// blocks; results must be written by index so the outcome does not
/// depend on the number of workers.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                         unsigned jobs = 0) {
  jobs = resolve_jobs(jobs);
  if (jobs <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  std::vector<std::exception_ptr> errors(jobs);
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        const std::size_t lo = count * w / jobs;
        const std::size_t hi = count * (w + 1) / jobs;
        try {
          for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Splits [0, count) into `blocks` contiguous ranges and runs
/// body(lo, hi, block) for each, possibly concurrently.
inline void parallel_blocks(std::size_t count, std::size_t blocks,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                            unsigned jobs = 0) {
  blocks = std::max<std::size_t>(1, std::min(blocks, count));
  parallel_for(
      blocks, [&](std::size_t b) { body(count * b / blocks, count * (b + 1) / blocks, b); }, jobs);
}

/// Minimum with the location where it was attained. Ties resolve to the
/// lowest index so reductions are independent of partitioning.
template <class Point>
struct ArgMin {
  double value = std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();
  Point where{};

  void offer(double v, std::size_t i, const Point& p) {
    if (v < value || (v == value && i < index)) {
      value = v;
      index = i;
      where = p;
    }
  }
  void merge(const ArgMin& o) {
    if (o.index != std::numeric_limits<std::size_t>::max()) offer(o.value, o.index, o.where);
  }
};

}  // namespace coopembed

#endif  // COOPEMBED_CORE_HPP
