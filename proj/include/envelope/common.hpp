#pragma once

// Shared infrastructure: typed errors, deterministic RNG, reproducible
// reductions, normal quantiles and the worker-count cap.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace envelope {

enum class ErrorCode {
  config_error,
  io_error,
  empty_sample,
  out_of_support,
  bad_fold_count,
  empty_cell,
  zero_kernel_mass,
  grid_mismatch,
  missing_nuisance,
  non_finite_score,
  bad_level,
  degenerate_denominator,
  overlap_violation,
  no_saddle,
  bad_grid,
  unsupported_application,
  internal,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error: return "ConfigError";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::empty_sample: return "EmptySample";
    case ErrorCode::out_of_support: return "OutOfSupportCode";
    case ErrorCode::bad_fold_count: return "BadFoldCount";
    case ErrorCode::empty_cell: return "EmptyCell";
    case ErrorCode::zero_kernel_mass: return "ZeroKernelMass";
    case ErrorCode::grid_mismatch: return "GridMismatch";
    case ErrorCode::missing_nuisance: return "MissingNuisance";
    case ErrorCode::non_finite_score: return "NonFiniteScore";
    case ErrorCode::bad_level: return "BadLevel";
    case ErrorCode::degenerate_denominator: return "DegenerateDenominator";
    case ErrorCode::overlap_violation: return "OverlapViolation";
    case ErrorCode::no_saddle: return "NoSaddle";
    case ErrorCode::bad_grid: return "BadGrid";
    case ErrorCode::unsupported_application: return "UnsupportedApplication";
    case ErrorCode::internal: return "InternalError";
  }
  return "UnknownError";
}

// Stable process exit code per error class (documented in the CLI --help).
inline int error_exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error: return 2;
    case ErrorCode::io_error: return 3;
    case ErrorCode::empty_sample: return 10;
    case ErrorCode::out_of_support: return 11;
    case ErrorCode::bad_fold_count: return 12;
    case ErrorCode::empty_cell: return 13;
    case ErrorCode::zero_kernel_mass: return 14;
    case ErrorCode::grid_mismatch: return 15;
    case ErrorCode::missing_nuisance: return 16;
    case ErrorCode::non_finite_score: return 17;
    case ErrorCode::bad_level: return 18;
    case ErrorCode::degenerate_denominator: return 19;
    case ErrorCode::overlap_violation: return 20;
    case ErrorCode::no_saddle: return 21;
    case ErrorCode::bad_grid: return 22;
    case ErrorCode::unsupported_application: return 23;
    case ErrorCode::internal: return 70;
  }
  return 70;
}

class EnvelopeError : public std::runtime_error {
 public:
  EnvelopeError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw EnvelopeError(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Reductions. Pairwise summation gives a fixed association order, so sums do
// not depend on how work was split across threads.

inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
  return v.empty() ? kNaN : pairwise_sum(v) / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 is bit-specified by the standard; the
// variate mappings below avoid the implementation-defined <random>
// distributions so streams are identical across toolchains.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (seed, stream); used for per-rep seeding.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Uniform on {0,...,bound-1} by rejection; exact for any bound.
  std::size_t uniform_index(std::size_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t n = static_cast<std::uint64_t>(bound);
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return static_cast<std::size_t>(draw % n);
  }

  double uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

// Seeded Fisher-Yates permutation of {0,...,n-1}.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

// ---------------------------------------------------------------------------
// Normal quantile, Wichura's AS 241 (PPND16). Accurate to ~1e-16 on (0,1).

inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorCode::bad_level,
          "normal quantile requires p in (0,1), got " + std::to_string(p));
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

// Two-sided critical value for a confidence level in (0,1).
inline double two_sided_z(double level) {
  require(level > 0.0 && level < 1.0, ErrorCode::bad_level,
          "confidence level must lie in (0,1), got " + std::to_string(level));
  return normal_quantile(0.5 + 0.5 * level);
}

// ---------------------------------------------------------------------------
// Worker cap. ENVELOPE_THREADS limits the pool; results never depend on the
// chosen count because every parallel site writes disjoint slots and reduces
// with pairwise_sum.

inline std::atomic<unsigned>& worker_cap_override() {
  static std::atomic<unsigned> cap{0};
  return cap;
}

inline void set_worker_cap(unsigned n) { worker_cap_override().store(n); }

inline unsigned effective_workers(std::size_t n) {
  unsigned cap = worker_cap_override().load();
  if (cap == 0) {
    if (const char* env = std::getenv("ENVELOPE_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) cap = static_cast<unsigned>(v);
    }
  }
  if (cap == 0) cap = std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(
      std::min<std::size_t>(cap, std::max<std::size_t>(n, 1)));
}

// Runs body(lo, hi) over a partition of [0, n). Exceptions thrown by chunks
// are rethrown in the caller (lowest chunk first).
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t grain = 1024) {
  const unsigned workers = effective_workers(n);
  if (workers <= 1 || n <= grain) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = static_cast<std::size_t>(w) * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi, w] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace envelope
