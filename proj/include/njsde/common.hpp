#pragma once
/**
 * @file common.hpp
 * @brief Shared error types, deterministic random number generation and
 *        small math helpers used across the library.
 */

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace njsde {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct OutOfRange : Error {
  using Error::Error;
};
struct ParseError : Error {
  std::size_t row = 0;
  ParseError(const std::string& msg, std::size_t row_)
      : Error(msg + " (row " + std::to_string(row_) + ")"), row(row_) {}
};
struct MissingColumn : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct EmptyTape : Error {
  using Error::Error;
};
struct BadSpec : Error {
  using Error::Error;
};
struct NegativeIntensity : Error {
  using Error::Error;
};
struct DegenerateProbabilities : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct Diverged : Error {
  std::size_t epoch = 0;
  Diverged(const std::string& msg, std::size_t epoch_)
      : Error(msg + " (epoch " + std::to_string(epoch_) + ")"), epoch(epoch_) {}
};
struct BadInput : Error {
  using Error::Error;
};
struct QuadratureFailed : Error {
  double achieved = std::numeric_limits<double>::quiet_NaN();
  QuadratureFailed(const std::string& msg, double achieved_)
      : Error(msg + " (achieved " + std::to_string(achieved_) + ")"),
        achieved(achieved_) {}
};
struct CalibrationFailed : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Random number generation
//
// All randomness in the library flows through Rng so that sequences are
// reproducible bit for bit from a seed, independent of the standard
// library's distribution implementations.
// ---------------------------------------------------------------------------

namespace detail {

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// followed by one Halley refinement; absolute error below 1e-15 on
/// (1e-300, 1-1e-16)).
inline double inverse_norm_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against erfc.
  double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  double u = e * std::sqrt(2.0 * kPi) * std::exp(x * x / 2.0);
  x = x - u / (1.0 + x * u / 2.0);
  return x;
}

} // namespace detail

/// Deterministic RNG: mt19937_64 stream with fixed transforms to uniform,
/// normal, Gumbel and exponential variates. One uniform is consumed per
/// variate so streams stay aligned across implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal.
  double normal() { return detail::inverse_norm_cdf(uniform()); }

  /// Standard Gumbel, g = -log(-log(U)).
  double gumbel() { return -std::log(-std::log(uniform())); }

  /// Exponential with the given mean.
  double exponential(double mean) { return -mean * std::log(uniform()); }

  std::uint64_t next_u64() { return gen_(); }

private:
  std::mt19937_64 gen_;
};

/// Mix two integers into a child seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Math helpers
// ---------------------------------------------------------------------------

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

/// Numerically stable softplus, strictly positive for all finite x.
inline double softplus(double x) {
  double v = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return v > 0.0 ? v : std::numeric_limits<double>::denorm_min();
}

/// Derivative of softplus.
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Number of worker threads: JUMPCAL_THREADS if set, else hardware
/// concurrency, floored at 1.
inline unsigned thread_budget() {
  if (const char* env = std::getenv("JUMPCAL_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc >= 1 ? hc : 1u;
}

/// Runs fn(i) for i in [0, n). Work items must write only to their own
/// slots; results are then independent of the thread count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  unsigned threads = thread_budget();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::atomic<std::size_t> next{0};
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace njsde
