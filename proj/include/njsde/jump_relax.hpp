#pragma once
/**
 * @file jump_relax.hpp
 * @brief Truncated-Poisson jump counts and their Gumbel-Softmax relaxation.
 *
 * The jump count per step follows a Poisson distribution truncated to
 * {0..n} and renormalized. Sampling is expressed through the Gumbel-Max
 * trick; the softmax relaxation with temperature tau makes the count
 * differentiable in the intensity. Functions are templated on the scalar
 * type: double for plain evaluation, ad::Var for taped gradients.
 */

#include <cmath>
#include <cstdint>
#include <vector>

#include "njsde/common.hpp"
#include "njsde/tape.hpp"

namespace njsde::jump {

/// Probabilities below this floor enter logs as log(kProbFloor) so that a
/// vanishing intensity degrades gracefully instead of producing -inf.
inline constexpr double kProbFloor = 1e-30;

struct RelaxConfig {
  int n = 3;                 // max jumps per step
  double tau = 1.0;          // current temperature
  double tau_start = 1.0;
  double tau_end = 0.1;      // geometric decay target
  bool hard_mode = false;    // straight-through argmax

  void validate() const {
    if (n < 1) throw BadSpec("jump truncation n must be >= 1");
    if (!(tau > 0.0)) throw BadSpec("temperature must be positive");
    if (!(tau_start > 0.0) || !(tau_end > 0.0))
      throw BadSpec("temperature schedule must be positive");
    if (tau_end > tau_start)
      throw BadSpec("tau_end must not exceed tau_start");
  }

  /// Geometric interpolation from tau_start to tau_end over `total` epochs.
  double tau_at(std::size_t epoch, std::size_t total) const {
    if (total <= 1) return tau_start;
    double frac = static_cast<double>(epoch) / static_cast<double>(total - 1);
    return tau_start * std::pow(tau_end / tau_start, frac);
  }
};

struct GumbelDraw {
  std::vector<double> g; // n+1 standard Gumbel samples

  static GumbelDraw sample(Rng& rng, int n) {
    GumbelDraw d;
    d.g.resize(static_cast<std::size_t>(n) + 1);
    for (auto& x : d.g) x = rng.gumbel();
    return d;
  }
};

/// pi_i proportional to (lambda*dt)^i / i!, i = 0..n, normalized over the
/// truncated support. The e^{-lambda*dt} factor cancels.
template <class T>
std::vector<T> truncated_poisson(const T& intensity, double dt, int n) {
  if (ad::value_of(intensity) < 0.0)
    throw NegativeIntensity("jump intensity must be nonnegative");
  if (!(dt > 0.0)) throw BadInput("dt must be positive");
  if (!std::isfinite(ad::value_of(intensity) * dt))
    throw BadInput("intensity*dt must be finite");
  if (n < 1) throw BadSpec("jump truncation n must be >= 1");

  const T x = intensity * dt;
  std::vector<T> terms;
  terms.reserve(static_cast<std::size_t>(n) + 1);
  terms.push_back(T(1.0));
  for (int i = 1; i <= n; ++i)
    terms.push_back(terms.back() * x * (1.0 / static_cast<double>(i)));
  T sum = terms[0];
  for (int i = 1; i <= n; ++i) sum = sum + terms[static_cast<std::size_t>(i)];
  std::vector<T> pi;
  pi.reserve(terms.size());
  for (auto& t : terms) pi.push_back(t / sum);
  return pi;
}

namespace detail {
template <class T>
void check_probabilities(const std::vector<T>& pi) {
  if (pi.empty()) throw DegenerateProbabilities("empty probability vector");
  double total = 0.0;
  for (const auto& p : pi) {
    double v = ad::value_of(p);
    if (!std::isfinite(v) || v < 0.0)
      throw DegenerateProbabilities("probabilities must be finite and >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw DegenerateProbabilities("probabilities sum to zero");
}
} // namespace detail

/// Gumbel-Max draw: argmax_i (g_i + log pi_i). Ties break to the lowest
/// index; zero-mass entries are clamped at kProbFloor before the log.
inline int gumbel_max(const std::vector<double>& pi, const GumbelDraw& draw) {
  detail::check_probabilities(pi);
  if (draw.g.size() != pi.size())
    throw ShapeMismatch("Gumbel draw size must match probability vector");
  int best = 0;
  double best_score = draw.g[0] + std::log(std::max(pi[0], kProbFloor));
  for (std::size_t i = 1; i < pi.size(); ++i) {
    double s = draw.g[i] + std::log(std::max(pi[i], kProbFloor));
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Softmax relaxation of the Gumbel-Max draw at temperature tau. Entries
/// are shifted by their maximum before exponentiation; the shift cancels
/// exactly in value and gradient.
template <class T>
std::vector<T> gumbel_softmax(const std::vector<T>& pi, const GumbelDraw& draw,
                              double tau) {
  detail::check_probabilities(pi);
  if (draw.g.size() != pi.size())
    throw ShapeMismatch("Gumbel draw size must match probability vector");
  if (!(tau > 0.0)) throw BadInput("temperature must be positive");

  std::vector<T> score;
  score.reserve(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i)
    score.push_back(ad::vlog(ad::vmax(pi[i], kProbFloor)) + draw.g[i]);
  T m = score[0];
  for (std::size_t i = 1; i < score.size(); ++i) m = ad::vmax2(m, score[i]);
  std::vector<T> e;
  e.reserve(score.size());
  for (auto& s : score) e.push_back(ad::vexp((s - m) * (1.0 / tau)));
  T den = e[0];
  for (std::size_t i = 1; i < e.size(); ++i) den = den + e[i];
  std::vector<T> y;
  y.reserve(e.size());
  for (auto& x : e) y.push_back(x / den);
  return y;
}

/// Scalar jump count from the relaxed vector: the expected count
/// sum_i i*y_i in soft mode, or the argmax index with the soft gradient in
/// hard (straight-through) mode.
template <class T>
T relaxed_jump_count(const std::vector<T>& y, bool hard_mode = false) {
  if (y.empty()) throw DegenerateProbabilities("empty relaxed vector");
  T soft = T(0.0);
  for (std::size_t i = 1; i < y.size(); ++i)
    soft = soft + y[i] * static_cast<double>(i);
  if (!hard_mode) return soft;
  std::size_t z = 0;
  double best = ad::value_of(y[0]);
  for (std::size_t i = 1; i < y.size(); ++i) {
    double v = ad::value_of(y[i]);
    if (v > best) {
      best = v;
      z = i;
    }
  }
  return ad::st_through(soft, static_cast<double>(z));
}

} // namespace njsde::jump
