#pragma once

// Conditional value-at-risk primitives for discrete distributions:
// generalized (left-inverse) quantiles, truncated-CDF CVaR, and the
// Rockafellar-Uryasev dual restricted to the support.
//
// For alpha in (0,1], the upper CVaR is the mean of the upper alpha-tail:
// the atom at Q(1-alpha) keeps mass (F(Q(1-alpha)) - (1-alpha))/alpha and
// atoms above keep mass/alpha. The dual form is
//   inf_beta  beta + E[max(Y-beta,0)]/alpha,
// a convex piecewise-linear objective whose minimum sits at a support kink,
// so searching the support is exact. The lower CVaR mirrors both forms.

#include <cmath>
#include <string>
#include <vector>

#include "envelope/data.hpp"

namespace envelope {

struct CvarResult {
  double value = 0.0;
  double minimizer_beta = 0.0;  // support point attaining the dual inf/sup
  double alpha = 0.0;
};

namespace detail {

inline void check_cvar_level(double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::bad_level,
          "trimming proportion must lie in (0,1], got " + std::to_string(alpha));
}

// Quantile extended to u <= 0 as the smallest support point; used where a
// trimming proportion of exactly one makes the level degenerate.
inline double quantile_or_min(const DiscreteDistribution& dist, double u) {
  if (u <= 0.0) return dist.min();
  double cum = 0.0;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    cum += dist.probs[i];
    if (cum >= u) return dist.support[i];
  }
  return dist.max();
}

}  // namespace detail

// Left-inverse quantile: smallest support point with F(beta) >= u.
inline double generalized_quantile(const DiscreteDistribution& dist, double u) {
  require(u > 0.0 && u <= 1.0, ErrorCode::bad_level,
          "quantile level must lie in (0,1], got " + std::to_string(u));
  return detail::quantile_or_min(dist, u);
}

// Mean of the upper-truncated law.
inline CvarResult cvar_upper_direct(const DiscreteDistribution& dist,
                                    double alpha) {
  detail::check_cvar_level(alpha);
  const double q = detail::quantile_or_min(dist, 1.0 - alpha);
  double value = q * (dist.cdf(q) - (1.0 - alpha)) / alpha;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    if (dist.support[i] > q) value += dist.support[i] * dist.probs[i] / alpha;
  }
  return {value, q, alpha};
}

// Mean of the lower-truncated law.
inline CvarResult cvar_lower_direct(const DiscreteDistribution& dist,
                                    double alpha) {
  detail::check_cvar_level(alpha);
  const double q = detail::quantile_or_min(dist, alpha);
  double value = q * (alpha - dist.cdf_left(q)) / alpha;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    if (dist.support[i] < q) value += dist.support[i] * dist.probs[i] / alpha;
  }
  return {value, q, alpha};
}

namespace detail {

inline double upper_dual_objective(const DiscreteDistribution& dist,
                                   double beta, double alpha) {
  double tail = 0.0;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    if (dist.support[i] > beta)
      tail += (dist.support[i] - beta) * dist.probs[i];
  }
  return beta + tail / alpha;
}

inline double lower_dual_objective(const DiscreteDistribution& dist,
                                   double beta, double alpha) {
  double tail = 0.0;
  for (std::size_t i = 0; i < dist.support.size(); ++i) {
    if (dist.support[i] < beta)
      tail += (dist.support[i] - beta) * dist.probs[i];
  }
  return beta + tail / alpha;
}

}  // namespace detail

// Dual form, minimized over the support. Flat segments are resolved to the
// smallest beta, which matches the left-inverse quantile convention; the
// minimizer therefore equals Q(1-alpha) (min support point when alpha = 1).
inline CvarResult cvar_upper_dual(const DiscreteDistribution& dist,
                                  double alpha) {
  detail::check_cvar_level(alpha);
  double best = detail::upper_dual_objective(dist, dist.support[0], alpha);
  double best_beta = dist.support[0];
  for (std::size_t i = 1; i < dist.support.size(); ++i) {
    const double value =
        detail::upper_dual_objective(dist, dist.support[i], alpha);
    const double tie = 1e-12 * std::max(1.0, std::abs(best));
    if (value < best - tie) {
      best = value;
      best_beta = dist.support[i];
    }
  }
  return {best, best_beta, alpha};
}

// Dual form of the lower CVaR: sup over the support of
// beta + E[min(Y-beta,0)]/alpha; ties resolve to the smallest beta = Q(alpha).
inline CvarResult cvar_lower_dual(const DiscreteDistribution& dist,
                                  double alpha) {
  detail::check_cvar_level(alpha);
  double best = detail::lower_dual_objective(dist, dist.support[0], alpha);
  double best_beta = dist.support[0];
  for (std::size_t i = 1; i < dist.support.size(); ++i) {
    const double value =
        detail::lower_dual_objective(dist, dist.support[i], alpha);
    const double tie = 1e-12 * std::max(1.0, std::abs(best));
    if (value > best + tie) {
      best = value;
      best_beta = dist.support[i];
    }
  }
  return {best, best_beta, alpha};
}

}  // namespace envelope
