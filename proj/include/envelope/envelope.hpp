#pragma once

// The envelope score estimator: plug-in argmin/argmax classification per
// covariate cell, cross-fitted envelope scores, the closed-form plug-in
// variance and normal confidence intervals, plus the oracle-comparison mode
// and the runner-up margin diagnostic.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "envelope/common.hpp"
#include "envelope/data.hpp"
#include "envelope/first_stage.hpp"

namespace envelope {

enum class Direction { minimize, maximize };

// Chosen index per covariate cell plus the runner-up gap (the margin between
// the optimum and the best label outside the arg-optimum set; +inf when every
// label attains the optimum).
struct ClassifierMap {
  std::vector<std::size_t> chosen;
  std::vector<double> runner_up_gap;
};

// Arg-optimum per cell with ties broken by declared label order.
inline ClassifierMap classify(const RegressionSurface& surface,
                              Direction direction) {
  const std::size_t num_labels = surface.labels.size();
  ClassifierMap map;
  map.chosen.resize(surface.num_cells);
  map.runner_up_gap.resize(surface.num_cells);
  for (std::size_t x = 0; x < surface.num_cells; ++x) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < num_labels; ++t) {
      const double v = surface.at(t, x);
      const double b = surface.at(best, x);
      if (direction == Direction::minimize ? v < b : v > b) best = t;
    }
    const double best_value = surface.at(best, x);
    double gap = kInf;
    for (std::size_t t = 0; t < num_labels; ++t) {
      const double v = surface.at(t, x);
      if (v == best_value) continue;  // arg-optimum members are excluded
      gap = std::min(gap, std::abs(v - best_value));
    }
    map.chosen[x] = best;
    map.runner_up_gap[x] = gap;
  }
  return map;
}

// A family of unbiased signals g_t(W; nu) with E[g_t | X=x] = s(t,x). Both
// callbacks receive the fold whose complement trained the nuisance.
struct ScoreFamily {
  FiniteIndexSet labels;
  std::function<double(std::size_t t, std::size_t x, int fold)> surface;
  std::function<double(std::size_t t, const Observation& w, int fold)> signal;
};

struct EnvelopeEstimate {
  double psi_hat = 0.0;
  double variance_hat = 0.0;  // plug-in: mean(g^2) - psi_hat^2
  double se = 0.0;            // sqrt(variance_hat / n)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  std::size_t n = 0;
  int num_folds = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_fold_means;
};

namespace detail {

inline std::vector<RegressionSurface> materialize_surfaces(
    const Sample& sample, const FoldAssignment& folds,
    const ScoreFamily& family) {
  const std::size_t num_cells = static_cast<std::size_t>(sample.schema.num_cells);
  std::vector<RegressionSurface> out;
  out.reserve(static_cast<std::size_t>(folds.num_folds));
  for (int k = 0; k < folds.num_folds; ++k) {
    RegressionSurface surface(family.labels, num_cells);
    for (std::size_t t = 0; t < family.labels.size(); ++t) {
      for (std::size_t x = 0; x < num_cells; ++x) {
        const double v = family.surface(t, x, k);
        require(std::isfinite(v), ErrorCode::missing_nuisance,
                "fitted surface is not finite at label " + family.labels.name(t) +
                    ", cell " + std::to_string(x) + ", fold " + std::to_string(k));
        surface.at(t, x) = v;
      }
    }
    out.push_back(std::move(surface));
  }
  return out;
}

inline std::vector<double> fold_means(std::span<const double> scores,
                                      const FoldAssignment& folds) {
  std::vector<std::vector<double>> buckets(
      static_cast<std::size_t>(folds.num_folds));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    buckets[static_cast<std::size_t>(folds.fold_of[i])].push_back(scores[i]);
  }
  std::vector<double> means(buckets.size());
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    means[k] = pairwise_mean(buckets[k]);
  }
  return means;
}

}  // namespace detail

// Per-observation envelope scores g(W_i, eta_hat_i): each observation is
// classified with its own fold's surface and scored with that fold's signals.
inline std::vector<double> envelope_scores(const Sample& sample,
                                           const FoldAssignment& folds,
                                           const ScoreFamily& family,
                                           Direction direction) {
  require(folds.size() == sample.size(), ErrorCode::missing_nuisance,
          "fold assignment does not match the sample");
  const auto surfaces = detail::materialize_surfaces(sample, folds, family);
  std::vector<ClassifierMap> classifiers;
  classifiers.reserve(surfaces.size());
  for (const auto& s : surfaces) classifiers.push_back(classify(s, direction));

  std::vector<double> scores(sample.size());
  parallel_for(sample.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Observation& w = sample.rows[i];
      const int k = folds.fold_of[i];
      const std::size_t chosen =
          classifiers[static_cast<std::size_t>(k)].chosen[static_cast<std::size_t>(w.x)];
      scores[i] = family.signal(chosen, w, k);
    }
  });
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorCode::non_finite_score,
            "envelope score is not finite at row " + std::to_string(i));
  }
  return scores;
}

// Mean, plug-in variance and normal CI for a vector of realized scores.
inline EnvelopeEstimate summarize_scores(std::span<const double> scores,
                                         const FoldAssignment& folds,
                                         double level) {
  const double z = two_sided_z(level);
  const std::size_t n = scores.size();
  std::vector<double> squares(n);
  for (std::size_t i = 0; i < n; ++i) squares[i] = scores[i] * scores[i];
  EnvelopeEstimate est;
  est.psi_hat = pairwise_mean(scores);
  est.variance_hat =
      std::max(0.0, pairwise_mean(squares) - est.psi_hat * est.psi_hat);
  est.se = std::sqrt(est.variance_hat / static_cast<double>(n));
  est.ci_lo = est.psi_hat - z * est.se;
  est.ci_hi = est.psi_hat + z * est.se;
  est.level = level;
  est.n = n;
  est.num_folds = folds.num_folds;
  est.seed = folds.seed;
  est.per_fold_means = detail::fold_means(scores, folds);
  return est;
}

inline EnvelopeEstimate estimate(const Sample& sample,
                                 const FoldAssignment& folds,
                                 const ScoreFamily& family, Direction direction,
                                 double level) {
  const auto scores = envelope_scores(sample, folds, family, direction);
  return summarize_scores(scores, folds, level);
}

struct OracleComparison {
  EnvelopeEstimate feasible;
  EnvelopeEstimate oracle;
  double root_n_gap = 0.0;  // sqrt(N) * (psi_hat(eta_hat) - psi_hat(eta_0))
};

inline OracleComparison estimate_with_oracle(const Sample& sample,
                                             const FoldAssignment& folds,
                                             const ScoreFamily& feasible,
                                             const ScoreFamily& oracle,
                                             Direction direction,
                                             double level) {
  OracleComparison out;
  out.feasible = estimate(sample, folds, feasible, direction, level);
  out.oracle = estimate(sample, folds, oracle, direction, level);
  out.root_n_gap = std::sqrt(static_cast<double>(sample.size())) *
                   (out.feasible.psi_hat - out.oracle.psi_hat);
  return out;
}

// ---------------------------------------------------------------------------
// Ratio targets (Lee bounds): psi = E[a] / E[b] with a delta-method standard
// error built from the joint plug-in covariance of the two score vectors.

inline EnvelopeEstimate ratio_estimate(std::span<const double> numerator_scores,
                                       std::span<const double> denominator_scores,
                                       const FoldAssignment& folds, double level,
                                       double denominator_floor) {
  const std::size_t n = numerator_scores.size();
  require(n == denominator_scores.size(), ErrorCode::internal,
          "ratio scores have mismatched lengths");
  const double num = pairwise_mean(numerator_scores);
  const double den = pairwise_mean(denominator_scores);
  require(den >= denominator_floor, ErrorCode::degenerate_denominator,
          "estimated denominator " + std::to_string(den) +
              " is below the floor " + std::to_string(denominator_floor));
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = numerator_scores[i] * numerator_scores[i];
    bb[i] = denominator_scores[i] * denominator_scores[i];
    ab[i] = numerator_scores[i] * denominator_scores[i];
  }
  const double var_a = std::max(0.0, pairwise_mean(aa) - num * num);
  const double var_b = std::max(0.0, pairwise_mean(bb) - den * den);
  const double cov_ab = pairwise_mean(ab) - num * den;
  const double ratio = num / den;
  const double gradient_variance =
      (var_a - 2.0 * ratio * cov_ab + ratio * ratio * var_b) / (den * den);

  const double z = two_sided_z(level);
  EnvelopeEstimate est;
  est.psi_hat = ratio;
  est.variance_hat = std::max(0.0, gradient_variance);
  est.se = std::sqrt(est.variance_hat / static_cast<double>(n));
  est.ci_lo = ratio - z * est.se;
  est.ci_hi = ratio + z * est.se;
  est.level = level;
  est.n = n;
  est.num_folds = folds.num_folds;
  est.seed = folds.seed;
  const auto num_means = detail::fold_means(numerator_scores, folds);
  const auto den_means = detail::fold_means(denominator_scores, folds);
  est.per_fold_means.resize(num_means.size());
  for (std::size_t k = 0; k < num_means.size(); ++k) {
    est.per_fold_means[k] = num_means[k] / den_means[k];
  }
  return est;
}

// ---------------------------------------------------------------------------
// Margin diagnostic: the distribution over cells of the runner-up gap,
// weighted by the covariate marginal.

struct MarginHistogram {
  std::vector<double> gaps;     // per cell; +inf when there is no runner-up
  std::vector<double> weights;  // covariate marginal, sums to one

  double mass_below(double threshold) const {
    double mass = 0.0;
    for (std::size_t x = 0; x < gaps.size(); ++x) {
      if (gaps[x] <= threshold) mass += weights[x];
    }
    return mass;
  }

  bool empty() const {
    for (double g : gaps) {
      if (std::isfinite(g)) return false;
    }
    return true;
  }
};

inline MarginHistogram margin_histogram(const RegressionSurface& surface,
                                        const std::vector<double>& weights,
                                        Direction direction = Direction::minimize) {
  require(weights.size() == surface.num_cells, ErrorCode::grid_mismatch,
          "weight vector does not match the surface cells");
  const ClassifierMap map = classify(surface, direction);
  MarginHistogram hist;
  hist.gaps = map.runner_up_gap;
  hist.weights = weights;
  return hist;
}

// Thresholds reported alongside the histogram for margin checks.
inline const std::vector<double>& margin_thresholds() {
  static const std::vector<double> thresholds{0.01, 0.05, 0.1};
  return thresholds;
}

}  // namespace envelope
