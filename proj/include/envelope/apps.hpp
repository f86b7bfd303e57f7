#pragma once

// Application layers: each one assembles an index set, a family of unbiased
// signals and the fitted nuisances for one bound, then delegates to the
// envelope (or saddle) estimator.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "envelope/cvar.hpp"
#include "envelope/data.hpp"
#include "envelope/envelope.hpp"
#include "envelope/first_stage.hpp"
#include "envelope/saddle.hpp"

namespace envelope {
namespace detail {

inline void check_surface(const CrossFitSurface& surface,
                          const FoldAssignment& folds, std::size_t num_cells,
                          const char* what) {
  require(surface.per_fold.size() == static_cast<std::size_t>(folds.num_folds),
          ErrorCode::missing_nuisance,
          std::string(what) + ": fold count mismatch");
  for (const auto& s : surface.per_fold) {
    require(s.num_cells == num_cells, ErrorCode::missing_nuisance,
            std::string(what) + ": cell count mismatch");
  }
}

inline void check_cdf(const CrossFitCdf& cdf, const FoldAssignment& folds,
                      std::size_t num_cells, const char* what) {
  require(cdf.per_fold.size() == static_cast<std::size_t>(folds.num_folds),
          ErrorCode::missing_nuisance,
          std::string(what) + ": fold count mismatch");
  for (const auto& cells : cdf.per_fold) {
    require(cells.size() == num_cells, ErrorCode::missing_nuisance,
            std::string(what) + ": cell count mismatch");
  }
}

inline void require_fully_observed(const Sample& sample, const char* what) {
  for (std::size_t i = 0; i < sample.size(); ++i) {
    require(sample.rows[i].s == 1, ErrorCode::out_of_support,
            std::string(what) + ": row " + std::to_string(i) +
                " has s=0; outcomes must be observed for every row");
  }
}

}  // namespace detail

// ===========================================================================
// Frechet-Hoeffding bounds on the always-takers' share.

struct FrechetNuisance {
  CrossFitSurface s;    // labels (1, 0): P(S=1 | D=t, X=x)
  CrossFitSurface mu1;  // single label: P(D=1 | X=x)
};

inline FrechetNuisance fit_frechet_nuisance(const Sample& sample,
                                            const FoldAssignment& folds) {
  CellFitOptions prob;
  prob.clip01 = true;
  FrechetNuisance nuisance;
  nuisance.s = cell_mean_fit(
      sample, folds, FiniteIndexSet::from_codes({1, 0}),
      [](std::size_t t, const Observation& w) { return w.d == (t == 0 ? 1 : 0); },
      [](std::size_t, const Observation& w) { return static_cast<double>(w.s); },
      prob);
  nuisance.mu1 = fit_propensity(sample, folds);
  return nuisance;
}

struct FrechetBounds {
  EnvelopeEstimate lower;
  EnvelopeEstimate upper;
};

inline FrechetBounds frechet_bounds(const Sample& sample,
                                    const FoldAssignment& folds,
                                    const FrechetNuisance& nuisance,
                                    double level) {
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_surface(nuisance.s, folds, cells, "frechet s(t,x)");
  detail::check_surface(nuisance.mu1, folds, cells, "frechet propensity");

  // AIPW signal for s(t, x); label 0 is the treated arm.
  const auto aipw = [&](std::size_t t, const Observation& w, int k) {
    const double mu = nuisance.mu1.at(k, 0, static_cast<std::size_t>(w.x));
    const double mu_t = (t == 0) ? mu : 1.0 - mu;
    const int arm = (t == 0) ? 1 : 0;
    const double fitted = nuisance.s.at(k, t, static_cast<std::size_t>(w.x));
    const double indicator = (w.d == arm) ? 1.0 : 0.0;
    return indicator / mu_t * (static_cast<double>(w.s) - fitted) + fitted;
  };

  ScoreFamily upper_family;
  upper_family.labels = FiniteIndexSet::from_codes({1, 0});
  upper_family.surface = [&](std::size_t t, std::size_t x, int k) {
    return nuisance.s.at(k, t, x);
  };
  upper_family.signal = aipw;

  // Lower bound: max(s1 + s0 - 1, 0) via a two-label family with a sentinel.
  ScoreFamily lower_family;
  lower_family.labels = FiniteIndexSet::from_values({1.0}).with_sentinel();
  lower_family.surface = [&](std::size_t t, std::size_t x, int k) {
    if (t == 1) return 0.0;
    return nuisance.s.at(k, 0, x) + nuisance.s.at(k, 1, x) - 1.0;
  };
  lower_family.signal = [&](std::size_t t, const Observation& w, int k) {
    if (t == 1) return 0.0;
    return aipw(0, w, k) + aipw(1, w, k) - 1.0;
  };

  FrechetBounds bounds;
  bounds.upper = estimate(sample, folds, upper_family, Direction::minimize, level);
  bounds.lower = estimate(sample, folds, lower_family, Direction::maximize, level);
  return bounds;
}

// ===========================================================================
// Trimming (Lee) bounds on the always-takers' mean outcome.

struct LeeNuisance {
  CrossFitSurface s1;   // P(S=1 | D=1, X=x), clipped, monotonicity-projected
  CrossFitSurface s0;   // P(S=1 | D=0, X=x)
  CrossFitSurface mu1;  // P(D=1 | X=x)
  CrossFitCdf law1;     // law of Y | D=1, S=1, X=x over the outcome support
};

// Fits the selection surfaces, projects them onto s1 >= s0 (pointwise
// max/min swap) and fits the treated-arm outcome law.
inline LeeNuisance fit_lee_nuisance(const Sample& sample,
                                    const FoldAssignment& folds) {
  require(!sample.schema.outcome_support.empty(), ErrorCode::config_error,
          "Lee bounds need a declared outcome support");
  CellFitOptions prob;
  prob.clip01 = true;
  LeeNuisance nuisance;
  nuisance.s1 = cell_mean_fit(
      sample, folds, FiniteIndexSet::from_codes({1}),
      [](std::size_t, const Observation& w) { return w.d == 1; },
      [](std::size_t, const Observation& w) { return static_cast<double>(w.s); },
      prob);
  nuisance.s0 = cell_mean_fit(
      sample, folds, FiniteIndexSet::from_codes({1}),
      [](std::size_t, const Observation& w) { return w.d == 0; },
      [](std::size_t, const Observation& w) { return static_cast<double>(w.s); },
      prob);
  for (std::size_t k = 0; k < nuisance.s1.per_fold.size(); ++k) {
    auto& hi = nuisance.s1.per_fold[k].values;
    auto& lo = nuisance.s0.per_fold[k].values;
    for (std::size_t x = 0; x < hi.size(); ++x) {
      if (lo[x] > hi[x]) std::swap(lo[x], hi[x]);
    }
  }
  nuisance.mu1 = fit_propensity(sample, folds);
  nuisance.law1 = fit_cell_distribution(
      sample, folds,
      [](const Observation& w) { return w.d == 1 && w.s == 1; },
      sample.schema.outcome_support);
  return nuisance;
}

struct LeeOptions {
  double denominator_floor = 0.01;
};

struct LeeBounds {
  EnvelopeEstimate lower;        // ratio beta_L
  EnvelopeEstimate upper;        // ratio beta_U
  EnvelopeEstimate num_lower;    // aggregated intersection bound N_L
  EnvelopeEstimate num_upper;    // N_U
  EnvelopeEstimate denominator;  // P(S=1 | D=0)
};

namespace detail {

// Denominator signal (1-D)S / mu_0(X); its mean identifies P(S=1 | D=0).
inline std::vector<double> lee_denominator_scores(const Sample& sample,
                                                  const FoldAssignment& folds,
                                                  const LeeNuisance& nuisance) {
  std::vector<double> scores(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Observation& w = sample.rows[i];
    const int k = folds.fold_of[i];
    const double mu0 =
        1.0 - nuisance.mu1.at(k, 0, static_cast<std::size_t>(w.x));
    scores[i] = (w.d == 0 && w.s == 1) ? 1.0 / mu0 : 0.0;
  }
  return scores;
}

inline LeeBounds lee_bounds_from_scores(const Sample& sample,
                                        const FoldAssignment& folds,
                                        std::span<const double> lower_scores,
                                        std::span<const double> upper_scores,
                                        const LeeNuisance& nuisance,
                                        double level, const LeeOptions& options) {
  const auto den_scores = lee_denominator_scores(sample, folds, nuisance);
  LeeBounds bounds;
  bounds.num_lower = summarize_scores(lower_scores, folds, level);
  bounds.num_upper = summarize_scores(upper_scores, folds, level);
  bounds.denominator = summarize_scores(den_scores, folds, level);
  bounds.lower = ratio_estimate(lower_scores, den_scores, folds, level,
                                options.denominator_floor);
  bounds.upper = ratio_estimate(upper_scores, den_scores, folds, level,
                                options.denominator_floor);
  return bounds;
}

}  // namespace detail

// Discrete-outcome Lee bounds. The index set is the outcome support; the
// classifier minimizes (maximizes) beta*s0(x) + s1(x)*E[max(Y-beta,0)|x]
// (min for the lower bound) over the support, which is the dual CVaR search.
inline LeeBounds lee_bounds_discrete(const Sample& sample,
                                     const FoldAssignment& folds,
                                     const LeeNuisance& nuisance, double level,
                                     const LeeOptions& options = {}) {
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_surface(nuisance.s1, folds, cells, "lee s1");
  detail::check_surface(nuisance.s0, folds, cells, "lee s0");
  detail::check_surface(nuisance.mu1, folds, cells, "lee propensity");
  detail::check_cdf(nuisance.law1, folds, cells, "lee outcome law");
  const std::vector<double>& support = sample.schema.outcome_support;
  require(!support.empty(), ErrorCode::config_error,
          "Lee bounds need a declared outcome support");

  const auto tail_mean = [&](const DiscreteDistribution& law, double beta,
                             bool upper) {
    double acc = 0.0;
    for (std::size_t j = 0; j < law.support.size(); ++j) {
      const double centered = law.support[j] - beta;
      acc += law.probs[j] * (upper ? std::max(centered, 0.0)
                                   : std::min(centered, 0.0));
    }
    return acc;
  };

  const auto objective = [&](std::size_t t, std::size_t x, int k, bool upper) {
    const double beta = support[t];
    const double s1 = nuisance.s1.at(k, 0, x);
    const double s0 = nuisance.s0.at(k, 0, x);
    return beta * s0 + s1 * tail_mean(nuisance.law1.at(k, x), beta, upper);
  };

  const auto signal = [&](std::size_t t, const Observation& w, int k,
                          bool upper) {
    const double beta = support[t];
    const std::size_t x = static_cast<std::size_t>(w.x);
    const double mu1 = nuisance.mu1.at(k, 0, x);
    double value = 0.0;
    if (w.d == 1 && w.s == 1) {
      const bool in_tail = upper ? (w.y >= beta) : (w.y <= beta);
      if (in_tail) value += (w.y - beta) / mu1;
    } else if (w.d == 0 && w.s == 1) {
      value += beta / (1.0 - mu1);
    }
    return value;
  };

  ScoreFamily upper_family;
  upper_family.labels = FiniteIndexSet::from_values(support);
  upper_family.surface = [&](std::size_t t, std::size_t x, int k) {
    return objective(t, x, k, true);
  };
  upper_family.signal = [&](std::size_t t, const Observation& w, int k) {
    return signal(t, w, k, true);
  };

  ScoreFamily lower_family;
  lower_family.labels = FiniteIndexSet::from_values(support);
  lower_family.surface = [&](std::size_t t, std::size_t x, int k) {
    return objective(t, x, k, false);
  };
  lower_family.signal = [&](std::size_t t, const Observation& w, int k) {
    return signal(t, w, k, false);
  };

  const auto upper_scores =
      envelope_scores(sample, folds, upper_family, Direction::minimize);
  const auto lower_scores =
      envelope_scores(sample, folds, lower_family, Direction::maximize);
  return detail::lee_bounds_from_scores(sample, folds, lower_scores,
                                        upper_scores, nuisance, level, options);
}

// Binary-outcome specialization: the support collapses to {0,1} and the
// classifier reduces to threshold rules in (s1 pY, s0).
inline LeeBounds lee_bounds_binary(const Sample& sample,
                                   const FoldAssignment& folds,
                                   const LeeNuisance& nuisance, double level,
                                   const LeeOptions& options = {}) {
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_surface(nuisance.s1, folds, cells, "lee s1");
  detail::check_surface(nuisance.s0, folds, cells, "lee s0");
  detail::check_surface(nuisance.mu1, folds, cells, "lee propensity");
  detail::check_cdf(nuisance.law1, folds, cells, "lee outcome law");
  const std::vector<double>& support = sample.schema.outcome_support;
  require(support.size() == 2 && support[0] == 0.0 && support[1] == 1.0,
          ErrorCode::config_error,
          "binary Lee bounds need outcome support {0,1}");

  std::vector<double> upper_scores(sample.size());
  std::vector<double> lower_scores(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Observation& w = sample.rows[i];
    const int k = folds.fold_of[i];
    const std::size_t x = static_cast<std::size_t>(w.x);
    const double s1 = nuisance.s1.at(k, 0, x);
    const double s0 = nuisance.s0.at(k, 0, x);
    const double p1 = nuisance.law1.at(k, x).probs[1];  // pY(x)
    const double p0 = nuisance.law1.at(k, x).probs[0];
    const double mu1 = nuisance.mu1.at(k, 0, x);
    const double mu0 = 1.0 - mu1;

    // Upper numerator: keep beta=0 when s1 pY <= s0, else beta=1.
    if (s1 * p1 <= s0) {
      upper_scores[i] = (w.d == 1 && w.s == 1) ? w.y / mu1 : 0.0;
    } else {
      upper_scores[i] = (w.d == 0 && w.s == 1) ? 1.0 / mu0 : 0.0;
    }

    // Lower numerator: keep beta=0 unless s0 - s1 p0 is strictly positive.
    if (0.0 >= s0 + s1 * (-p0)) {
      lower_scores[i] = 0.0;
    } else {
      double score = 0.0;
      if (w.d == 1 && w.s == 1) {
        score += (w.y - 1.0) / mu1;
      } else if (w.d == 0 && w.s == 1) {
        score += 1.0 / mu0;
      }
      lower_scores[i] = score;
    }
  }
  return detail::lee_bounds_from_scores(sample, folds, lower_scores,
                                        upper_scores, nuisance, level, options);
}

// ===========================================================================
// Roy model bounds on the joint distribution of potential utilities.

struct RoyNuisance {
  CrossFitSurface joint_d1;  // P(S=1, D=1 | Z=z, X=x) over the z labels
  CrossFitSurface joint_d0;  // P(S=1, D=0 | Z=z, X=x)
  CrossFitSurface z_prob;    // P(Z=z | X=x)
};

inline RoyNuisance fit_roy_nuisance(const Sample& sample,
                                    const FoldAssignment& folds) {
  const std::vector<int>& zs = sample.schema.z_support;
  require(!zs.empty(), ErrorCode::config_error,
          "Roy bounds need an instrument column");
  for (std::size_t i = 0; i < sample.size(); ++i) {
    require(sample.rows[i].z.has_value(), ErrorCode::out_of_support,
            "row " + std::to_string(i) + ": missing instrument value");
  }
  CellFitOptions prob;
  prob.clip01 = true;
  const FiniteIndexSet labels = FiniteIndexSet::from_codes(zs);
  RoyNuisance nuisance;
  nuisance.joint_d1 = cell_mean_fit(
      sample, folds, labels,
      [&](std::size_t t, const Observation& w) { return *w.z == zs[t]; },
      [](std::size_t, const Observation& w) {
        return static_cast<double>(w.d * w.s);
      },
      prob);
  nuisance.joint_d0 = cell_mean_fit(
      sample, folds, labels,
      [&](std::size_t t, const Observation& w) { return *w.z == zs[t]; },
      [](std::size_t, const Observation& w) {
        return static_cast<double>((1 - w.d) * w.s);
      },
      prob);
  nuisance.z_prob = cell_mean_fit(
      sample, folds, labels,
      [](std::size_t, const Observation&) { return true; },
      [&](std::size_t t, const Observation& w) {
        return *w.z == zs[t] ? 1.0 : 0.0;
      },
      prob);
  return nuisance;
}

struct RoyOptions {
  double overlap_kappa = 0.01;
};

struct RoyBounds {
  EnvelopeEstimate bound_10;  // upper bound on P(S(1)=1, S(0)=0)
  EnvelopeEstimate bound_01;  // upper bound on P(S(1)=0, S(0)=1)
};

inline RoyBounds roy_bounds(const Sample& sample, const FoldAssignment& folds,
                            const RoyNuisance& nuisance, double level,
                            const RoyOptions& options = {}) {
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_surface(nuisance.joint_d1, folds, cells, "roy joint d=1");
  detail::check_surface(nuisance.joint_d0, folds, cells, "roy joint d=0");
  detail::check_surface(nuisance.z_prob, folds, cells, "roy instrument probs");
  const std::vector<int>& zs = sample.schema.z_support;
  require(!zs.empty(), ErrorCode::config_error,
          "Roy bounds need an instrument column");

  for (const auto& surface : nuisance.z_prob.per_fold) {
    for (double p : surface.values) {
      require(p >= options.overlap_kappa, ErrorCode::overlap_violation,
              "fitted instrument probability " + std::to_string(p) +
                  " is below kappa = " + std::to_string(options.overlap_kappa));
    }
  }

  const auto family_for = [&](const CrossFitSurface& joint, int arm) {
    ScoreFamily family;
    family.labels = FiniteIndexSet::from_codes(zs);
    family.surface = [&joint](std::size_t t, std::size_t x, int k) {
      return joint.at(k, t, x);
    };
    family.signal = [&, arm](std::size_t t, const Observation& w, int k) {
      const std::size_t x = static_cast<std::size_t>(w.x);
      const double pz = nuisance.z_prob.at(k, t, x);
      const double fitted = joint.at(k, t, x);
      const double event =
          (w.s == 1 && w.d == arm) ? 1.0 : 0.0;
      const double indicator = (*w.z == zs[t]) ? 1.0 : 0.0;
      return indicator / pz * (event - fitted) + fitted;
    };
    return family;
  };

  RoyBounds bounds;
  const ScoreFamily family_10 = family_for(nuisance.joint_d1, 1);
  const ScoreFamily family_01 = family_for(nuisance.joint_d0, 0);
  bounds.bound_10 = estimate(sample, folds, family_10, Direction::minimize, level);
  bounds.bound_01 = estimate(sample, folds, family_01, Direction::minimize, level);
  return bounds;
}

// ===========================================================================
// Makarov bounds on the CDF of the treatment effect at a point d.

struct MakarovNuisance {
  CrossFitCdf arm1;     // law of Y | D=1, X=x
  CrossFitCdf arm0;     // law of Y | D=0, X=x
  CrossFitSurface mu1;  // P(D=1 | X=x)
};

inline MakarovNuisance fit_makarov_nuisance(const Sample& sample,
                                            const FoldAssignment& folds) {
  detail::require_fully_observed(sample, "makarov");
  require(!sample.schema.outcome_support.empty(), ErrorCode::config_error,
          "Makarov bounds need a declared outcome support");
  MakarovNuisance nuisance;
  nuisance.arm1 = fit_cell_distribution(
      sample, folds, [](const Observation& w) { return w.d == 1; },
      sample.schema.outcome_support);
  nuisance.arm0 = fit_cell_distribution(
      sample, folds, [](const Observation& w) { return w.d == 0; },
      sample.schema.outcome_support);
  nuisance.mu1 = fit_propensity(sample, folds);
  return nuisance;
}

struct MakarovBounds {
  EnvelopeEstimate lower;
  EnvelopeEstimate upper;
  double d = 0.0;
};

// Bounds on P(Y(1) - Y(0) <= d). The index set runs over the outcome support
// plus a sentinel for the 0 branch; F0 enters through its left-hand limit at
// t - d. The upper bound adds the constant one to every branch signal.
inline MakarovBounds makarov_cdf_bounds(const Sample& sample,
                                        const FoldAssignment& folds,
                                        const MakarovNuisance& nuisance,
                                        double d, double level) {
  detail::require_fully_observed(sample, "makarov");
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_cdf(nuisance.arm1, folds, cells, "makarov arm 1");
  detail::check_cdf(nuisance.arm0, folds, cells, "makarov arm 0");
  detail::check_surface(nuisance.mu1, folds, cells, "makarov propensity");
  const std::vector<double>& support = sample.schema.outcome_support;
  require(!support.empty(), ErrorCode::config_error,
          "Makarov bounds need a declared outcome support");
  const std::size_t sentinel = support.size();

  const auto h_surface = [&](std::size_t t, std::size_t x, int k) {
    if (t == sentinel) return 0.0;
    const double point = support[t];
    return nuisance.arm1.at(k, x).cdf(point) -
           nuisance.arm0.at(k, x).cdf_left(point - d);
  };

  // AIPW signal for F1(t|x) - F0((t-d)-|x).
  const auto h_signal = [&](std::size_t t, const Observation& w, int k) {
    if (t == sentinel) return 0.0;
    const std::size_t x = static_cast<std::size_t>(w.x);
    const double point = support[t];
    const double mu1 = nuisance.mu1.at(k, 0, x);
    const double f1 = nuisance.arm1.at(k, x).cdf(point);
    const double f0 = nuisance.arm0.at(k, x).cdf_left(point - d);
    double value = f1 - f0;
    if (w.d == 1) {
      const double event = (w.y <= point) ? 1.0 : 0.0;
      value += (event - f1) / mu1;
    } else {
      const double event = (w.y < point - d) ? 1.0 : 0.0;
      value -= (event - f0) / (1.0 - mu1);
    }
    return value;
  };

  ScoreFamily lower_family;
  lower_family.labels = FiniteIndexSet::from_values(support).with_sentinel();
  lower_family.surface = h_surface;
  lower_family.signal = h_signal;

  ScoreFamily upper_family;
  upper_family.labels = lower_family.labels;
  upper_family.surface = [&](std::size_t t, std::size_t x, int k) {
    return h_surface(t, x, k) + 1.0;
  };
  upper_family.signal = [&](std::size_t t, const Observation& w, int k) {
    return h_signal(t, w, k) + 1.0;
  };

  MakarovBounds bounds;
  bounds.d = d;
  bounds.lower = estimate(sample, folds, lower_family, Direction::maximize, level);
  bounds.upper = estimate(sample, folds, upper_family, Direction::minimize, level);
  return bounds;
}

// ===========================================================================
// Distributional welfare from treatment-effect quantile bounds.

struct WelfareNuisance {
  CrossFitCdf arm1;
  CrossFitCdf arm0;
};

inline WelfareNuisance fit_welfare_nuisance(const Sample& sample,
                                            const FoldAssignment& folds) {
  detail::require_fully_observed(sample, "welfare");
  require(!sample.schema.outcome_support.empty(), ErrorCode::config_error,
          "welfare bounds need a declared outcome support");
  WelfareNuisance nuisance;
  nuisance.arm1 = fit_cell_distribution(
      sample, folds, [](const Observation& w) { return w.d == 1; },
      sample.schema.outcome_support);
  nuisance.arm0 = fit_cell_distribution(
      sample, folds, [](const Observation& w) { return w.d == 0; },
      sample.schema.outcome_support);
  return nuisance;
}

inline std::vector<double> equispaced_grid(double lo, double hi,
                                           std::size_t points) {
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) /
                       static_cast<double>(points - 1);
  }
  return grid;
}

inline std::vector<double> worst_case_u_grid(double tau, std::size_t points = 21) {
  return equispaced_grid(0.0, tau, points);
}

inline std::vector<double> best_case_u_grid(double tau, std::size_t points = 21) {
  return equispaced_grid(tau, 1.0, points);
}

namespace detail {

inline void check_welfare_grid(double tau, const std::vector<double>& u_grid,
                               double lo, double hi) {
  require(tau > 0.0 && tau < 1.0, ErrorCode::bad_grid,
          "quantile level tau must lie in (0,1)");
  require(!u_grid.empty(), ErrorCode::bad_grid, "u-grid is empty");
  for (double u : u_grid) {
    require(u >= lo - 1e-12 && u <= hi + 1e-12, ErrorCode::bad_grid,
            "u-grid point " + std::to_string(u) + " outside [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

}  // namespace detail

// Maximum worst-case welfare: E[max(sup_{u in [0,tau]} (Q_u(Y(1)|X) -
// Q_{u-tau+1}(Y(0)|X)), 0)] with the grid standing in for [0,tau] and a
// sentinel label for the 0 branch. Signals are cross-fitted plug-in values.
inline EnvelopeEstimate worst_case_welfare(const Sample& sample,
                                           const FoldAssignment& folds,
                                           const WelfareNuisance& nuisance,
                                           double tau,
                                           const std::vector<double>& u_grid,
                                           double level) {
  detail::require_fully_observed(sample, "welfare");
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_cdf(nuisance.arm1, folds, cells, "welfare arm 1");
  detail::check_cdf(nuisance.arm0, folds, cells, "welfare arm 0");
  detail::check_welfare_grid(tau, u_grid, 0.0, tau);
  const std::size_t sentinel = u_grid.size();

  ScoreFamily family;
  family.labels = FiniteIndexSet::from_values(u_grid).with_sentinel();
  family.surface = [&](std::size_t t, std::size_t x, int k) {
    if (t == sentinel) return 0.0;
    const double u = u_grid[t];
    return detail::quantile_or_min(nuisance.arm1.at(k, x), u) -
           detail::quantile_or_min(nuisance.arm0.at(k, x), u - tau + 1.0);
  };
  family.signal = [&](std::size_t t, const Observation& w, int k) {
    return family.surface(t, static_cast<std::size_t>(w.x), k);
  };
  return estimate(sample, folds, family, Direction::maximize, level);
}

// Optimal best-case welfare: E[inf_{u in [tau,1]} max(Q_u(Y(1)|X) -
// Q_{u-tau}(Y(0)|X), 0)]. The outer max is encoded as a two-label sup side
// (quantile-difference signal, constant-0 signal) of a saddle problem.
inline SaddleEstimate best_case_welfare(const Sample& sample,
                                        const FoldAssignment& folds,
                                        const WelfareNuisance& nuisance,
                                        double tau,
                                        const std::vector<double>& u_grid,
                                        double level) {
  detail::require_fully_observed(sample, "welfare");
  const std::size_t cells = static_cast<std::size_t>(sample.schema.num_cells);
  detail::check_cdf(nuisance.arm1, folds, cells, "welfare arm 1");
  detail::check_cdf(nuisance.arm0, folds, cells, "welfare arm 0");
  detail::check_welfare_grid(tau, u_grid, tau, 1.0);

  SaddleScoreFamily family;
  family.kappa_labels = FiniteIndexSet::from_values({1.0}).with_sentinel();
  family.t_labels = FiniteIndexSet::from_values(u_grid);
  family.surface = [&](std::size_t kappa, std::size_t t, std::size_t x, int k) {
    if (kappa == 1) return 0.0;
    const double u = u_grid[t];
    return detail::quantile_or_min(nuisance.arm1.at(k, x), u) -
           detail::quantile_or_min(nuisance.arm0.at(k, x), u - tau);
  };
  family.signal = [&](std::size_t kappa, std::size_t t, const Observation& w,
                      int k) {
    return family.surface(kappa, t, static_cast<std::size_t>(w.x), k);
  };
  return estimate_saddle(sample, folds, family, level);
}

}  // namespace envelope
