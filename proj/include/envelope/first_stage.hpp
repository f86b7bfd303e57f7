#pragma once

// Cross-fitted nuisance estimation. The default first stage takes cell means
// over discrete covariate codes, fit on each fold's complement; a
// Nadaraya-Watson kernel fit covers real-vector covariates. Probability-type
// surfaces are clipped into [eps, 1-eps] before they can reach an
// inverse-propensity denominator.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "envelope/common.hpp"
#include "envelope/data.hpp"

namespace envelope {

constexpr double kProbClipEps = 1e-3;

inline double clip_probability(double p, double eps = kProbClipEps) {
  return std::min(1.0 - eps, std::max(eps, p));
}

// Values of a regression family s(t, x) over a finite index set and a finite
// covariate codebook, stored label-major.
struct RegressionSurface {
  FiniteIndexSet labels;
  std::size_t num_cells = 0;
  std::vector<double> values;

  RegressionSurface() = default;
  RegressionSurface(FiniteIndexSet labels_, std::size_t num_cells_)
      : labels(std::move(labels_)),
        num_cells(num_cells_),
        values(labels.size() * num_cells_, kNaN) {}

  double at(std::size_t t, std::size_t x) const {
    return values[t * num_cells + x];
  }
  double& at(std::size_t t, std::size_t x) { return values[t * num_cells + x]; }
};

// Max over the shared grid of |a - b|.
inline double sup_norm_gap(const RegressionSurface& a,
                           const RegressionSurface& b) {
  require(a.labels == b.labels && a.num_cells == b.num_cells,
          ErrorCode::grid_mismatch,
          "surfaces are defined on different grids");
  double gap = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    gap = std::max(gap, std::abs(a.values[i] - b.values[i]));
  }
  return gap;
}

// Per-fold surfaces, each fit on the fold's complement. Entry k serves the
// held-out observations of fold k.
struct CrossFitSurface {
  std::vector<RegressionSurface> per_fold;

  double at(int fold, std::size_t t, std::size_t x) const {
    return per_fold[static_cast<std::size_t>(fold)].at(t, x);
  }

  // Oracle injection: the same (true) surface for every fold.
  static CrossFitSurface constant(const RegressionSurface& surface,
                                  int num_folds) {
    CrossFitSurface out;
    out.per_fold.assign(static_cast<std::size_t>(num_folds), surface);
    return out;
  }
};

// Per-fold, per-cell conditional outcome laws over a common support.
struct CrossFitCdf {
  std::vector<double> support;
  std::vector<std::vector<DiscreteDistribution>> per_fold;  // [fold][x]

  const DiscreteDistribution& at(int fold, std::size_t x) const {
    return per_fold[static_cast<std::size_t>(fold)][x];
  }

  static CrossFitCdf constant(const std::vector<DiscreteDistribution>& cells,
                              int num_folds) {
    CrossFitCdf out;
    if (!cells.empty()) out.support = cells.front().support;
    out.per_fold.assign(static_cast<std::size_t>(num_folds), cells);
    return out;
  }
};

struct CellFitOptions {
  bool clip01 = false;          // clamp into [eps, 1-eps] after fitting
  double clip_eps = kProbClipEps;
  bool empty_cell_fallback = true;  // shrink to the complement-wide mean
};

// Cross-fitted cell means: value at (t, x) for fold k is the mean of
// value(t, w) over complement rows with member(t, w) and w.x == x, computed
// by direct enumeration in row order.
inline CrossFitSurface cell_mean_fit(
    const Sample& sample, const FoldAssignment& folds,
    const FiniteIndexSet& labels,
    const std::function<bool(std::size_t, const Observation&)>& member,
    const std::function<double(std::size_t, const Observation&)>& value,
    const CellFitOptions& options = {}) {
  require(folds.size() == sample.size(), ErrorCode::missing_nuisance,
          "fold assignment does not match the sample");
  const std::size_t num_cells = static_cast<std::size_t>(sample.schema.num_cells);
  CrossFitSurface fit;
  fit.per_fold.reserve(static_cast<std::size_t>(folds.num_folds));
  for (int k = 0; k < folds.num_folds; ++k) {
    RegressionSurface surface(labels, num_cells);
    for (std::size_t t = 0; t < labels.size(); ++t) {
      std::vector<double> cell_sum(num_cells, 0.0);
      std::vector<std::size_t> cell_count(num_cells, 0);
      double all_sum = 0.0;
      std::size_t all_count = 0;
      for (std::size_t i = 0; i < sample.size(); ++i) {
        if (folds.fold_of[i] == k) continue;
        const Observation& w = sample.rows[i];
        if (!member(t, w)) continue;
        const double v = value(t, w);
        cell_sum[static_cast<std::size_t>(w.x)] += v;
        ++cell_count[static_cast<std::size_t>(w.x)];
        all_sum += v;
        ++all_count;
      }
      for (std::size_t x = 0; x < num_cells; ++x) {
        double fitted;
        if (cell_count[x] > 0) {
          fitted = cell_sum[x] / static_cast<double>(cell_count[x]);
        } else if (options.empty_cell_fallback && all_count > 0) {
          fitted = all_sum / static_cast<double>(all_count);
        } else {
          fail(ErrorCode::empty_cell,
               "no data for label " + labels.name(t) + " in cell " +
                   std::to_string(x) + " on the complement of fold " +
                   std::to_string(k));
        }
        if (options.clip01) fitted = clip_probability(fitted, options.clip_eps);
        surface.at(t, x) = fitted;
      }
    }
    fit.per_fold.push_back(std::move(surface));
  }
  return fit;
}

// P(D=1 | X=x) as a single-label clipped surface.
inline CrossFitSurface fit_propensity(const Sample& sample,
                                      const FoldAssignment& folds,
                                      const CellFitOptions& base = {}) {
  CellFitOptions options = base;
  options.clip01 = true;
  return cell_mean_fit(
      sample, folds, FiniteIndexSet::from_codes({1}),
      [](std::size_t, const Observation&) { return true; },
      [](std::size_t, const Observation& w) { return static_cast<double>(w.d); },
      options);
}

// Cross-fitted conditional laws of the outcome over a declared support,
// restricted to rows passing `member`. Empty cells shrink to the
// complement-pooled law when the fallback is enabled.
inline CrossFitCdf fit_cell_distribution(
    const Sample& sample, const FoldAssignment& folds,
    const std::function<bool(const Observation&)>& member,
    const std::vector<double>& support, const CellFitOptions& options = {}) {
  require(!support.empty(), ErrorCode::config_error,
          "outcome support is empty");
  require(folds.size() == sample.size(), ErrorCode::missing_nuisance,
          "fold assignment does not match the sample");
  const std::size_t num_cells = static_cast<std::size_t>(sample.schema.num_cells);
  const std::size_t m = support.size();

  const auto support_index = [&](double y) -> std::size_t {
    for (std::size_t j = 0; j < m; ++j) {
      if (support[j] == y) return j;
    }
    fail(ErrorCode::out_of_support,
         "outcome value " + std::to_string(y) + " not in declared support");
  };

  CrossFitCdf fit;
  fit.support = support;
  fit.per_fold.resize(static_cast<std::size_t>(folds.num_folds));
  for (int k = 0; k < folds.num_folds; ++k) {
    std::vector<std::vector<double>> counts(num_cells,
                                            std::vector<double>(m, 0.0));
    std::vector<double> pooled(m, 0.0);
    std::vector<std::size_t> cell_total(num_cells, 0);
    std::size_t pooled_total = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (folds.fold_of[i] == k) continue;
      const Observation& w = sample.rows[i];
      if (!member(w)) continue;
      const std::size_t j = support_index(w.y);
      counts[static_cast<std::size_t>(w.x)][j] += 1.0;
      ++cell_total[static_cast<std::size_t>(w.x)];
      pooled[j] += 1.0;
      ++pooled_total;
    }
    auto& cells = fit.per_fold[static_cast<std::size_t>(k)];
    cells.resize(num_cells);
    for (std::size_t x = 0; x < num_cells; ++x) {
      DiscreteDistribution law;
      law.support = support;
      law.probs.resize(m);
      if (cell_total[x] > 0) {
        for (std::size_t j = 0; j < m; ++j)
          law.probs[j] = counts[x][j] / static_cast<double>(cell_total[x]);
      } else if (options.empty_cell_fallback && pooled_total > 0) {
        for (std::size_t j = 0; j < m; ++j)
          law.probs[j] = pooled[j] / static_cast<double>(pooled_total);
      } else {
        fail(ErrorCode::empty_cell,
             "no outcomes in cell " + std::to_string(x) +
                 " on the complement of fold " + std::to_string(k));
      }
      cells[x] = std::move(law);
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Nadaraya-Watson first stage for real-vector covariates (product Gaussian
// kernel). Bandwidth is user-supplied.

struct KernelCrossFit {
  std::vector<std::vector<double>> points;
  std::vector<double> targets;
  FoldAssignment folds;
  double bandwidth = 0.0;
  std::vector<double> fitted;  // held-out fitted value per observation

  // Evaluates fold k's fit (trained on the complement) at an arbitrary point.
  double evaluate(int fold, const std::vector<double>& point) const {
    double weight_sum = 0.0;
    double value_sum = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (folds.fold_of[j] == fold) continue;
      double dist2 = 0.0;
      for (std::size_t l = 0; l < point.size(); ++l) {
        const double diff = (point[l] - points[j][l]) / bandwidth;
        dist2 += diff * diff;
      }
      const double w = std::exp(-0.5 * dist2);
      weight_sum += w;
      value_sum += w * targets[j];
    }
    require(weight_sum > 0.0, ErrorCode::zero_kernel_mass,
            "kernel mass is zero at an evaluation point; bandwidth " +
                std::to_string(bandwidth) + " is too small");
    return value_sum / weight_sum;
  }
};

inline KernelCrossFit kernel_fit(const std::vector<std::vector<double>>& points,
                                 const std::vector<double>& targets,
                                 double bandwidth,
                                 const FoldAssignment& folds) {
  require(!points.empty() && points.size() == targets.size(),
          ErrorCode::config_error, "kernel fit needs matching points/targets");
  require(bandwidth > 0.0, ErrorCode::config_error,
          "bandwidth must be positive");
  require(folds.size() == points.size(), ErrorCode::missing_nuisance,
          "fold assignment does not match the data");
  KernelCrossFit fit;
  fit.points = points;
  fit.targets = targets;
  fit.folds = folds;
  fit.bandwidth = bandwidth;
  fit.fitted.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    fit.fitted[i] = fit.evaluate(folds.fold_of[i], points[i]);
  }
  return fit;
}

}  // namespace envelope
