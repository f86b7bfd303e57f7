#pragma once

// Aggregated minimax values: pure saddle-point detection on finite grids and
// the envelope saddle-value estimator. Orientation follows sup over kappa of
// inf over t, so a saddle cell is simultaneously the max of its t-column over
// kappa and the min of its kappa-row over t.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "envelope/common.hpp"
#include "envelope/data.hpp"
#include "envelope/envelope.hpp"

namespace envelope {

struct SaddleMatrix {
  std::size_t num_kappa = 0;
  std::size_t num_t = 0;
  std::vector<double> values;  // kappa-major

  SaddleMatrix() = default;
  SaddleMatrix(std::size_t nk, std::size_t nt)
      : num_kappa(nk), num_t(nt), values(nk * nt, 0.0) {}

  double at(std::size_t k, std::size_t t) const { return values[k * num_t + t]; }
  double& at(std::size_t k, std::size_t t) { return values[k * num_t + t]; }
};

struct SaddleCell {
  std::size_t kappa = 0;
  std::size_t t = 0;
  double value = 0.0;
};

struct SaddleSearch {
  std::optional<SaddleCell> cell;  // empty when no pure saddle exists
  double sup_inf = 0.0;
  double inf_sup = 0.0;
};

// First cell in lexicographic (kappa, t) order that is a weak row-min over t
// and a weak column-max over kappa. When none exists the grid has
// sup_kappa inf_t < inf_t sup_kappa and both values are reported.
inline SaddleSearch find_saddle(const SaddleMatrix& m) {
  SaddleSearch out;
  out.sup_inf = -kInf;
  for (std::size_t k = 0; k < m.num_kappa; ++k) {
    double row_min = kInf;
    for (std::size_t t = 0; t < m.num_t; ++t) row_min = std::min(row_min, m.at(k, t));
    out.sup_inf = std::max(out.sup_inf, row_min);
  }
  out.inf_sup = kInf;
  for (std::size_t t = 0; t < m.num_t; ++t) {
    double col_max = -kInf;
    for (std::size_t k = 0; k < m.num_kappa; ++k) col_max = std::max(col_max, m.at(k, t));
    out.inf_sup = std::min(out.inf_sup, col_max);
  }
  for (std::size_t k = 0; k < m.num_kappa && !out.cell.has_value(); ++k) {
    for (std::size_t t = 0; t < m.num_t; ++t) {
      const double v = m.at(k, t);
      bool is_row_min = true;
      for (std::size_t tt = 0; tt < m.num_t; ++tt) {
        if (m.at(k, tt) < v) { is_row_min = false; break; }
      }
      if (!is_row_min) continue;
      bool is_col_max = true;
      for (std::size_t kk = 0; kk < m.num_kappa; ++kk) {
        if (m.at(kk, t) > v) { is_col_max = false; break; }
      }
      if (!is_col_max) continue;
      out.cell = SaddleCell{k, t, v};
      break;
    }
  }
  return out;
}

// Signals g_{kappa,t}(W) with E[g_{kappa,t} | X=x] = s(kappa,t,x).
struct SaddleScoreFamily {
  FiniteIndexSet kappa_labels;
  FiniteIndexSet t_labels;
  std::function<double(std::size_t kappa, std::size_t t, std::size_t x, int fold)>
      surface;
  std::function<double(std::size_t kappa, std::size_t t, const Observation& w,
                       int fold)>
      signal;
};

struct SaddleEstimate {
  double psi_hat = 0.0;
  double variance_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  std::size_t n = 0;
  int num_folds = 0;
  std::uint64_t seed = 0;
  std::size_t grid_kappa = 0;
  std::size_t grid_t = 0;
  std::vector<double> per_fold_means;
};

// Per-cell saddle points of the fitted surfaces; fails loudly (listing the
// offending cells) when a fitted grid does not admit a pure saddle.
inline SaddleEstimate estimate_saddle(const Sample& sample,
                                      const FoldAssignment& folds,
                                      const SaddleScoreFamily& family,
                                      double level) {
  require(folds.size() == sample.size(), ErrorCode::missing_nuisance,
          "fold assignment does not match the sample");
  const std::size_t num_cells = static_cast<std::size_t>(sample.schema.num_cells);
  const std::size_t nk = family.kappa_labels.size();
  const std::size_t nt = family.t_labels.size();

  // chosen cell per (fold, x)
  std::vector<std::vector<SaddleCell>> chosen(
      static_cast<std::size_t>(folds.num_folds));
  std::string missing;
  for (int k = 0; k < folds.num_folds; ++k) {
    chosen[static_cast<std::size_t>(k)].resize(num_cells);
    for (std::size_t x = 0; x < num_cells; ++x) {
      SaddleMatrix m(nk, nt);
      for (std::size_t a = 0; a < nk; ++a) {
        for (std::size_t b = 0; b < nt; ++b) {
          const double v = family.surface(a, b, x, k);
          require(std::isfinite(v), ErrorCode::missing_nuisance,
                  "fitted saddle surface is not finite at cell " +
                      std::to_string(x) + ", fold " + std::to_string(k));
          m.at(a, b) = v;
        }
      }
      const SaddleSearch search = find_saddle(m);
      if (!search.cell.has_value()) {
        if (!missing.empty()) missing += ", ";
        missing += "x=" + std::to_string(x) + " (fold " + std::to_string(k) + ")";
        continue;
      }
      chosen[static_cast<std::size_t>(k)][x] = *search.cell;
    }
  }
  require(missing.empty(), ErrorCode::no_saddle,
          "no pure saddle on the fitted grids at " + missing);

  std::vector<double> scores(sample.size());
  parallel_for(sample.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Observation& w = sample.rows[i];
      const int k = folds.fold_of[i];
      const SaddleCell& cell =
          chosen[static_cast<std::size_t>(k)][static_cast<std::size_t>(w.x)];
      scores[i] = family.signal(cell.kappa, cell.t, w, k);
    }
  });
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(std::isfinite(scores[i]), ErrorCode::non_finite_score,
            "saddle score is not finite at row " + std::to_string(i));
  }

  const EnvelopeEstimate base = summarize_scores(scores, folds, level);
  SaddleEstimate est;
  est.psi_hat = base.psi_hat;
  est.variance_hat = base.variance_hat;
  est.se = base.se;
  est.ci_lo = base.ci_lo;
  est.ci_hi = base.ci_hi;
  est.level = base.level;
  est.n = base.n;
  est.num_folds = base.num_folds;
  est.seed = base.seed;
  est.grid_kappa = nk;
  est.grid_t = nt;
  est.per_fold_means = base.per_fold_means;
  return est;
}

}  // namespace envelope
