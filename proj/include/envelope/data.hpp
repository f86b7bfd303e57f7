#pragma once

// Domain types shared by every module: observations, finite index sets,
// discrete distributions and fold assignments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "envelope/common.hpp"

namespace envelope {

// One data row W = (D, S, S*Y, Z, X). The outcome y is meaningful only when
// s == 1; unselected rows carry a NaN sentinel that must never reach a score.
struct Observation {
  int d = 0;
  int s = 0;
  double y = kNaN;
  std::optional<int> z;
  int x = 0;
};

struct SampleSchema {
  int num_cells = 0;                     // covariate codes are 0..num_cells-1
  std::vector<int> z_support;            // empty when no instrument column
  std::vector<double> outcome_support;   // sorted; empty when outcomes unused

  bool has_instrument() const { return !z_support.empty(); }
};

struct Sample {
  std::vector<Observation> rows;
  SampleSchema schema;

  std::size_t size() const { return rows.size(); }
};

inline SampleSchema infer_schema(const std::vector<Observation>& rows) {
  SampleSchema schema;
  std::set<int> zs;
  std::set<double> ys;
  for (const auto& w : rows) {
    schema.num_cells = std::max(schema.num_cells, w.x + 1);
    if (w.z.has_value()) zs.insert(*w.z);
    if (w.s == 1 && std::isfinite(w.y)) ys.insert(w.y);
  }
  schema.z_support.assign(zs.begin(), zs.end());
  schema.outcome_support.assign(ys.begin(), ys.end());
  return schema;
}

// Checks every row against the declared supports. Rows with s == 0 get their
// outcome normalized to the NaN sentinel.
inline Sample validate_sample(std::vector<Observation> rows,
                              const SampleSchema& schema) {
  require(!rows.empty(), ErrorCode::empty_sample, "sample has no rows");
  require(schema.num_cells > 0, ErrorCode::config_error,
          "schema declares no covariate cells");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& w = rows[i];
    const std::string row = "row " + std::to_string(i);
    require(w.d == 0 || w.d == 1, ErrorCode::out_of_support,
            row + ": field d must be 0/1, got " + std::to_string(w.d));
    require(w.s == 0 || w.s == 1, ErrorCode::out_of_support,
            row + ": field s must be 0/1, got " + std::to_string(w.s));
    require(w.x >= 0 && w.x < schema.num_cells, ErrorCode::out_of_support,
            row + ": field x code " + std::to_string(w.x) +
                " outside 0.." + std::to_string(schema.num_cells - 1));
    if (w.z.has_value()) {
      require(std::find(schema.z_support.begin(), schema.z_support.end(),
                        *w.z) != schema.z_support.end(),
              ErrorCode::out_of_support,
              row + ": field z value " + std::to_string(*w.z) +
                  " outside declared instrument support");
    } else {
      require(schema.z_support.empty(), ErrorCode::out_of_support,
              row + ": field z missing while instrument support is declared");
    }
    if (w.s == 0) {
      w.y = kNaN;  // unusable by convention
    } else {
      require(std::isfinite(w.y), ErrorCode::out_of_support,
              row + ": field y must be finite when s=1");
      if (!schema.outcome_support.empty()) {
        require(std::binary_search(schema.outcome_support.begin(),
                                   schema.outcome_support.end(), w.y),
                ErrorCode::out_of_support,
                row + ": field y value " + std::to_string(w.y) +
                    " outside declared outcome support");
      }
    }
  }
  return Sample{std::move(rows), schema};
}

inline Sample validate_sample(std::vector<Observation> rows) {
  require(!rows.empty(), ErrorCode::empty_sample, "sample has no rows");
  SampleSchema schema = infer_schema(rows);
  return validate_sample(std::move(rows), schema);
}

// ---------------------------------------------------------------------------
// Finite index sets. Labels are numeric (support points, instrument codes,
// quantile levels) plus an optional sentinel; order is fixed and drives every
// tie-break in the library.

struct IndexLabel {
  double value = 0.0;
  bool sentinel = false;

  friend bool operator==(const IndexLabel& a, const IndexLabel& b) {
    return a.sentinel == b.sentinel && (a.sentinel || a.value == b.value);
  }
};

struct FiniteIndexSet {
  std::vector<IndexLabel> labels;

  std::size_t size() const { return labels.size(); }

  static FiniteIndexSet from_values(const std::vector<double>& values) {
    FiniteIndexSet set;
    set.labels.reserve(values.size());
    for (double v : values) set.labels.push_back({v, false});
    set.validate();
    return set;
  }

  static FiniteIndexSet from_codes(const std::vector<int>& codes) {
    FiniteIndexSet set;
    set.labels.reserve(codes.size());
    for (int c : codes) set.labels.push_back({static_cast<double>(c), false});
    set.validate();
    return set;
  }

  FiniteIndexSet with_sentinel() const {
    FiniteIndexSet out = *this;
    out.labels.push_back({0.0, true});
    out.validate();
    return out;
  }

  std::string name(std::size_t i) const {
    if (labels[i].sentinel) return "*";
    return std::to_string(labels[i].value);
  }

  void validate() const {
    require(!labels.empty(), ErrorCode::config_error, "index set is empty");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) {
        require(!(labels[i] == labels[j]), ErrorCode::config_error,
                "index set labels must be distinct");
      }
    }
  }

  friend bool operator==(const FiniteIndexSet& a, const FiniteIndexSet& b) {
    return a.labels == b.labels;
  }
};

// ---------------------------------------------------------------------------
// Discrete distributions: the backbone of CVaR, quantiles and DGP truths.

struct DiscreteDistribution {
  std::vector<double> support;  // strictly increasing
  std::vector<double> probs;    // nonnegative, sums to 1 within 1e-12

  void validate() const {
    require(!support.empty(), ErrorCode::config_error,
            "distribution has empty support");
    require(support.size() == probs.size(), ErrorCode::config_error,
            "support/probability size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
      require(std::isfinite(support[i]), ErrorCode::config_error,
              "support point not finite");
      if (i > 0) {
        require(support[i] > support[i - 1], ErrorCode::config_error,
                "support must be strictly increasing");
      }
      require(probs[i] >= 0.0, ErrorCode::config_error,
              "probabilities must be nonnegative");
      sum += probs[i];
    }
    require(std::abs(sum - 1.0) <= 1e-12, ErrorCode::config_error,
            "probabilities sum to " + std::to_string(sum));
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) m += support[i] * probs[i];
    return m;
  }

  // F(t) = P(Y <= t)
  double cdf(double t) const {
    double c = 0.0;
    for (std::size_t i = 0; i < support.size() && support[i] <= t; ++i)
      c += probs[i];
    return c;
  }

  // F(t-) = P(Y < t), the left-hand limit
  double cdf_left(double t) const {
    double c = 0.0;
    for (std::size_t i = 0; i < support.size() && support[i] < t; ++i)
      c += probs[i];
    return c;
  }

  double min() const { return support.front(); }
  double max() const { return support.back(); }
};

// ---------------------------------------------------------------------------
// Fold assignments for cross-fitting.

struct FoldAssignment {
  std::vector<int> fold_of;  // per-observation fold id in 0..num_folds-1
  int num_folds = 0;
  std::uint64_t seed = 0;

  std::size_t size() const { return fold_of.size(); }

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(num_folds), 0);
    for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
    return sizes;
  }
};

// Uniformly random partition via a seeded Fisher-Yates shuffle; fold sizes
// differ by at most one.
inline FoldAssignment make_folds(std::size_t n, int num_folds,
                                 std::uint64_t seed) {
  require(num_folds >= 2 && static_cast<std::size_t>(num_folds) <= n,
          ErrorCode::bad_fold_count,
          "fold count " + std::to_string(num_folds) +
              " must satisfy 2 <= K <= n = " + std::to_string(n));
  Rng rng(seed);
  const std::vector<std::size_t> perm = random_permutation(n, rng);
  FoldAssignment folds;
  folds.fold_of.resize(n);
  folds.num_folds = num_folds;
  folds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    folds.fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(num_folds));
  }
  return folds;
}

}  // namespace envelope
