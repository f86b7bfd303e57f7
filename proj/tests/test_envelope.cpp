#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "envelope/common.hpp"
#include "envelope/data.hpp"
#include "envelope/envelope.hpp"
#include "envelope/first_stage.hpp"
#include "envelope/reference_dgps.hpp"
#include "envelope/simlab.hpp"

using namespace envelope;

namespace {

RegressionSurface make_surface(const std::vector<double>& labels,
                               const std::vector<std::vector<double>>& rows) {
  RegressionSurface surface(FiniteIndexSet::from_values(labels), rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t x = 0; x < rows[t].size(); ++x) surface.at(t, x) = rows[t][x];
  }
  return surface;
}

Sample outcome_only_sample(const std::vector<double>& ys) {
  std::vector<Observation> rows;
  for (double y : ys) rows.push_back({1, 1, y, std::nullopt, 0});
  SampleSchema schema;
  schema.num_cells = 1;
  std::set<double> distinct(ys.begin(), ys.end());
  schema.outcome_support.assign(distinct.begin(), distinct.end());
  return validate_sample(rows, schema);
}

// Score family whose signal is the raw outcome; singleton index set.
ScoreFamily outcome_mean_family() {
  ScoreFamily family;
  family.labels = FiniteIndexSet::from_codes({1});
  family.surface = [](std::size_t, std::size_t, int) { return 0.0; };
  family.signal = [](std::size_t, const Observation& w, int) { return w.y; };
  return family;
}

}  // namespace

TEST_CASE("classify: two-point argmin with runner-up gap") {
  const RegressionSurface surface = make_surface({1.0, 0.0}, {{0.7}, {0.4}});
  const ClassifierMap map = classify(surface, Direction::minimize);
  CHECK(map.chosen[0] == 1);
  CHECK(map.runner_up_gap[0] == Catch::Approx(0.3));
}

TEST_CASE("classify: exact tie picks the first declared label") {
  const RegressionSurface surface = make_surface({1.0, 0.0}, {{0.5}, {0.5}});
  const ClassifierMap map = classify(surface, Direction::minimize);
  CHECK(map.chosen[0] == 0);
  CHECK(std::isinf(map.runner_up_gap[0]));  // every label attains the optimum
}

TEST_CASE("classify: singleton index set has an infinite gap") {
  const RegressionSurface surface = make_surface({2.0}, {{0.9}});
  const ClassifierMap map = classify(surface, Direction::minimize);
  CHECK(map.chosen[0] == 0);
  CHECK(std::isinf(map.runner_up_gap[0]));
}

TEST_CASE("classify is invariant to per-cell shifts and positive scaling") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cells = 1 + rng.uniform_index(4);
    const std::size_t num_labels = 2 + rng.uniform_index(4);
    std::vector<double> labels(num_labels);
    for (std::size_t t = 0; t < num_labels; ++t) labels[t] = static_cast<double>(t);
    RegressionSurface surface(FiniteIndexSet::from_values(labels), cells);
    for (auto& v : surface.values) v = rng.uniform_range(-1.0, 1.0);

    RegressionSurface shifted = surface;
    const double scale = rng.uniform_range(0.1, 4.0);
    for (std::size_t x = 0; x < cells; ++x) {
      const double shift = rng.uniform_range(-2.0, 2.0);
      for (std::size_t t = 0; t < num_labels; ++t) {
        shifted.at(t, x) = scale * (surface.at(t, x) + shift);
      }
    }
    for (Direction dir : {Direction::minimize, Direction::maximize}) {
      CHECK(classify(surface, dir).chosen == classify(shifted, dir).chosen);
    }
  }
}

TEST_CASE("singleton index set collapses the estimator to the plain mean") {
  const Sample sample = outcome_only_sample({0.5, 1.5, -0.25, 2.0, 0.75, 1.0});
  const FoldAssignment folds = make_folds(sample.size(), 2, 3);
  const EnvelopeEstimate est =
      estimate(sample, folds, outcome_mean_family(), Direction::minimize, 0.95);

  double mean = 0.0;
  for (const auto& w : sample.rows) mean += w.y;
  mean /= static_cast<double>(sample.size());
  double var = 0.0;
  for (const auto& w : sample.rows) var += (w.y - mean) * (w.y - mean);
  var /= static_cast<double>(sample.size());  // biased, /N

  CHECK(std::abs(est.psi_hat - mean) <= 1e-15);
  CHECK(est.variance_hat == Catch::Approx(var).margin(1e-12));
  CHECK(est.se == Catch::Approx(std::sqrt(var / 6.0)).margin(1e-12));
}

TEST_CASE("estimate invariants: variance plug-in identity and CI shape") {
  const Sample sample = outcome_only_sample({1.0, 2.0, 3.0, 4.0, 0.0, -1.0, 2.5, 1.25});
  const FoldAssignment folds = make_folds(sample.size(), 4, 9);
  const EnvelopeEstimate est =
      estimate(sample, folds, outcome_mean_family(), Direction::minimize, 0.95);
  double sq = 0.0;
  for (const auto& w : sample.rows) sq += w.y * w.y;
  sq /= static_cast<double>(sample.size());
  CHECK(est.variance_hat == Catch::Approx(sq - est.psi_hat * est.psi_hat).margin(1e-12));
  CHECK(est.ci_lo <= est.psi_hat);
  CHECK(est.psi_hat <= est.ci_hi);
  const double rescaled = est.se * std::sqrt(static_cast<double>(est.n));
  CHECK(rescaled * rescaled == Catch::Approx(est.variance_hat).margin(1e-12));
  CHECK(est.per_fold_means.size() == 4);
}

TEST_CASE("two-cell oracle nuisance reproduces the enumerated score mean") {
  // discrete DGP with known surfaces injected as the nuisance
  const DgpSpec spec = make_frechet_reference();
  const std::size_t n = 600;
  const Sample sample = simulate(spec, n, 31);
  const FoldAssignment folds = make_folds(n, 3, 7);
  const FrechetNuisance oracle = oracle_frechet_nuisance(spec, 3);

  ScoreFamily family;
  family.labels = FiniteIndexSet::from_codes({1, 0});
  family.surface = [&](std::size_t t, std::size_t x, int k) {
    return oracle.s.at(k, t, x);
  };
  family.signal = [&](std::size_t t, const Observation& w, int k) {
    const double mu = oracle.mu1.at(k, 0, static_cast<std::size_t>(w.x));
    const double mu_t = (t == 0) ? mu : 1.0 - mu;
    const int arm = (t == 0) ? 1 : 0;
    const double fitted = oracle.s.at(k, t, static_cast<std::size_t>(w.x));
    return ((w.d == arm) ? 1.0 : 0.0) / mu_t * (w.s - fitted) + fitted;
  };
  const EnvelopeEstimate est =
      estimate(sample, folds, family, Direction::minimize, 0.95);

  // brute-force enumeration over the sample with the true argmin per cell
  double brute = 0.0;
  for (const auto& w : sample.rows) {
    const std::size_t x = static_cast<std::size_t>(w.x);
    const bool treated_smaller = spec.selection->s1[x] < spec.selection->s0[x];
    const std::size_t t = treated_smaller ? 0 : 1;
    const double mu = spec.mu1[x];
    const double mu_t = (t == 0) ? mu : 1.0 - mu;
    const int arm = (t == 0) ? 1 : 0;
    const double fitted = (t == 0) ? spec.selection->s1[x] : spec.selection->s0[x];
    brute += ((w.d == arm) ? 1.0 : 0.0) / mu_t * (w.s - fitted) + fitted;
  }
  brute /= static_cast<double>(n);
  CHECK(est.psi_hat == Catch::Approx(brute).margin(1e-12));
}

TEST_CASE("direction duality: max on g equals minus min on -g") {
  const DgpSpec spec = make_frechet_reference();
  const Sample sample = simulate(spec, 500, 13);
  const FoldAssignment folds = make_folds(500, 5, 2);
  const FrechetNuisance nuisance = fit_frechet_nuisance(sample, folds);

  ScoreFamily family;
  family.labels = FiniteIndexSet::from_codes({1, 0});
  family.surface = [&](std::size_t t, std::size_t x, int k) {
    return nuisance.s.at(k, t, x);
  };
  family.signal = [&](std::size_t t, const Observation& w, int k) {
    return nuisance.s.at(k, t, static_cast<std::size_t>(w.x)) + 0.1 * w.d;
  };
  ScoreFamily negated;
  negated.labels = family.labels;
  negated.surface = [&](std::size_t t, std::size_t x, int k) {
    return -family.surface(t, x, k);
  };
  negated.signal = [&](std::size_t t, const Observation& w, int k) {
    return -family.signal(t, w, k);
  };
  const EnvelopeEstimate max_est =
      estimate(sample, folds, family, Direction::maximize, 0.95);
  const EnvelopeEstimate min_est =
      estimate(sample, folds, negated, Direction::minimize, 0.95);
  CHECK(max_est.psi_hat == Catch::Approx(-min_est.psi_hat).margin(1e-14));
  CHECK(max_est.variance_hat == Catch::Approx(min_est.variance_hat).margin(1e-12));
}

TEST_CASE("non-finite scores are a hard error naming the row") {
  const Sample sample = outcome_only_sample({1.0, 2.0, 3.0, 4.0});
  const FoldAssignment folds = make_folds(4, 2, 0);
  ScoreFamily family = outcome_mean_family();
  family.signal = [](std::size_t, const Observation& w, int) {
    return w.y == 3.0 ? kNaN : w.y;
  };
  try {
    estimate(sample, folds, family, Direction::minimize, 0.95);
    FAIL("expected NonFiniteScore");
  } catch (const EnvelopeError& e) {
    CHECK(e.code() == ErrorCode::non_finite_score);
    CHECK(e.detail().find("row 2") != std::string::npos);
  }
}

TEST_CASE("oracle comparison: identical nuisances give a zero gap") {
  const DgpSpec spec = make_frechet_reference();
  const Sample sample = simulate(spec, 400, 3);
  const FoldAssignment folds = make_folds(400, 4, 5);
  ScoreFamily family = outcome_mean_family();
  family.signal = [](std::size_t, const Observation& w, int) {
    return static_cast<double>(w.s);
  };
  const OracleComparison cmp = estimate_with_oracle(
      sample, folds, family, family, Direction::minimize, 0.95);
  CHECK(cmp.root_n_gap == 0.0);
}

TEST_CASE("level shifts leave the classifier and nuisance-free scores alone") {
  // shifting every surface row by a constant keeps the argmin, and scores
  // that do not involve the surface are untouched: the gap is exactly zero
  const DgpSpec spec = make_frechet_reference();
  const Sample sample = simulate(spec, 400, 23);
  const FoldAssignment folds = make_folds(400, 4, 11);
  const FrechetNuisance nuisance = fit_frechet_nuisance(sample, folds);

  const auto signal = [&](std::size_t t, const Observation& w, int) {
    return (w.d == (t == 0 ? 1 : 0)) ? 1.0 : -1.0;
  };
  ScoreFamily base;
  base.labels = FiniteIndexSet::from_codes({1, 0});
  base.surface = [&](std::size_t t, std::size_t x, int k) {
    return nuisance.s.at(k, t, x);
  };
  base.signal = signal;
  ScoreFamily shifted = base;
  shifted.surface = [&](std::size_t t, std::size_t x, int k) {
    return nuisance.s.at(k, t, x) + 0.37;
  };
  const OracleComparison cmp = estimate_with_oracle(
      sample, folds, shifted, base, Direction::minimize, 0.95);
  CHECK(cmp.root_n_gap == 0.0);
}

TEST_CASE("oracle property: the root-n gap shrinks from n=500 to n=8000") {
  const DgpSpec spec = make_frechet_reference();
  McConfig config;
  config.app = Application::frechet;
  config.reps = 60;
  config.seed = 2;
  config.oracle_track = true;
  config.n = 500;
  const double gap_small = monte_carlo(spec, config)[1].mean_abs_root_n_gap;
  config.n = 8000;
  const double gap_large = monte_carlo(spec, config)[1].mean_abs_root_n_gap;
  CHECK(gap_large < gap_small);
}

TEST_CASE("margin histogram: constant gap puts no mass below the thresholds") {
  const RegressionSurface surface =
      make_surface({1.0, 0.0}, {{0.8, 0.8, 0.8}, {0.5, 0.5, 0.5}});
  const MarginHistogram hist =
      margin_histogram(surface, {0.25, 0.5, 0.25});
  for (double t : margin_thresholds()) CHECK(hist.mass_below(t) == 0.0);
  CHECK_FALSE(hist.empty());
}

TEST_CASE("margin histogram: uniform binary gap has mass 0.1 below 0.1") {
  // s(1,x) - s(0,x) uniform on [-1,1] via 1000 quantile-midpoint cells
  const std::size_t cells = 1000;
  RegressionSurface surface(FiniteIndexSet::from_codes({1, 0}), cells);
  std::vector<double> weights(cells, 1.0 / static_cast<double>(cells));
  for (std::size_t x = 0; x < cells; ++x) {
    const double diff =
        (2.0 * (static_cast<double>(x) + 0.5) - static_cast<double>(cells)) /
        static_cast<double>(cells);
    surface.at(0, x) = 0.5 + diff;
    surface.at(1, x) = 0.5;
  }
  const MarginHistogram hist = margin_histogram(surface, weights);
  CHECK(hist.mass_below(0.1) == Catch::Approx(0.1).margin(1e-12));
  CHECK(hist.mass_below(0.05) == Catch::Approx(0.05).margin(1e-12));
}

TEST_CASE("margin histogram: singleton index set is empty") {
  const RegressionSurface surface = make_surface({1.0}, {{0.4, 0.6}});
  const MarginHistogram hist = margin_histogram(surface, {0.5, 0.5});
  CHECK(hist.empty());
  CHECK(hist.mass_below(10.0) == 0.0);
}

TEST_CASE("ratio estimate applies the delta method and guards the denominator") {
  const FoldAssignment folds = make_folds(6, 2, 1);
  const std::vector<double> numerator = {1.0, 2.0, 1.5, 0.5, 1.0, 1.2};
  const std::vector<double> denominator = {0.9, 1.1, 1.0, 0.8, 1.2, 1.0};
  const EnvelopeEstimate est =
      ratio_estimate(numerator, denominator, folds, 0.95, 0.01);
  const double num_mean = pairwise_mean(numerator);
  const double den_mean = pairwise_mean(denominator);
  CHECK(est.psi_hat == Catch::Approx(num_mean / den_mean));
  CHECK(est.variance_hat >= 0.0);
  CHECK(est.ci_lo <= est.psi_hat);

  const std::vector<double> tiny(6, 1e-5);
  CHECK_THROWS_AS(ratio_estimate(numerator, tiny, folds, 0.95, 0.01),
                  EnvelopeError);
}
