#pragma once

// Data-generating processes with exactly computable targets, brute-force
// population oracles, oracle-nuisance injection, and Monte Carlo harnesses
// for bias, coverage, variance consistency and the oracle property.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "envelope/apps.hpp"
#include "envelope/cvar.hpp"
#include "envelope/data.hpp"
#include "envelope/envelope.hpp"
#include "envelope/first_stage.hpp"
#include "envelope/saddle.hpp"

namespace envelope {

// ---------------------------------------------------------------------------
// DGP specification. Exactly one mechanism section must be present; all
// ground truths are computed from these tables by finite enumeration.

struct SelectionDgp {
  std::vector<double> s1;  // P(S(1)=1 | X=x)
  std::vector<double> s0;  // P(S(0)=1 | X=x); coupled comonotonically
  std::vector<double> outcome_support;          // empty: selection only
  std::vector<std::vector<double>> pmf1;        // law of Y | D=1, S=1, X=x
  std::vector<std::vector<double>> pmf0;        // optional; defaults to pmf1
};

struct RoyDgp {
  std::vector<int> z_support;
  std::vector<std::vector<double>> z_probs;  // [cell][z]
  std::vector<std::vector<double>> p11;      // P(S=1, D=1 | Z=z, X=x)
  std::vector<std::vector<double>> p10;      // P(S=1, D=0 | Z=z, X=x)
};

struct ArmsDgp {
  std::vector<double> support;
  std::vector<std::vector<double>> pmf1;  // law of Y(1) | X=x
  std::vector<std::vector<double>> pmf0;  // law of Y(0) | X=x
};

// Synthetic minimax mechanism: signals g_{k,t}(W) = base[x][k,t] + gain[k,t]*y
// with y in {-1,+1} and E[y | X=x] = outcome_mean[x], so the surface is
// base[x][k,t] + gain[k,t]*outcome_mean[x].
struct SaddleDgp {
  std::size_t num_kappa = 0;
  std::size_t num_t = 0;
  std::vector<std::vector<double>> base;  // [cell][kappa*num_t + t]
  std::vector<double> gain;               // [kappa*num_t + t]
  std::vector<double> outcome_mean;       // per cell, in (-1, 1)
};

struct DgpSpec {
  std::string name;
  std::vector<double> x_probs;
  std::vector<double> mu1;  // used by the selection and arms mechanisms
  double margin_knob = 0.0;
  std::optional<SelectionDgp> selection;
  std::optional<RoyDgp> roy;
  std::optional<ArmsDgp> arms;
  std::optional<SaddleDgp> saddle;

  std::size_t num_cells() const { return x_probs.size(); }

  void validate() const {
    require(!x_probs.empty(), ErrorCode::config_error,
            "DGP has no covariate cells");
    double sum = 0.0;
    for (double p : x_probs) {
      require(p >= 0.0, ErrorCode::config_error, "negative cell probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-12, ErrorCode::config_error,
            "covariate marginal sums to " + std::to_string(sum));
    const int sections = (selection ? 1 : 0) + (roy ? 1 : 0) + (arms ? 1 : 0) +
                         (saddle ? 1 : 0);
    require(sections == 1, ErrorCode::config_error,
            "DGP must declare exactly one mechanism section");
    if (selection || arms) {
      require(mu1.size() == num_cells(), ErrorCode::config_error,
              "mu1 table does not match the cell count");
    }
  }
};

enum class Application {
  frechet,
  lee_binary,
  lee_discrete,
  roy,
  makarov,
  welfare_worst,
  welfare_best,
  saddle_value,
};

enum class Target {
  frechet_lower,
  frechet_upper,
  lee_binary_lower,
  lee_binary_upper,
  lee_discrete_lower,
  lee_discrete_upper,
  roy_10,
  roy_01,
  makarov_lower,
  makarov_upper,
  welfare_worst,
  welfare_best,
  saddle_value,
};

inline const char* target_name(Target t) {
  switch (t) {
    case Target::frechet_lower: return "frechet_lower";
    case Target::frechet_upper: return "frechet_upper";
    case Target::lee_binary_lower: return "lee_binary_lower";
    case Target::lee_binary_upper: return "lee_binary_upper";
    case Target::lee_discrete_lower: return "lee_discrete_lower";
    case Target::lee_discrete_upper: return "lee_discrete_upper";
    case Target::roy_10: return "roy_10";
    case Target::roy_01: return "roy_01";
    case Target::makarov_lower: return "makarov_lower";
    case Target::makarov_upper: return "makarov_upper";
    case Target::welfare_worst: return "welfare_worst";
    case Target::welfare_best: return "welfare_best";
    case Target::saddle_value: return "saddle_value";
  }
  return "unknown";
}

inline const char* application_name(Application app) {
  switch (app) {
    case Application::frechet: return "frechet";
    case Application::lee_binary: return "lee_binary";
    case Application::lee_discrete: return "lee_discrete";
    case Application::roy: return "roy";
    case Application::makarov: return "makarov";
    case Application::welfare_worst: return "welfare_worst";
    case Application::welfare_best: return "welfare_best";
    case Application::saddle_value: return "saddle_value";
  }
  return "unknown";
}

inline Application parse_application(const std::string& name) {
  for (Application app :
       {Application::frechet, Application::lee_binary, Application::lee_discrete,
        Application::roy, Application::makarov, Application::welfare_worst,
        Application::welfare_best, Application::saddle_value}) {
    if (name == application_name(app)) return app;
  }
  fail(ErrorCode::unsupported_application, "unknown application '" + name + "'");
}

inline std::vector<Target> application_targets(Application app) {
  switch (app) {
    case Application::frechet:
      return {Target::frechet_lower, Target::frechet_upper};
    case Application::lee_binary:
      return {Target::lee_binary_lower, Target::lee_binary_upper};
    case Application::lee_discrete:
      return {Target::lee_discrete_lower, Target::lee_discrete_upper};
    case Application::roy:
      return {Target::roy_10, Target::roy_01};
    case Application::makarov:
      return {Target::makarov_lower, Target::makarov_upper};
    case Application::welfare_worst:
      return {Target::welfare_worst};
    case Application::welfare_best:
      return {Target::welfare_best};
    case Application::saddle_value:
      return {Target::saddle_value};
  }
  return {};
}

// Per-application knobs shared by estimation and ground truth.
struct AppParams {
  double tau = 0.5;
  std::vector<double> u_grid;  // empty: 21-point default for the app
  double effect_point = 0.0;   // Makarov d
};

inline std::vector<double> resolved_u_grid(Application app,
                                           const AppParams& params) {
  if (!params.u_grid.empty()) return params.u_grid;
  if (app == Application::welfare_best) return best_case_u_grid(params.tau);
  return worst_case_u_grid(params.tau);
}

// ---------------------------------------------------------------------------
// Simulation.

inline Sample simulate(const DgpSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Sample sample;
  sample.schema.num_cells = static_cast<int>(spec.num_cells());
  sample.rows.reserve(n);

  if (spec.selection) {
    const auto& sec = *spec.selection;
    const bool with_outcome = !sec.outcome_support.empty();
    sample.schema.outcome_support =
        with_outcome ? sec.outcome_support : std::vector<double>{0.0};
    for (std::size_t i = 0; i < n; ++i) {
      Observation w;
      w.x = static_cast<int>(rng.categorical(spec.x_probs));
      w.d = rng.bernoulli(spec.mu1[static_cast<std::size_t>(w.x)]);
      // comonotone coupling: S(1) >= S(0) whenever s1 >= s0
      const double u = rng.uniform();
      const int s_treat = u < sec.s1[static_cast<std::size_t>(w.x)] ? 1 : 0;
      const int s_control = u < sec.s0[static_cast<std::size_t>(w.x)] ? 1 : 0;
      w.s = (w.d == 1) ? s_treat : s_control;
      if (w.s == 1) {
        if (with_outcome) {
          const auto& pmf =
              (w.d == 0 && !sec.pmf0.empty())
                  ? sec.pmf0[static_cast<std::size_t>(w.x)]
                  : sec.pmf1[static_cast<std::size_t>(w.x)];
          w.y = sec.outcome_support[rng.categorical(pmf)];
        } else {
          w.y = 0.0;
        }
      }
      sample.rows.push_back(w);
    }
    return sample;
  }

  if (spec.roy) {
    const auto& sec = *spec.roy;
    sample.schema.z_support = sec.z_support;
    sample.schema.outcome_support = {0.0};
    for (std::size_t i = 0; i < n; ++i) {
      Observation w;
      w.x = static_cast<int>(rng.categorical(spec.x_probs));
      const std::size_t zi = rng.categorical(sec.z_probs[static_cast<std::size_t>(w.x)]);
      w.z = sec.z_support[zi];
      const double p11 = sec.p11[static_cast<std::size_t>(w.x)][zi];
      const double p10 = sec.p10[static_cast<std::size_t>(w.x)][zi];
      const double cat[3] = {p11, p10, 1.0 - p11 - p10};
      switch (rng.categorical(cat)) {
        case 0: w.d = 1; w.s = 1; break;
        case 1: w.d = 0; w.s = 1; break;
        default: w.s = 0; w.d = rng.bernoulli(0.5); break;
      }
      if (w.s == 1) w.y = 0.0;
      sample.rows.push_back(w);
    }
    return sample;
  }

  if (spec.arms) {
    const auto& sec = *spec.arms;
    sample.schema.outcome_support = sec.support;
    for (std::size_t i = 0; i < n; ++i) {
      Observation w;
      w.x = static_cast<int>(rng.categorical(spec.x_probs));
      w.d = rng.bernoulli(spec.mu1[static_cast<std::size_t>(w.x)]);
      w.s = 1;
      const auto& pmf = (w.d == 1) ? sec.pmf1[static_cast<std::size_t>(w.x)]
                                   : sec.pmf0[static_cast<std::size_t>(w.x)];
      w.y = sec.support[rng.categorical(pmf)];
      sample.rows.push_back(w);
    }
    return sample;
  }

  const auto& sec = *spec.saddle;
  sample.schema.outcome_support = {-1.0, 1.0};
  for (std::size_t i = 0; i < n; ++i) {
    Observation w;
    w.x = static_cast<int>(rng.categorical(spec.x_probs));
    w.d = 1;
    w.s = 1;
    const double p_up = 0.5 * (1.0 + sec.outcome_mean[static_cast<std::size_t>(w.x)]);
    w.y = rng.bernoulli(p_up) ? 1.0 : -1.0;
    sample.rows.push_back(w);
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Exact population targets by cell enumeration.

namespace detail {

inline DiscreteDistribution cell_law(const std::vector<double>& support,
                                     const std::vector<double>& pmf) {
  DiscreteDistribution law;
  law.support = support;
  law.probs = pmf;
  return law;
}

// Lee classifier objective beta*s0 + s1*E[tail(Y-beta)] on the support grid.
inline double lee_cell_bound(const DiscreteDistribution& law, double s1,
                             double s0, bool upper) {
  double best = upper ? kInf : -kInf;
  for (double beta : law.support) {
    double tail = 0.0;
    for (std::size_t j = 0; j < law.support.size(); ++j) {
      const double centered = law.support[j] - beta;
      tail += law.probs[j] *
              (upper ? std::max(centered, 0.0) : std::min(centered, 0.0));
    }
    const double value = beta * s0 + s1 * tail;
    best = upper ? std::min(best, value) : std::max(best, value);
  }
  return best;
}

inline double makarov_cell_h(const ArmsDgp& arms, std::size_t x, double t,
                             double d) {
  const DiscreteDistribution law1 = cell_law(arms.support, arms.pmf1[x]);
  const DiscreteDistribution law0 = cell_law(arms.support, arms.pmf0[x]);
  return law1.cdf(t) - law0.cdf_left(t - d);
}

inline double welfare_cell_value(const ArmsDgp& arms, std::size_t x, double tau,
                                 const std::vector<double>& u_grid, bool best) {
  const DiscreteDistribution law1 = cell_law(arms.support, arms.pmf1[x]);
  const DiscreteDistribution law0 = cell_law(arms.support, arms.pmf0[x]);
  double extreme = best ? kInf : -kInf;
  for (double u : u_grid) {
    const double level0 = best ? u - tau : u - tau + 1.0;
    const double diff =
        quantile_or_min(law1, u) - quantile_or_min(law0, level0);
    extreme = best ? std::min(extreme, diff) : std::max(extreme, diff);
  }
  return std::max(extreme, 0.0);
}

inline SaddleMatrix saddle_cell_matrix(const SaddleDgp& sec, std::size_t x) {
  SaddleMatrix m(sec.num_kappa, sec.num_t);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = sec.base[x][i] + sec.gain[i] * sec.outcome_mean[x];
  }
  return m;
}

}  // namespace detail

inline double true_psi(const DgpSpec& spec, Target target,
                       const AppParams& params = {}) {
  spec.validate();
  const std::size_t cells = spec.num_cells();
  const auto weighted = [&](const std::function<double(std::size_t)>& value) {
    double acc = 0.0;
    for (std::size_t x = 0; x < cells; ++x) acc += spec.x_probs[x] * value(x);
    return acc;
  };

  switch (target) {
    case Target::frechet_lower:
    case Target::frechet_upper: {
      require(spec.selection.has_value(), ErrorCode::unsupported_application,
              "DGP lacks a selection mechanism");
      const auto& sec = *spec.selection;
      if (target == Target::frechet_upper) {
        return weighted([&](std::size_t x) {
          return std::min(sec.s1[x], sec.s0[x]);
        });
      }
      return weighted([&](std::size_t x) {
        return std::max(sec.s1[x] + sec.s0[x] - 1.0, 0.0);
      });
    }
    case Target::lee_binary_lower:
    case Target::lee_binary_upper:
    case Target::lee_discrete_lower:
    case Target::lee_discrete_upper: {
      require(spec.selection.has_value() &&
                  !spec.selection->outcome_support.empty(),
              ErrorCode::unsupported_application,
              "DGP lacks a selection-with-outcome mechanism");
      const auto& sec = *spec.selection;
      const bool upper = (target == Target::lee_binary_upper ||
                          target == Target::lee_discrete_upper);
      const double numerator = weighted([&](std::size_t x) {
        return detail::lee_cell_bound(
            detail::cell_law(sec.outcome_support, sec.pmf1[x]), sec.s1[x],
            sec.s0[x], upper);
      });
      const double denominator =
          weighted([&](std::size_t x) { return sec.s0[x]; });
      return numerator / denominator;
    }
    case Target::roy_10:
    case Target::roy_01: {
      require(spec.roy.has_value(), ErrorCode::unsupported_application,
              "DGP lacks a Roy mechanism");
      const auto& sec = *spec.roy;
      const auto& table = (target == Target::roy_10) ? sec.p11 : sec.p10;
      return weighted([&](std::size_t x) {
        double best = kInf;
        for (double v : table[x]) best = std::min(best, v);
        return best;
      });
    }
    case Target::makarov_lower:
    case Target::makarov_upper: {
      require(spec.arms.has_value(), ErrorCode::unsupported_application,
              "DGP lacks a two-arm outcome mechanism");
      const auto& sec = *spec.arms;
      const double d = params.effect_point;
      if (target == Target::makarov_lower) {
        return weighted([&](std::size_t x) {
          double best = 0.0;
          for (double t : sec.support) {
            best = std::max(best, detail::makarov_cell_h(sec, x, t, d));
          }
          return best;
        });
      }
      return weighted([&](std::size_t x) {
        double worst = 0.0;
        for (double t : sec.support) {
          worst = std::min(worst, detail::makarov_cell_h(sec, x, t, d));
        }
        return worst + 1.0;
      });
    }
    case Target::welfare_worst:
    case Target::welfare_best: {
      require(spec.arms.has_value(), ErrorCode::unsupported_application,
              "DGP lacks a two-arm outcome mechanism");
      const bool best = (target == Target::welfare_best);
      const Application app =
          best ? Application::welfare_best : Application::welfare_worst;
      const std::vector<double> grid = resolved_u_grid(app, params);
      return weighted([&](std::size_t x) {
        return detail::welfare_cell_value(*spec.arms, x, params.tau, grid, best);
      });
    }
    case Target::saddle_value: {
      require(spec.saddle.has_value(), ErrorCode::unsupported_application,
              "DGP lacks a saddle mechanism");
      return weighted([&](std::size_t x) {
        const SaddleSearch search =
            find_saddle(detail::saddle_cell_matrix(*spec.saddle, x));
        require(search.cell.has_value(), ErrorCode::no_saddle,
                "true surface admits no saddle at cell " + std::to_string(x));
        return search.cell->value;
      });
    }
  }
  fail(ErrorCode::unsupported_application, "unhandled target");
}

// ---------------------------------------------------------------------------
// Oracle nuisances: the true surfaces injected as every fold's fit.

namespace detail {

inline RegressionSurface single_label_surface(const std::vector<double>& values) {
  RegressionSurface surface(FiniteIndexSet::from_codes({1}), values.size());
  for (std::size_t x = 0; x < values.size(); ++x) surface.at(0, x) = values[x];
  return surface;
}

}  // namespace detail

inline FrechetNuisance oracle_frechet_nuisance(const DgpSpec& spec,
                                               int num_folds) {
  const auto& sec = *spec.selection;
  RegressionSurface s(FiniteIndexSet::from_codes({1, 0}), spec.num_cells());
  for (std::size_t x = 0; x < spec.num_cells(); ++x) {
    s.at(0, x) = sec.s1[x];
    s.at(1, x) = sec.s0[x];
  }
  FrechetNuisance nuisance;
  nuisance.s = CrossFitSurface::constant(s, num_folds);
  nuisance.mu1 = CrossFitSurface::constant(
      detail::single_label_surface(spec.mu1), num_folds);
  return nuisance;
}

inline LeeNuisance oracle_lee_nuisance(const DgpSpec& spec, int num_folds) {
  const auto& sec = *spec.selection;
  LeeNuisance nuisance;
  nuisance.s1 = CrossFitSurface::constant(
      detail::single_label_surface(sec.s1), num_folds);
  nuisance.s0 = CrossFitSurface::constant(
      detail::single_label_surface(sec.s0), num_folds);
  nuisance.mu1 = CrossFitSurface::constant(
      detail::single_label_surface(spec.mu1), num_folds);
  std::vector<DiscreteDistribution> cells(spec.num_cells());
  for (std::size_t x = 0; x < spec.num_cells(); ++x) {
    cells[x] = detail::cell_law(sec.outcome_support, sec.pmf1[x]);
  }
  nuisance.law1 = CrossFitCdf::constant(cells, num_folds);
  return nuisance;
}

inline RoyNuisance oracle_roy_nuisance(const DgpSpec& spec, int num_folds) {
  const auto& sec = *spec.roy;
  const FiniteIndexSet labels = FiniteIndexSet::from_codes(sec.z_support);
  const std::size_t cells = spec.num_cells();
  RegressionSurface d1(labels, cells), d0(labels, cells), pz(labels, cells);
  for (std::size_t x = 0; x < cells; ++x) {
    for (std::size_t zi = 0; zi < sec.z_support.size(); ++zi) {
      d1.at(zi, x) = sec.p11[x][zi];
      d0.at(zi, x) = sec.p10[x][zi];
      pz.at(zi, x) = sec.z_probs[x][zi];
    }
  }
  RoyNuisance nuisance;
  nuisance.joint_d1 = CrossFitSurface::constant(d1, num_folds);
  nuisance.joint_d0 = CrossFitSurface::constant(d0, num_folds);
  nuisance.z_prob = CrossFitSurface::constant(pz, num_folds);
  return nuisance;
}

inline MakarovNuisance oracle_makarov_nuisance(const DgpSpec& spec,
                                               int num_folds) {
  const auto& sec = *spec.arms;
  std::vector<DiscreteDistribution> arm1(spec.num_cells()), arm0(spec.num_cells());
  for (std::size_t x = 0; x < spec.num_cells(); ++x) {
    arm1[x] = detail::cell_law(sec.support, sec.pmf1[x]);
    arm0[x] = detail::cell_law(sec.support, sec.pmf0[x]);
  }
  MakarovNuisance nuisance;
  nuisance.arm1 = CrossFitCdf::constant(arm1, num_folds);
  nuisance.arm0 = CrossFitCdf::constant(arm0, num_folds);
  nuisance.mu1 = CrossFitSurface::constant(
      detail::single_label_surface(spec.mu1), num_folds);
  return nuisance;
}

inline WelfareNuisance oracle_welfare_nuisance(const DgpSpec& spec,
                                               int num_folds) {
  const auto& sec = *spec.arms;
  std::vector<DiscreteDistribution> arm1(spec.num_cells()), arm0(spec.num_cells());
  for (std::size_t x = 0; x < spec.num_cells(); ++x) {
    arm1[x] = detail::cell_law(sec.support, sec.pmf1[x]);
    arm0[x] = detail::cell_law(sec.support, sec.pmf0[x]);
  }
  WelfareNuisance nuisance;
  nuisance.arm1 = CrossFitCdf::constant(arm1, num_folds);
  nuisance.arm0 = CrossFitCdf::constant(arm0, num_folds);
  return nuisance;
}

inline CrossFitSurface oracle_saddle_mean_surface(const DgpSpec& spec,
                                                  int num_folds) {
  return CrossFitSurface::constant(
      detail::single_label_surface(spec.saddle->outcome_mean), num_folds);
}

// Feasible first stage for the synthetic saddle mechanism.
inline CrossFitSurface fit_saddle_mean_surface(const Sample& sample,
                                               const FoldAssignment& folds) {
  return cell_mean_fit(
      sample, folds, FiniteIndexSet::from_codes({1}),
      [](std::size_t, const Observation&) { return true; },
      [](std::size_t, const Observation& w) { return w.y; });
}

// Envelope saddle-value estimator for the synthetic mechanism.
inline SaddleEstimate saddle_value_estimate(const Sample& sample,
                                            const FoldAssignment& folds,
                                            const CrossFitSurface& mean_surface,
                                            const SaddleDgp& tables,
                                            double level) {
  std::vector<int> kappa_codes(tables.num_kappa), t_codes(tables.num_t);
  for (std::size_t i = 0; i < tables.num_kappa; ++i) kappa_codes[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < tables.num_t; ++i) t_codes[i] = static_cast<int>(i);
  SaddleScoreFamily family;
  family.kappa_labels = FiniteIndexSet::from_codes(kappa_codes);
  family.t_labels = FiniteIndexSet::from_codes(t_codes);
  family.surface = [&](std::size_t kappa, std::size_t t, std::size_t x, int k) {
    const std::size_t cell_index = kappa * tables.num_t + t;
    return tables.base[x][cell_index] +
           tables.gain[cell_index] * mean_surface.at(k, 0, x);
  };
  family.signal = [&](std::size_t kappa, std::size_t t, const Observation& w,
                      int k) {
    (void)k;
    const std::size_t cell_index = kappa * tables.num_t + t;
    return tables.base[static_cast<std::size_t>(w.x)][cell_index] +
           tables.gain[cell_index] * w.y;
  };
  return estimate_saddle(sample, folds, family, level);
}

// ---------------------------------------------------------------------------
// Margin validation: rejects specs whose runner-up gap (excluding exact ties)
// falls below the margin knob in any cell.

namespace detail {

inline double runner_up_gap(const std::vector<double>& values, bool maximize) {
  double best = values[0];
  for (double v : values) best = maximize ? std::max(best, v) : std::min(best, v);
  double gap = kInf;
  for (double v : values) {
    if (v != best) gap = std::min(gap, std::abs(v - best));
  }
  return gap;
}

// Margins against the saddle's own row and column.
inline double saddle_cross_margin(const SaddleMatrix& m, const SaddleCell& cell) {
  double margin = kInf;
  for (std::size_t t = 0; t < m.num_t; ++t) {
    if (t == cell.t) continue;
    const double diff = std::abs(m.at(cell.kappa, t) - cell.value);
    if (diff > 0.0) margin = std::min(margin, diff);
  }
  for (std::size_t k = 0; k < m.num_kappa; ++k) {
    if (k == cell.kappa) continue;
    const double diff = std::abs(m.at(k, cell.t) - cell.value);
    if (diff > 0.0) margin = std::min(margin, diff);
  }
  return margin;
}

}  // namespace detail

inline void validate_margin(const DgpSpec& spec, Application app,
                            const AppParams& params = {}) {
  if (spec.margin_knob <= 0.0) return;
  const double knob = spec.margin_knob - 1e-9;  // slack for table arithmetic
  const auto check = [&](double gap, std::size_t x) {
    require(gap >= knob, ErrorCode::config_error,
            "margin knob " + std::to_string(knob) + " violated at cell " +
                std::to_string(x) + " (runner-up gap " + std::to_string(gap) +
                ")");
  };

  for (std::size_t x = 0; x < spec.num_cells(); ++x) {
    switch (app) {
      case Application::frechet: {
        const auto& sec = *spec.selection;
        check(detail::runner_up_gap({sec.s1[x], sec.s0[x]}, false), x);
        check(detail::runner_up_gap({sec.s1[x] + sec.s0[x] - 1.0, 0.0}, true), x);
        break;
      }
      case Application::lee_binary:
      case Application::lee_discrete: {
        const auto& sec = *spec.selection;
        const DiscreteDistribution law =
            detail::cell_law(sec.outcome_support, sec.pmf1[x]);
        for (bool upper : {true, false}) {
          std::vector<double> objective;
          for (double beta : law.support) {
            double tail = 0.0;
            for (std::size_t j = 0; j < law.support.size(); ++j) {
              const double centered = law.support[j] - beta;
              tail += law.probs[j] * (upper ? std::max(centered, 0.0)
                                            : std::min(centered, 0.0));
            }
            objective.push_back(beta * sec.s0[x] + sec.s1[x] * tail);
          }
          check(detail::runner_up_gap(objective, !upper), x);
        }
        break;
      }
      case Application::roy: {
        const auto& sec = *spec.roy;
        check(detail::runner_up_gap(sec.p11[x], false), x);
        check(detail::runner_up_gap(sec.p10[x], false), x);
        break;
      }
      case Application::makarov: {
        const auto& sec = *spec.arms;
        std::vector<double> branch{0.0};
        for (double t : sec.support) {
          branch.push_back(detail::makarov_cell_h(sec, x, t, params.effect_point));
        }
        check(detail::runner_up_gap(branch, true), x);
        check(detail::runner_up_gap(branch, false), x);
        break;
      }
      case Application::welfare_worst: {
        const auto& sec = *spec.arms;
        const DiscreteDistribution law1 = detail::cell_law(sec.support, sec.pmf1[x]);
        const DiscreteDistribution law0 = detail::cell_law(sec.support, sec.pmf0[x]);
        std::vector<double> branch{0.0};
        for (double u : resolved_u_grid(app, params)) {
          branch.push_back(detail::quantile_or_min(law1, u) -
                           detail::quantile_or_min(law0, u - params.tau + 1.0));
        }
        check(detail::runner_up_gap(branch, true), x);
        break;
      }
      case Application::welfare_best: {
        const auto& sec = *spec.arms;
        const DiscreteDistribution law1 = detail::cell_law(sec.support, sec.pmf1[x]);
        const DiscreteDistribution law0 = detail::cell_law(sec.support, sec.pmf0[x]);
        const std::vector<double> grid = resolved_u_grid(app, params);
        SaddleMatrix m(2, grid.size());
        for (std::size_t t = 0; t < grid.size(); ++t) {
          m.at(0, t) = detail::quantile_or_min(law1, grid[t]) -
                       detail::quantile_or_min(law0, grid[t] - params.tau);
          m.at(1, t) = 0.0;
        }
        const SaddleSearch search = find_saddle(m);
        require(search.cell.has_value(), ErrorCode::no_saddle,
                "welfare grid admits no saddle at cell " + std::to_string(x));
        check(detail::saddle_cross_margin(m, *search.cell), x);
        break;
      }
      case Application::saddle_value: {
        const SaddleMatrix m = detail::saddle_cell_matrix(*spec.saddle, x);
        const SaddleSearch search = find_saddle(m);
        require(search.cell.has_value(), ErrorCode::no_saddle,
                "true surface admits no saddle at cell " + std::to_string(x));
        check(detail::saddle_cross_margin(m, *search.cell), x);
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// One estimation pass of an application over a sample.

struct TargetResult {
  Target target = Target::frechet_upper;
  double psi_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

namespace detail {

inline TargetResult to_result(Target target, const EnvelopeEstimate& est) {
  return {target, est.psi_hat, est.se, est.ci_lo, est.ci_hi};
}

inline TargetResult to_result(Target target, const SaddleEstimate& est) {
  return {target, est.psi_hat, est.se, est.ci_lo, est.ci_hi};
}

}  // namespace detail

// Runs one application on a fixed sample/fold split. When `oracle_spec` is
// non-null the true nuisances are injected instead of the fitted ones. When
// `known_design` is non-null the Lee applications use its treatment
// propensity as a design constant: their trimming scores are plain
// Horvitz-Thompson terms, nuisance-free only when the propensity is known.
inline std::vector<TargetResult> run_application(
    const Sample& sample, const FoldAssignment& folds, Application app,
    const AppParams& params, double level, const DgpSpec* oracle_spec = nullptr,
    const DgpSpec* known_design = nullptr) {
  const int K = folds.num_folds;
  const auto lee_nuisance = [&]() {
    if (oracle_spec) return oracle_lee_nuisance(*oracle_spec, K);
    LeeNuisance nuisance = fit_lee_nuisance(sample, folds);
    if (known_design) {
      nuisance.mu1 = CrossFitSurface::constant(
          detail::single_label_surface(known_design->mu1), K);
    }
    return nuisance;
  };
  switch (app) {
    case Application::frechet: {
      const FrechetNuisance nuisance = oracle_spec
                                           ? oracle_frechet_nuisance(*oracle_spec, K)
                                           : fit_frechet_nuisance(sample, folds);
      const FrechetBounds bounds = frechet_bounds(sample, folds, nuisance, level);
      return {detail::to_result(Target::frechet_lower, bounds.lower),
              detail::to_result(Target::frechet_upper, bounds.upper)};
    }
    case Application::lee_binary: {
      const LeeBounds bounds =
          lee_bounds_binary(sample, folds, lee_nuisance(), level);
      return {detail::to_result(Target::lee_binary_lower, bounds.lower),
              detail::to_result(Target::lee_binary_upper, bounds.upper)};
    }
    case Application::lee_discrete: {
      const LeeBounds bounds =
          lee_bounds_discrete(sample, folds, lee_nuisance(), level);
      return {detail::to_result(Target::lee_discrete_lower, bounds.lower),
              detail::to_result(Target::lee_discrete_upper, bounds.upper)};
    }
    case Application::roy: {
      const RoyNuisance nuisance = oracle_spec ? oracle_roy_nuisance(*oracle_spec, K)
                                               : fit_roy_nuisance(sample, folds);
      const RoyBounds bounds = roy_bounds(sample, folds, nuisance, level);
      return {detail::to_result(Target::roy_10, bounds.bound_10),
              detail::to_result(Target::roy_01, bounds.bound_01)};
    }
    case Application::makarov: {
      const MakarovNuisance nuisance =
          oracle_spec ? oracle_makarov_nuisance(*oracle_spec, K)
                      : fit_makarov_nuisance(sample, folds);
      const MakarovBounds bounds = makarov_cdf_bounds(
          sample, folds, nuisance, params.effect_point, level);
      return {detail::to_result(Target::makarov_lower, bounds.lower),
              detail::to_result(Target::makarov_upper, bounds.upper)};
    }
    case Application::welfare_worst: {
      const WelfareNuisance nuisance =
          oracle_spec ? oracle_welfare_nuisance(*oracle_spec, K)
                      : fit_welfare_nuisance(sample, folds);
      const EnvelopeEstimate est =
          worst_case_welfare(sample, folds, nuisance, params.tau,
                             resolved_u_grid(app, params), level);
      return {detail::to_result(Target::welfare_worst, est)};
    }
    case Application::welfare_best: {
      const WelfareNuisance nuisance =
          oracle_spec ? oracle_welfare_nuisance(*oracle_spec, K)
                      : fit_welfare_nuisance(sample, folds);
      const SaddleEstimate est =
          best_case_welfare(sample, folds, nuisance, params.tau,
                            resolved_u_grid(app, params), level);
      return {detail::to_result(Target::welfare_best, est)};
    }
    case Application::saddle_value: {
      // Needs the mechanism tables; runs through monte_carlo or directly via
      // saddle_value_estimate.
      fail(ErrorCode::unsupported_application,
           "saddle_value runs through monte_carlo or saddle_value_estimate");
    }
  }
  fail(ErrorCode::unsupported_application, "unhandled application");
}

// ---------------------------------------------------------------------------
// Monte Carlo harness.

struct McConfig {
  Application app = Application::frechet;
  std::size_t n = 4000;
  std::size_t reps = 500;
  std::uint64_t seed = 0;
  int num_folds = 5;
  double level = 0.95;
  AppParams params;
  bool oracle_track = false;
};

struct McReport {
  std::string target;
  std::size_t reps = 0;
  std::size_t n = 0;
  int num_folds = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  double true_value = 0.0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double mc_sd = 0.0;
  double mean_se = 0.0;
  double coverage = 0.0;
  double mean_abs_root_n_gap = kNaN;  // NaN when the oracle track is off
  double runtime_sec = 0.0;
};

inline std::vector<McReport> monte_carlo(const DgpSpec& spec,
                                         const McConfig& config) {
  spec.validate();
  require(config.reps >= 1, ErrorCode::config_error, "reps must be >= 1");
  validate_margin(spec, config.app, config.params);
  const auto targets = application_targets(config.app);
  const std::size_t num_targets = targets.size();
  const auto t_start = std::chrono::steady_clock::now();

  std::vector<std::vector<double>> psi(num_targets,
                                       std::vector<double>(config.reps));
  std::vector<std::vector<double>> se(num_targets,
                                      std::vector<double>(config.reps));
  std::vector<std::vector<double>> cover(num_targets,
                                         std::vector<double>(config.reps));
  std::vector<std::vector<double>> gap(num_targets,
                                       std::vector<double>(config.reps));

  parallel_for(
      config.reps,
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
          try {
            const std::uint64_t rep_seed = derive_seed(config.seed, r);
            const Sample sample = simulate(spec, config.n, rep_seed);
            const FoldAssignment folds =
                make_folds(config.n, config.num_folds, derive_seed(rep_seed, 1));
            std::vector<TargetResult> feasible;
            std::vector<TargetResult> oracle;
            if (config.app == Application::saddle_value) {
              const CrossFitSurface mean_hat = fit_saddle_mean_surface(sample, folds);
              const SaddleEstimate est = saddle_value_estimate(
                  sample, folds, mean_hat, *spec.saddle, config.level);
              feasible = {detail::to_result(Target::saddle_value, est)};
              if (config.oracle_track) {
                const SaddleEstimate oest = saddle_value_estimate(
                    sample, folds,
                    oracle_saddle_mean_surface(spec, config.num_folds),
                    *spec.saddle, config.level);
                oracle = {detail::to_result(Target::saddle_value, oest)};
              }
            } else {
              feasible = run_application(sample, folds, config.app,
                                         config.params, config.level, nullptr,
                                         &spec);
              if (config.oracle_track) {
                oracle = run_application(sample, folds, config.app,
                                         config.params, config.level, &spec);
              }
            }
            for (std::size_t j = 0; j < num_targets; ++j) {
              const double truth = true_psi(spec, targets[j], config.params);
              psi[j][r] = feasible[j].psi_hat;
              se[j][r] = feasible[j].se;
              cover[j][r] = (feasible[j].ci_lo <= truth &&
                             truth <= feasible[j].ci_hi)
                                ? 1.0
                                : 0.0;
              gap[j][r] = config.oracle_track
                              ? std::sqrt(static_cast<double>(config.n)) *
                                    std::abs(feasible[j].psi_hat -
                                             oracle[j].psi_hat)
                              : kNaN;
            }
          } catch (const EnvelopeError& e) {
            throw EnvelopeError(e.code(), "rep " + std::to_string(r) + ": " +
                                              e.detail());
          }
        }
      },
      1);

  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  std::vector<McReport> reports;
  reports.reserve(num_targets);
  for (std::size_t j = 0; j < num_targets; ++j) {
    McReport report;
    report.target = target_name(targets[j]);
    report.reps = config.reps;
    report.n = config.n;
    report.num_folds = config.num_folds;
    report.level = config.level;
    report.seed = config.seed;
    report.true_value = true_psi(spec, targets[j], config.params);
    report.mean_estimate = pairwise_mean(psi[j]);
    report.mean_bias = report.mean_estimate - report.true_value;
    std::vector<double> centered_sq(config.reps);
    for (std::size_t r = 0; r < config.reps; ++r) {
      const double c = psi[j][r] - report.mean_estimate;
      centered_sq[r] = c * c;
    }
    report.mc_sd = config.reps > 1
                       ? std::sqrt(pairwise_sum(centered_sq) /
                                   static_cast<double>(config.reps - 1))
                       : 0.0;
    report.mean_se = pairwise_mean(se[j]);
    report.coverage = pairwise_mean(cover[j]);
    if (config.oracle_track) report.mean_abs_root_n_gap = pairwise_mean(gap[j]);
    report.runtime_sec = runtime;
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace envelope
