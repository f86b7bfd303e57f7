#pragma once

// Reference data-generating processes used by the test and acceptance
// suites. Margins are designed wide enough that classification mistakes are
// exponentially rare at the studied sample sizes; quantile-based designs keep
// every population CDF value at least 0.125 away from the grid levels so
// fitted quantiles coincide with the truth with overwhelming probability.

#include <cstdint>

#include "envelope/simlab.hpp"

namespace envelope {

// Ten cells, margins >= 0.25 for the min side and >= 0.2 for the max side.
inline DgpSpec make_frechet_reference() {
  DgpSpec spec;
  spec.name = "frechet_reference";
  spec.x_probs = {0.06, 0.08, 0.09, 0.10, 0.10, 0.10, 0.11, 0.11, 0.12, 0.13};
  spec.mu1 = {0.40, 0.45, 0.50, 0.55, 0.60, 0.42, 0.48, 0.52, 0.58, 0.62};
  SelectionDgp sec;
  sec.s1 = {0.85, 0.25, 0.90, 0.60, 0.95, 0.30, 0.15, 0.70, 0.50, 0.85};
  sec.s0 = {0.40, 0.55, 0.35, 0.15, 0.45, 0.95, 0.45, 0.95, 0.25, 0.60};
  spec.selection = sec;
  spec.margin_knob = 0.2;
  return spec;
}

// Ten cells on support {0,1,2}; both Lee classifier objectives have
// runner-up gaps >= 0.16.
inline DgpSpec make_lee_discrete_reference() {
  DgpSpec spec;
  spec.name = "lee_discrete_reference";
  spec.x_probs = {0.06, 0.08, 0.09, 0.10, 0.10, 0.10, 0.11, 0.11, 0.12, 0.13};
  spec.mu1 = {0.50, 0.48, 0.52, 0.46, 0.54, 0.50, 0.47, 0.53, 0.49, 0.51};
  SelectionDgp sec;
  sec.s1 = {0.90, 0.85, 0.88, 0.92, 0.90, 0.86, 0.94, 0.89, 0.91, 0.87};
  sec.s0 = {0.40, 0.38, 0.41, 0.42, 0.38, 0.40, 0.44, 0.39, 0.41, 0.37};
  sec.outcome_support = {0.0, 1.0, 2.0};
  sec.pmf1 = {{0.25, 0.60, 0.15}, {0.25, 0.60, 0.15}, {0.22, 0.62, 0.16},
              {0.26, 0.58, 0.16}, {0.24, 0.62, 0.14}, {0.25, 0.59, 0.16},
              {0.27, 0.57, 0.16}, {0.23, 0.63, 0.14}, {0.25, 0.61, 0.14},
              {0.24, 0.60, 0.16}};
  spec.selection = sec;
  spec.margin_knob = 0.15;
  return spec;
}

// Binary-outcome Lee DGP with random tables; used for the reduction checks.
inline DgpSpec make_random_lee_binary_dgp(std::uint64_t seed) {
  Rng rng(derive_seed(0x1EEBull, seed));
  const std::size_t cells = 4;
  DgpSpec spec;
  spec.name = "lee_binary_random";
  spec.x_probs.resize(cells);
  double total = 0.0;
  for (auto& p : spec.x_probs) {
    p = rng.uniform_range(0.5, 1.5);
    total += p;
  }
  for (auto& p : spec.x_probs) p /= total;
  SelectionDgp sec;
  for (std::size_t x = 0; x < cells; ++x) {
    spec.mu1.push_back(rng.uniform_range(0.35, 0.65));
    const double s1 = rng.uniform_range(0.55, 0.95);
    sec.s1.push_back(s1);
    sec.s0.push_back(rng.uniform_range(0.15, s1 - 0.1));
    const double p_y = rng.uniform_range(0.2, 0.8);
    sec.pmf1.push_back({1.0 - p_y, p_y});
  }
  sec.outcome_support = {0.0, 1.0};
  spec.selection = sec;
  return spec;
}

// No-compliers design: s1 == s0, so both Lee bounds collapse to the
// conditional mean among selected treated units.
inline DgpSpec make_lee_no_compliers() {
  DgpSpec spec = make_lee_discrete_reference();
  spec.name = "lee_no_compliers";
  spec.selection->s0 = spec.selection->s1;
  spec.margin_knob = 0.0;
  return spec;
}

// Ten cells, two instrument values, x-dependent minimizers, gaps >= 0.25.
inline DgpSpec make_roy_reference() {
  DgpSpec spec;
  spec.name = "roy_reference";
  spec.x_probs = {0.06, 0.08, 0.09, 0.10, 0.10, 0.10, 0.11, 0.11, 0.12, 0.13};
  RoyDgp sec;
  sec.z_support = {0, 1};
  sec.z_probs = {{0.45, 0.55}, {0.55, 0.45}, {0.45, 0.55}, {0.55, 0.45},
                 {0.45, 0.55}, {0.55, 0.45}, {0.45, 0.55}, {0.55, 0.45},
                 {0.45, 0.55}, {0.55, 0.45}};
  sec.p11 = {{0.30, 0.60}, {0.65, 0.35}, {0.28, 0.58}, {0.63, 0.33},
             {0.32, 0.62}, {0.67, 0.37}, {0.30, 0.58}, {0.61, 0.33},
             {0.34, 0.60}, {0.63, 0.35}};
  sec.p10 = {{0.50, 0.22}, {0.25, 0.55}, {0.52, 0.24}, {0.23, 0.53},
             {0.48, 0.20}, {0.21, 0.51}, {0.54, 0.26}, {0.27, 0.55},
             {0.48, 0.22}, {0.25, 0.51}};
  spec.roy = sec;
  spec.margin_knob = 0.25;
  return spec;
}

// Random Roy DGP whose per-cell minimizer provably depends on x, so the
// covariate-assisted bound is strictly tighter than the unconditional one.
inline DgpSpec make_random_roy_dgp(std::uint64_t seed) {
  Rng rng(derive_seed(0x60Dull, seed));
  const std::size_t cells = 6;
  while (true) {
    DgpSpec spec;
    spec.name = "roy_random";
    spec.x_probs.assign(cells, 0.0);
    double total = 0.0;
    for (auto& p : spec.x_probs) {
      p = rng.uniform_range(0.5, 1.5);
      total += p;
    }
    for (auto& p : spec.x_probs) p /= total;
    RoyDgp sec;
    sec.z_support = {0, 1};
    bool first_min_somewhere = false;
    bool second_min_somewhere = false;
    bool ok = true;
    for (std::size_t x = 0; x < cells; ++x) {
      sec.z_probs.push_back({0.0, 0.0});
      sec.z_probs[x][0] = rng.uniform_range(0.35, 0.65);
      sec.z_probs[x][1] = 1.0 - sec.z_probs[x][0];
      const double a = rng.uniform_range(0.15, 0.55);
      const double b = rng.uniform_range(0.15, 0.55);
      if (std::abs(a - b) < 0.1) ok = false;
      sec.p11.push_back({a, b});
      (a < b ? first_min_somewhere : second_min_somewhere) = true;
      const double c = rng.uniform_range(0.1, 1.0 - std::max(a, b) - 0.05);
      const double e = rng.uniform_range(0.1, 1.0 - std::max(a, b) - 0.05);
      if (std::abs(c - e) < 0.1) ok = false;
      sec.p10.push_back({c, e});
    }
    if (!ok || !first_min_somewhere || !second_min_somewhere) continue;
    spec.roy = sec;
    spec.margin_knob = 0.1;
    return spec;
  }
}

// Three cells on support {0,1,2}; the branch values F1(t) - F0((t-d)-) at
// d = 0 are pairwise distinct with margins >= 0.1, so no branch ties.
inline DgpSpec make_makarov_reference() {
  DgpSpec spec;
  spec.name = "makarov_reference";
  spec.x_probs = {0.3, 0.4, 0.3};
  spec.mu1 = {0.45, 0.50, 0.55};
  ArmsDgp sec;
  sec.support = {0.0, 1.0, 2.0};
  sec.pmf1 = {{0.2, 0.25, 0.55}, {0.65, 0.3, 0.05}, {0.3, 0.4, 0.3}};
  sec.pmf0 = {{0.65, 0.3, 0.05}, {0.2, 0.25, 0.55}, {0.55, 0.25, 0.2}};
  spec.arms = sec;
  spec.margin_knob = 0.1;
  return spec;
}

// Three cells on support {0,1,2,3}. Every population CDF value is an odd
// multiple of 0.125, so the coarse grids {0,.25,.5} and {.5,.75,1} stay
// 0.125 away from every F value.
inline DgpSpec make_welfare_reference() {
  DgpSpec spec;
  spec.name = "welfare_reference";
  spec.x_probs = {0.3, 0.4, 0.3};
  spec.mu1 = {0.5, 0.5, 0.5};
  ArmsDgp sec;
  sec.support = {0.0, 1.0, 2.0, 3.0};
  sec.pmf1 = {{0.125, 0.25, 0.25, 0.375},
              {0.125, 0.0, 0.25, 0.625},
              {0.375, 0.25, 0.25, 0.125}};
  sec.pmf0 = {{0.375, 0.25, 0.25, 0.125},
              {0.875, 0.0, 0.0, 0.125},
              {0.125, 0.25, 0.25, 0.375}};
  spec.arms = sec;
  spec.margin_knob = 0.5;
  return spec;
}

inline AppParams welfare_reference_params(bool best) {
  AppParams params;
  params.tau = 0.5;
  params.u_grid = best ? std::vector<double>{0.5, 0.75, 1.0}
                       : std::vector<double>{0.0, 0.25, 0.5};
  return params;
}

// Degenerate control arm: the identified set collapses and the worst- and
// best-case welfare coincide.
inline DgpSpec make_welfare_degenerate_arm() {
  DgpSpec spec = make_welfare_reference();
  spec.name = "welfare_degenerate_arm";
  spec.arms->pmf0 = {{1.0, 0.0, 0.0, 0.0},
                     {1.0, 0.0, 0.0, 0.0},
                     {1.0, 0.0, 0.0, 0.0}};
  return spec;
}

// Synthetic planted-saddle mechanism: per-cell base matrices are redrawn
// until the combined surface admits a pure saddle whose row/column margins
// clear 0.15.
inline DgpSpec make_saddle_reference(std::uint64_t seed) {
  Rng rng(derive_seed(0x5ADD1Eull, seed));
  DgpSpec spec;
  spec.name = "saddle_reference";
  spec.x_probs = {0.25, 0.25, 0.25, 0.25};
  SaddleDgp sec;
  sec.num_kappa = 3;
  sec.num_t = 3;
  sec.gain.resize(9);
  for (auto& g : sec.gain) g = rng.uniform_range(-0.5, 0.5);
  sec.outcome_mean = {-0.6, -0.2, 0.2, 0.6};
  sec.base.resize(spec.x_probs.size());
  for (std::size_t x = 0; x < spec.x_probs.size(); ++x) {
    while (true) {
      std::vector<double> base(9);
      for (auto& b : base) b = rng.uniform_range(-1.0, 1.0);
      SaddleMatrix m(3, 3);
      for (std::size_t i = 0; i < 9; ++i) {
        m.values[i] = base[i] + sec.gain[i] * sec.outcome_mean[x];
      }
      const SaddleSearch search = find_saddle(m);
      if (!search.cell.has_value()) continue;
      if (detail::saddle_cross_margin(m, *search.cell) < 0.15) continue;
      sec.base[x] = std::move(base);
      break;
    }
  }
  spec.saddle = sec;
  spec.margin_knob = 0.15;
  return spec;
}

}  // namespace envelope
