// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Everything runs at desk scale from fixed seeds; repeated runs are
// byte-identical and independent of the worker count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "envelope/apps.hpp"
#include "envelope/cvar.hpp"
#include "envelope/io.hpp"
#include "envelope/reference_dgps.hpp"
#include "envelope/saddle.hpp"
#include "envelope/simlab.hpp"

using namespace envelope;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d: %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL",
              criterion, what.c_str(), detail.c_str(), seconds);
  if (!pass) ++g_failures;
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

DiscreteDistribution random_law(Rng& rng) {
  const std::size_t m = 2 + rng.uniform_index(9);
  DiscreteDistribution dist;
  double point = rng.uniform_range(-5.0, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    dist.support.push_back(point);
    point += rng.uniform_range(0.1, 2.0);
    const double p = rng.uniform_range(0.05, 1.0);
    dist.probs.push_back(p);
    total += p;
  }
  for (auto& p : dist.probs) p /= total;
  return dist;
}

// Ten-cell binary-outcome Lee reference with interior bounds.
DgpSpec make_lee_binary_reference() {
  DgpSpec spec;
  spec.name = "lee_binary_reference";
  spec.x_probs = {0.06, 0.08, 0.09, 0.10, 0.10, 0.10, 0.11, 0.11, 0.12, 0.13};
  spec.mu1 = {0.50, 0.48, 0.52, 0.46, 0.54, 0.50, 0.47, 0.53, 0.49, 0.51};
  SelectionDgp sec;
  sec.s1 = {0.90, 0.88, 0.92, 0.86, 0.94, 0.89, 0.91, 0.87, 0.93, 0.90};
  sec.s0 = {0.65, 0.66, 0.64, 0.63, 0.68, 0.67, 0.66, 0.62, 0.67, 0.68};
  sec.outcome_support = {0.0, 1.0};
  const std::vector<double> p_y = {0.60, 0.58, 0.57, 0.59, 0.60,
                                   0.61, 0.58, 0.57, 0.59, 0.62};
  for (double p : p_y) sec.pmf1.push_back({1.0 - p, p});
  spec.selection = sec;
  spec.margin_knob = 0.1;
  return spec;
}

// --------------------------------------------------------------------------
// 1. CVaR duality on random laws.

void criterion_1() {
  Timer timer;
  Rng rng(101);
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 200 && pass; ++trial) {
    const DiscreteDistribution dist = random_law(rng);
    for (int a = 1; a <= 9; ++a) {
      const double alpha = a / 10.0;
      const CvarResult up_dual = cvar_upper_dual(dist, alpha);
      const CvarResult lo_dual = cvar_lower_dual(dist, alpha);
      const double up_gap =
          std::abs(up_dual.value - cvar_upper_direct(dist, alpha).value);
      const double lo_gap =
          std::abs(lo_dual.value - cvar_lower_direct(dist, alpha).value);
      worst = std::max(worst, std::max(up_gap, lo_gap));
      if (up_gap > 1e-10 || lo_gap > 1e-10 ||
          up_dual.minimizer_beta != generalized_quantile(dist, 1.0 - alpha) ||
          lo_dual.minimizer_beta != generalized_quantile(dist, alpha)) {
        pass = false;
        break;
      }
    }
  }
  const double seconds = timer.seconds();
  report(1, pass && seconds < 5.0, "CVaR dual equals direct on 200 random laws",
         "max |dual-direct| = " + fmt(worst), seconds);
}

// --------------------------------------------------------------------------
// 2. Binary reduction of the discrete Lee path.

void criterion_2() {
  Timer timer;
  bool pass = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DgpSpec spec = make_random_lee_binary_dgp(seed);
    const std::size_t n = 500;
    const Sample sample = simulate(spec, n, derive_seed(2024, seed));
    const FoldAssignment folds = make_folds(n, 5, derive_seed(2025, seed));
    const LeeNuisance nuisance = fit_lee_nuisance(sample, folds);
    const LeeBounds binary = lee_bounds_binary(sample, folds, nuisance, 0.95);
    const LeeBounds discrete = lee_bounds_discrete(sample, folds, nuisance, 0.95);
    const double gap = std::max(
        std::abs(binary.upper.psi_hat - discrete.upper.psi_hat),
        std::abs(binary.lower.psi_hat - discrete.lower.psi_hat));
    worst = std::max(worst, gap);
    if (gap > 1e-12) pass = false;
  }
  const double seconds = timer.seconds();
  report(2, pass && seconds < 10.0,
         "binary and discrete Lee paths agree on 50 random samples",
         "max |binary-discrete| = " + fmt(worst), seconds);
}

// --------------------------------------------------------------------------
// 3. Coverage and bias on the margin-separated ten-cell references.

void criterion_3() {
  Timer timer;
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<DgpSpec, Application>> studies = {
      {make_frechet_reference(), Application::frechet},
      {make_lee_discrete_reference(), Application::lee_discrete},
      {make_roy_reference(), Application::roy}};
  for (const auto& [spec, app] : studies) {
    McConfig config;
    config.app = app;
    config.n = 4000;
    config.reps = 500;
    config.num_folds = 5;
    config.seed = 33;
    for (const McReport& report_j : monte_carlo(spec, config)) {
      const double bias_gate =
          3.0 * report_j.mc_sd / std::sqrt(static_cast<double>(report_j.reps));
      const bool ok = report_j.coverage >= 0.92 && report_j.coverage <= 0.975 &&
                      std::abs(report_j.mean_bias) <= bias_gate;
      if (!ok) pass = false;
      detail += report_j.target + " cov=" + fmt(report_j.coverage) + " ";
    }
  }
  const double seconds = timer.seconds();
  report(3, pass && seconds < 300.0,
         "95% CI coverage in [0.92, 0.975] with bias under 3 MC-SE",
         detail.substr(0, detail.size() - 1), seconds);
}

// --------------------------------------------------------------------------
// 4. Oracle property: the root-n gap shrinks between n=500 and n=8000.

void criterion_4() {
  Timer timer;
  const DgpSpec spec = make_frechet_reference();
  McConfig config;
  config.app = Application::frechet;
  config.reps = 500;
  config.seed = 44;
  config.oracle_track = true;
  config.n = 500;
  const double gap_small = monte_carlo(spec, config)[1].mean_abs_root_n_gap;
  config.n = 8000;
  const double gap_large = monte_carlo(spec, config)[1].mean_abs_root_n_gap;
  const double seconds = timer.seconds();
  const bool pass = gap_large <= (2.0 / 3.0) * gap_small && seconds < 300.0;
  report(4, pass, "oracle gap decays with the sample size",
         "mean |sqrt(N) gap|: " + fmt(gap_small) + " at n=500, " +
             fmt(gap_large) + " at n=8000",
         seconds);
}

// --------------------------------------------------------------------------
// 5. Variance consistency at n=8000 on every application's reference DGP.

void criterion_5() {
  Timer timer;
  bool pass = true;
  std::string detail;
  struct Study {
    DgpSpec spec;
    Application app;
    AppParams params;
  };
  const std::vector<Study> studies = {
      {make_frechet_reference(), Application::frechet, {}},
      {make_lee_binary_reference(), Application::lee_binary, {}},
      {make_lee_discrete_reference(), Application::lee_discrete, {}},
      {make_roy_reference(), Application::roy, {}},
      {make_makarov_reference(), Application::makarov, {}},
      {make_welfare_reference(), Application::welfare_worst,
       welfare_reference_params(false)},
      {make_welfare_reference(), Application::welfare_best,
       welfare_reference_params(true)},
      {make_saddle_reference(7), Application::saddle_value, {}}};
  for (const auto& study : studies) {
    McConfig config;
    config.app = study.app;
    config.n = 8000;
    config.reps = 400;
    config.seed = 55;
    config.params = study.params;
    double worst_ratio = 1.0;
    for (const McReport& report_j : monte_carlo(study.spec, config)) {
      const double ratio = report_j.mean_se / report_j.mc_sd;
      if (!(ratio >= 0.85 && ratio <= 1.15)) pass = false;
      if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
    }
    detail += std::string(application_name(study.app)) + "=" + fmt(worst_ratio) + " ";
  }
  const double seconds = timer.seconds();
  report(5, pass, "estimated SE within 15% of the MC standard deviation",
         "se/sd: " + detail.substr(0, detail.size() - 1), seconds);
}

// --------------------------------------------------------------------------
// 6. Jensen tightening on random Roy designs with x-dependent minimizers.

void criterion_6() {
  Timer timer;
  bool pass = true;
  bool any_strict = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DgpSpec spec = make_random_roy_dgp(seed);
    const auto& sec = *spec.roy;

    // exact bounds by cell enumeration
    double assisted = 0.0;
    std::vector<double> pooled(sec.z_support.size(), 0.0);
    for (std::size_t x = 0; x < spec.num_cells(); ++x) {
      double cell_min = kInf;
      for (std::size_t z = 0; z < sec.z_support.size(); ++z) {
        cell_min = std::min(cell_min, sec.p11[x][z]);
        pooled[z] += spec.x_probs[x] * sec.p11[x][z];
      }
      assisted += spec.x_probs[x] * cell_min;
    }
    const double unconditional = std::min(pooled[0], pooled[1]);
    if (assisted > unconditional + 1e-12) pass = false;
    if (assisted < unconditional - 1e-9) any_strict = true;

    // sample estimates ordered within three joint standard errors
    const std::size_t n = 4000;
    const Sample sample = simulate(spec, n, derive_seed(66, seed));
    const FoldAssignment folds = make_folds(n, 5, derive_seed(67, seed));
    const RoyBounds cov =
        roy_bounds(sample, folds, fit_roy_nuisance(sample, folds), 0.95);

    Sample pooled_sample = sample;
    for (auto& w : pooled_sample.rows) w.x = 0;
    pooled_sample.schema.num_cells = 1;
    const RoyBounds unc = roy_bounds(
        pooled_sample, folds, fit_roy_nuisance(pooled_sample, folds), 0.95);
    const double slack =
        3.0 * std::sqrt(cov.bound_10.se * cov.bound_10.se +
                        unc.bound_10.se * unc.bound_10.se);
    if (cov.bound_10.psi_hat > unc.bound_10.psi_hat + slack) pass = false;
  }
  const double seconds = timer.seconds();
  report(6, pass && any_strict,
         "covariate-assisted Roy bounds are weakly tighter, strictly somewhere",
         any_strict ? "strict tightening observed" : "no strict case found",
         seconds);
}

// --------------------------------------------------------------------------
// 7. Saddle suite: planted saddles, matching pennies, coverage, and the
// best-versus-worst welfare ordering.

bool saddle_inequalities_hold(const SaddleMatrix& m, const SaddleCell& cell) {
  for (std::size_t k = 0; k < m.num_kappa; ++k) {
    if (m.at(k, cell.t) > cell.value) return false;
  }
  for (std::size_t t = 0; t < m.num_t; ++t) {
    if (m.at(cell.kappa, t) < cell.value) return false;
  }
  return true;
}

void criterion_7() {
  Timer timer;
  bool pass = true;
  std::string detail;

  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t nk = 2 + rng.uniform_index(4);
    const std::size_t nt = 2 + rng.uniform_index(4);
    SaddleMatrix m(nk, nt);
    for (auto& v : m.values) v = rng.uniform_range(-1.0, 1.0);
    const std::size_t ki = rng.uniform_index(nk);
    const std::size_t tj = rng.uniform_index(nt);
    const double v = rng.uniform_range(-0.5, 0.5);
    m.at(ki, tj) = v;
    for (std::size_t t = 0; t < nt; ++t) {
      if (t != tj) m.at(ki, t) = v + rng.uniform_range(0.05, 1.0);
    }
    for (std::size_t k = 0; k < nk; ++k) {
      if (k != ki) m.at(k, tj) = v - rng.uniform_range(0.05, 1.0);
    }
    const SaddleSearch search = find_saddle(m);
    if (!search.cell.has_value() ||
        !saddle_inequalities_hold(m, *search.cell) ||
        search.sup_inf != search.inf_sup) {
      pass = false;
      break;
    }
  }
  for (double scale : {0.5, 1.0, 2.0}) {
    SaddleMatrix pennies(2, 2);
    pennies.at(0, 0) = scale;
    pennies.at(0, 1) = -scale;
    pennies.at(1, 0) = -scale;
    pennies.at(1, 1) = scale;
    if (find_saddle(pennies).cell.has_value()) pass = false;
  }
  detail += "planted/pennies ok; ";

  McConfig config;
  config.app = Application::saddle_value;
  config.n = 4000;
  config.reps = 500;
  config.seed = 71;
  const McReport coverage = monte_carlo(make_saddle_reference(7), config)[0];
  if (!(coverage.coverage >= 0.92 && coverage.coverage <= 0.975)) pass = false;
  detail += "saddle cov=" + fmt(coverage.coverage) + "; ";

  // population ordering over the welfare designs
  std::vector<DgpSpec> welfare_specs = {make_welfare_reference(),
                                        make_welfare_degenerate_arm()};
  {
    DgpSpec shuffled = make_welfare_reference();
    std::swap(shuffled.arms->pmf1[0], shuffled.arms->pmf1[2]);
    shuffled.margin_knob = 0.0;
    welfare_specs.push_back(shuffled);
    DgpSpec flipped = make_welfare_reference();
    std::swap(flipped.arms->pmf1, flipped.arms->pmf0);
    flipped.margin_knob = 0.0;
    welfare_specs.push_back(flipped);
  }
  for (const DgpSpec& spec : welfare_specs) {
    const double worst =
        true_psi(spec, Target::welfare_worst, welfare_reference_params(false));
    const double best =
        true_psi(spec, Target::welfare_best, welfare_reference_params(true));
    if (best < worst - 1e-12) pass = false;
  }
  const double degenerate_worst = true_psi(
      make_welfare_degenerate_arm(), Target::welfare_worst,
      welfare_reference_params(false));
  const double degenerate_best = true_psi(
      make_welfare_degenerate_arm(), Target::welfare_best,
      welfare_reference_params(true));
  if (degenerate_worst != degenerate_best) pass = false;
  detail += "best>=worst on all welfare DGPs";

  const double seconds = timer.seconds();
  report(7, pass, "saddle detection, saddle coverage and welfare ordering",
         detail, seconds);
}

// --------------------------------------------------------------------------
// 8. Degenerate collapses: identified sets that shrink to a point.

void criterion_8() {
  Timer timer;
  bool pass = true;
  std::string detail;

  {
    McConfig config;
    config.app = Application::lee_discrete;
    config.n = 4000;
    config.reps = 200;
    config.seed = 88;
    const auto reports = monte_carlo(make_lee_no_compliers(), config);
    for (const McReport& report_j : reports) {
      const double gate =
          3.0 * report_j.mc_sd / std::sqrt(static_cast<double>(report_j.reps));
      if (std::abs(report_j.mean_bias) > gate) pass = false;
    }
    if (std::abs(reports[0].true_value - reports[1].true_value) > 1e-12) {
      pass = false;
    }
    detail += "lee collapse bias " + fmt(reports[0].mean_bias) + "/" +
              fmt(reports[1].mean_bias) + "; ";
  }
  {
    const DgpSpec spec = make_welfare_degenerate_arm();
    for (bool best : {false, true}) {
      McConfig config;
      config.app = best ? Application::welfare_best : Application::welfare_worst;
      config.n = 4000;
      config.reps = 200;
      config.seed = 89;
      config.params = welfare_reference_params(best);
      const McReport report_j = monte_carlo(spec, config)[0];
      const double gate =
          3.0 * report_j.mc_sd / std::sqrt(static_cast<double>(report_j.reps));
      if (std::abs(report_j.mean_bias) > gate) pass = false;
    }
    detail += "welfare collapse ok";
  }
  const double seconds = timer.seconds();
  report(8, pass, "degenerate designs hit the point target from both sides",
         detail, seconds);
}

// --------------------------------------------------------------------------
// 9. Determinism across repeats and thread counts.

void criterion_9() {
  Timer timer;
  const DgpSpec spec = make_lee_discrete_reference();
  McConfig config;
  config.app = Application::lee_discrete;
  config.n = 1000;
  config.reps = 25;
  config.seed = 99;

  const auto serialize = [&]() {
    ordered_json j = ordered_json::array();
    for (const McReport& report_j : monte_carlo(spec, config)) {
      j.push_back(to_json(report_j));
    }
    // large enough that the score loop itself spreads across workers
    const Sample sample = simulate(spec, 6000, 5);
    const FoldAssignment folds = make_folds(6000, 5, 6);
    const LeeBounds bounds =
        lee_bounds_discrete(sample, folds, fit_lee_nuisance(sample, folds), 0.95);
    j.push_back(to_json(bounds.upper));
    return j.dump();
  };

  set_worker_cap(1);
  const std::string serial = serialize();
  set_worker_cap(8);
  const std::string threaded = serialize();
  const std::string repeated = serialize();
  set_worker_cap(0);

  const bool pass = serial == threaded && threaded == repeated;
  report(9, pass, "byte-identical output across repeats and worker counts",
         pass ? "3 runs identical" : "runs diverged", timer.seconds());
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
