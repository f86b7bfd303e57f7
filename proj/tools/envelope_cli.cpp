// Command-line entry point: CSV estimation, sample simulation and Monte
// Carlo coverage studies, all batch-friendly and reproducible. Worker count
// is capped by ENVELOPE_THREADS; outputs are byte-identical across runs and
// thread counts for a fixed (input, config).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "envelope/apps.hpp"
#include "envelope/csv.hpp"
#include "envelope/io.hpp"
#include "envelope/reference_dgps.hpp"
#include "envelope/simlab.hpp"

namespace {

using namespace envelope;

struct RunConfig {
  std::string command;
  std::string app = "frechet";
  std::string input;
  std::string spec_path;
  std::string out;
  std::string format = "json";
  int folds = 5;
  std::uint64_t seed = 0;
  double level = 0.95;
  double tau = 0.5;
  std::size_t ugrid = 21;
  double effect_point = 0.0;
  std::size_t reps = 100;
  std::size_t n = 1000;
};

void write_output(const RunConfig& config, const std::string& text) {
  if (config.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(config.out);
  require(out.good(), ErrorCode::io_error,
          "cannot open '" + config.out + "' for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

AppParams make_params(const RunConfig& config, Application app) {
  AppParams params;
  params.tau = config.tau;
  params.effect_point = config.effect_point;
  if (app == Application::welfare_worst) {
    params.u_grid = worst_case_u_grid(config.tau, config.ugrid);
  } else if (app == Application::welfare_best) {
    params.u_grid = best_case_u_grid(config.tau, config.ugrid);
  }
  return params;
}

std::string estimate_csv(const std::vector<std::pair<std::string,
                                                     const EnvelopeEstimate*>>& rows) {
  std::string text = "target,psi_hat,se,ci_lo,ci_hi,n,K,seed\n";
  for (const auto& [name, est] : rows) {
    text += name;
    text += ',' + ordered_json(est->psi_hat).dump();
    text += ',' + ordered_json(est->se).dump();
    text += ',' + ordered_json(est->ci_lo).dump();
    text += ',' + ordered_json(est->ci_hi).dump();
    text += ',' + std::to_string(est->n);
    text += ',' + std::to_string(est->num_folds);
    text += ',' + std::to_string(est->seed);
    text += '\n';
  }
  return text;
}

int run_estimate(const RunConfig& config) {
  require(!config.input.empty(), ErrorCode::config_error,
          "estimate needs --input");
  const Application app = parse_application(config.app);
  require(app != Application::saddle_value, ErrorCode::unsupported_application,
          "saddle_value has no CSV estimation path; use coverage with a spec");
  const Sample sample = validate_sample(read_sample_csv(config.input));
  const FoldAssignment folds =
      make_folds(sample.size(), config.folds, config.seed);
  const AppParams params = make_params(config, app);

  ordered_json j;
  j["app"] = config.app;
  std::vector<std::pair<std::string, const EnvelopeEstimate*>> csv_rows;

  FrechetBounds frechet{};
  LeeBounds lee{};
  RoyBounds roy{};
  MakarovBounds makarov{};
  EnvelopeEstimate worst{};
  SaddleEstimate best{};

  switch (app) {
    case Application::frechet: {
      frechet = frechet_bounds(sample, folds,
                               fit_frechet_nuisance(sample, folds), config.level);
      j["lower"] = to_json(frechet.lower);
      j["upper"] = to_json(frechet.upper);
      csv_rows = {{"lower", &frechet.lower}, {"upper", &frechet.upper}};
      break;
    }
    case Application::lee_binary:
    case Application::lee_discrete: {
      const LeeNuisance nuisance = fit_lee_nuisance(sample, folds);
      lee = (app == Application::lee_binary)
                ? lee_bounds_binary(sample, folds, nuisance, config.level)
                : lee_bounds_discrete(sample, folds, nuisance, config.level);
      j["lower"] = to_json(lee.lower);
      j["upper"] = to_json(lee.upper);
      j["num_lower"] = to_json(lee.num_lower);
      j["num_upper"] = to_json(lee.num_upper);
      j["denominator"] = to_json(lee.denominator);
      csv_rows = {{"lower", &lee.lower},
                  {"upper", &lee.upper},
                  {"num_lower", &lee.num_lower},
                  {"num_upper", &lee.num_upper},
                  {"denominator", &lee.denominator}};
      break;
    }
    case Application::roy: {
      roy = roy_bounds(sample, folds, fit_roy_nuisance(sample, folds),
                       config.level);
      j["bound_10"] = to_json(roy.bound_10);
      j["bound_01"] = to_json(roy.bound_01);
      csv_rows = {{"bound_10", &roy.bound_10}, {"bound_01", &roy.bound_01}};
      break;
    }
    case Application::makarov: {
      makarov = makarov_cdf_bounds(sample, folds,
                                   fit_makarov_nuisance(sample, folds),
                                   config.effect_point, config.level);
      j["d"] = makarov.d;
      j["lower"] = to_json(makarov.lower);
      j["upper"] = to_json(makarov.upper);
      csv_rows = {{"lower", &makarov.lower}, {"upper", &makarov.upper}};
      break;
    }
    case Application::welfare_worst: {
      worst = worst_case_welfare(sample, folds,
                                 fit_welfare_nuisance(sample, folds), config.tau,
                                 params.u_grid, config.level);
      j["tau"] = config.tau;
      j["u_grid"] = params.u_grid;
      j["estimate"] = to_json(worst);
      csv_rows = {{"welfare_worst", &worst}};
      break;
    }
    case Application::welfare_best: {
      best = best_case_welfare(sample, folds,
                               fit_welfare_nuisance(sample, folds), config.tau,
                               params.u_grid, config.level);
      j["tau"] = config.tau;
      j["u_grid"] = params.u_grid;
      j["estimate"] = to_json(best);
      break;
    }
    case Application::saddle_value:
      break;  // rejected above
  }

  if (config.format == "csv") {
    if (app == Application::welfare_best) {
      EnvelopeEstimate flat;
      flat.psi_hat = best.psi_hat;
      flat.se = best.se;
      flat.ci_lo = best.ci_lo;
      flat.ci_hi = best.ci_hi;
      flat.n = best.n;
      flat.num_folds = best.num_folds;
      flat.seed = best.seed;
      write_output(config, estimate_csv({{"welfare_best", &flat}}));
    } else {
      write_output(config, estimate_csv(csv_rows));
    }
  } else {
    write_output(config, j.dump(2));
  }
  return 0;
}

int run_simulate(const RunConfig& config) {
  require(!config.spec_path.empty(), ErrorCode::config_error,
          "simulate needs --spec");
  const DgpSpec spec = read_dgp_spec(config.spec_path);
  const Sample sample = simulate(spec, config.n, config.seed);
  if (config.out.empty()) {
    write_sample_csv(std::cout, sample);
  } else {
    write_sample_csv(config.out, sample);
  }
  return 0;
}

int run_coverage(const RunConfig& config) {
  require(!config.spec_path.empty(), ErrorCode::config_error,
          "coverage needs --spec");
  const DgpSpec spec = read_dgp_spec(config.spec_path);
  McConfig mc;
  mc.app = parse_application(config.app);
  mc.n = config.n;
  mc.reps = config.reps;
  mc.seed = config.seed;
  mc.num_folds = config.folds;
  mc.level = config.level;
  mc.params = make_params(config, mc.app);
  const std::vector<McReport> reports = monte_carlo(spec, mc);
  std::cerr << "coverage: " << reports.size() << " target(s), "
            << reports.front().runtime_sec << " s\n";
  if (config.format == "csv") {
    std::string text = mc_report_csv_header() + '\n';
    for (const auto& report : reports) text += mc_report_csv_row(report) + '\n';
    write_output(config, text);
  } else {
    ordered_json j = ordered_json::array();
    for (const auto& report : reports) j.push_back(to_json(report));
    write_output(config, j.dump(2));
  }
  return 0;
}

constexpr const char* kExitCodeHelp = R"(exit codes:
  0   success
  2   ConfigError            3   IoError
  10  EmptySample            11  OutOfSupportCode
  12  BadFoldCount           13  EmptyCell
  14  ZeroKernelMass         15  GridMismatch
  16  MissingNuisance        17  NonFiniteScore
  18  BadLevel               19  DegenerateDenominator
  20  OverlapViolation       21  NoSaddle
  22  BadGrid                23  UnsupportedApplication
  70  InternalError

environment:
  ENVELOPE_THREADS caps the worker count; results do not depend on it.
)";

}  // namespace

int main(int argc, char** argv) {
  RunConfig config;
  CLI::App cli{"Aggregated intersection bounds and minimax values"};
  cli.footer(kExitCodeHelp);
  cli.add_option("--cmd", config.command, "estimate | simulate | coverage")
      ->required();
  cli.add_option("--app", config.app,
                 "frechet | lee_binary | lee_discrete | roy | makarov | "
                 "welfare_worst | welfare_best | saddle_value");
  cli.add_option("--input", config.input, "input sample CSV (estimate)");
  cli.add_option("--spec", config.spec_path, "DGP spec JSON (simulate, coverage)");
  cli.add_option("--out", config.out, "output path (default: stdout)");
  cli.add_option("--format", config.format, "json | csv");
  cli.add_option("--folds", config.folds, "number of cross-fitting folds K");
  cli.add_option("--seed", config.seed, "RNG seed");
  cli.add_option("--level", config.level, "confidence level in (0,1)");
  cli.add_option("--tau", config.tau, "welfare quantile level in (0,1)");
  cli.add_option("--ugrid", config.ugrid, "welfare u-grid size");
  cli.add_option("--d", config.effect_point, "Makarov effect point d");
  cli.add_option("--reps", config.reps, "Monte Carlo repetitions (coverage)");
  cli.add_option("--n", config.n, "sample size (simulate, coverage)");

  try {
    cli.parse(argc, argv);
    require(config.level > 0.0 && config.level < 1.0, ErrorCode::config_error,
            "--level must lie in (0,1)");
    require(config.folds >= 2, ErrorCode::config_error, "--folds must be >= 2");
    require(config.format == "json" || config.format == "csv",
            ErrorCode::config_error, "--format must be json or csv");
    require(config.ugrid >= 2, ErrorCode::config_error, "--ugrid must be >= 2");

    if (config.command == "estimate") return run_estimate(config);
    if (config.command == "simulate") return run_simulate(config);
    if (config.command == "coverage") return run_coverage(config);
    fail(ErrorCode::config_error,
         "unknown command '" + config.command + "'");
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp") {
      return cli.exit(e);
    }
    std::cout << envelope::error_record(
                     EnvelopeError(ErrorCode::config_error, e.what()), "cli")
                     .dump(2)
              << std::endl;
    return error_exit_code(ErrorCode::config_error);
  } catch (const EnvelopeError& e) {
    std::cout << envelope::error_record(e, "cmd=" + config.command).dump(2)
              << std::endl;
    return error_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cout << envelope::error_record(
                     EnvelopeError(ErrorCode::internal, e.what()), "unexpected")
                     .dump(2)
              << std::endl;
    return error_exit_code(ErrorCode::internal);
  }
}
