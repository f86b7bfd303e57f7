#pragma once

// JSON records for estimates and Monte Carlo reports, and the documented
// DGP-spec JSON schema. Key order is fixed so that a given (input, config)
// pair always serializes to identical bytes. Runtime is deliberately left
// out of the emitted records for the same reason.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "envelope/apps.hpp"
#include "envelope/envelope.hpp"
#include "envelope/saddle.hpp"
#include "envelope/simlab.hpp"

namespace envelope {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const EnvelopeEstimate& est) {
  ordered_json j;
  j["psi_hat"] = est.psi_hat;
  j["se"] = est.se;
  j["ci_lo"] = est.ci_lo;
  j["ci_hi"] = est.ci_hi;
  j["n"] = est.n;
  j["K"] = est.num_folds;
  j["seed"] = est.seed;
  j["per_fold_means"] = est.per_fold_means;
  return j;
}

inline ordered_json to_json(const SaddleEstimate& est) {
  ordered_json j;
  j["psi_hat"] = est.psi_hat;
  j["se"] = est.se;
  j["ci_lo"] = est.ci_lo;
  j["ci_hi"] = est.ci_hi;
  j["n"] = est.n;
  j["K"] = est.num_folds;
  j["seed"] = est.seed;
  j["grid_kappa"] = est.grid_kappa;
  j["grid_t"] = est.grid_t;
  j["per_fold_means"] = est.per_fold_means;
  return j;
}

inline ordered_json to_json(const McReport& report) {
  ordered_json j;
  j["target"] = report.target;
  j["reps"] = report.reps;
  j["n"] = report.n;
  j["K"] = report.num_folds;
  j["level"] = report.level;
  j["seed"] = report.seed;
  j["true_value"] = report.true_value;
  j["mean_estimate"] = report.mean_estimate;
  j["mean_bias"] = report.mean_bias;
  j["mc_sd"] = report.mc_sd;
  j["mean_se"] = report.mean_se;
  j["coverage"] = report.coverage;
  if (std::isfinite(report.mean_abs_root_n_gap)) {
    j["mean_abs_root_n_gap"] = report.mean_abs_root_n_gap;
  }
  return j;
}

inline std::string mc_report_csv_header() {
  return "target,reps,n,K,level,seed,true_value,mean_estimate,mean_bias,"
         "mc_sd,mean_se,coverage,mean_abs_root_n_gap";
}

inline std::string mc_report_csv_row(const McReport& report) {
  ordered_json gap = std::isfinite(report.mean_abs_root_n_gap)
                         ? ordered_json(report.mean_abs_root_n_gap)
                         : ordered_json("");
  std::string row;
  row += report.target;
  row += ',' + ordered_json(report.reps).dump();
  row += ',' + ordered_json(report.n).dump();
  row += ',' + ordered_json(report.num_folds).dump();
  row += ',' + ordered_json(report.level).dump();
  row += ',' + ordered_json(report.seed).dump();
  row += ',' + ordered_json(report.true_value).dump();
  row += ',' + ordered_json(report.mean_estimate).dump();
  row += ',' + ordered_json(report.mean_bias).dump();
  row += ',' + ordered_json(report.mc_sd).dump();
  row += ',' + ordered_json(report.mean_se).dump();
  row += ',' + ordered_json(report.coverage).dump();
  row += ',';
  if (gap.is_number()) row += gap.dump();
  return row;
}

inline ordered_json error_record(const EnvelopeError& error,
                                 const std::string& context) {
  ordered_json j;
  j["error"]["code"] = error_code_name(error.code());
  j["error"]["exit"] = error_exit_code(error.code());
  j["error"]["message"] = error.detail();
  if (!context.empty()) j["error"]["context"] = context;
  return j;
}

// ---------------------------------------------------------------------------
// DGP spec (de)serialization.

inline ordered_json to_json(const DgpSpec& spec) {
  ordered_json j;
  j["name"] = spec.name;
  j["x_probs"] = spec.x_probs;
  if (!spec.mu1.empty()) j["mu1"] = spec.mu1;
  j["margin_knob"] = spec.margin_knob;
  if (spec.selection) {
    const auto& sec = *spec.selection;
    ordered_json s;
    s["s1"] = sec.s1;
    s["s0"] = sec.s0;
    if (!sec.outcome_support.empty()) {
      s["outcome_support"] = sec.outcome_support;
      s["pmf1"] = sec.pmf1;
      if (!sec.pmf0.empty()) s["pmf0"] = sec.pmf0;
    }
    j["selection"] = s;
  }
  if (spec.roy) {
    const auto& sec = *spec.roy;
    ordered_json r;
    r["z_support"] = sec.z_support;
    r["z_probs"] = sec.z_probs;
    r["p11"] = sec.p11;
    r["p10"] = sec.p10;
    j["roy"] = r;
  }
  if (spec.arms) {
    const auto& sec = *spec.arms;
    ordered_json a;
    a["support"] = sec.support;
    a["pmf1"] = sec.pmf1;
    a["pmf0"] = sec.pmf0;
    j["arms"] = a;
  }
  if (spec.saddle) {
    const auto& sec = *spec.saddle;
    ordered_json s;
    s["num_kappa"] = sec.num_kappa;
    s["num_t"] = sec.num_t;
    s["base"] = sec.base;
    s["gain"] = sec.gain;
    s["outcome_mean"] = sec.outcome_mean;
    j["saddle"] = s;
  }
  return j;
}

inline DgpSpec dgp_spec_from_json(const ordered_json& j) {
  DgpSpec spec;
  try {
    spec.name = j.value("name", std::string("dgp"));
    spec.x_probs = j.at("x_probs").get<std::vector<double>>();
    if (j.contains("mu1")) spec.mu1 = j.at("mu1").get<std::vector<double>>();
    spec.margin_knob = j.value("margin_knob", 0.0);
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      SelectionDgp sec;
      sec.s1 = s.at("s1").get<std::vector<double>>();
      sec.s0 = s.at("s0").get<std::vector<double>>();
      if (s.contains("outcome_support")) {
        sec.outcome_support = s.at("outcome_support").get<std::vector<double>>();
        sec.pmf1 = s.at("pmf1").get<std::vector<std::vector<double>>>();
        if (s.contains("pmf0"))
          sec.pmf0 = s.at("pmf0").get<std::vector<std::vector<double>>>();
      }
      spec.selection = sec;
    }
    if (j.contains("roy")) {
      const auto& r = j.at("roy");
      RoyDgp sec;
      sec.z_support = r.at("z_support").get<std::vector<int>>();
      sec.z_probs = r.at("z_probs").get<std::vector<std::vector<double>>>();
      sec.p11 = r.at("p11").get<std::vector<std::vector<double>>>();
      sec.p10 = r.at("p10").get<std::vector<std::vector<double>>>();
      spec.roy = sec;
    }
    if (j.contains("arms")) {
      const auto& a = j.at("arms");
      ArmsDgp sec;
      sec.support = a.at("support").get<std::vector<double>>();
      sec.pmf1 = a.at("pmf1").get<std::vector<std::vector<double>>>();
      sec.pmf0 = a.at("pmf0").get<std::vector<std::vector<double>>>();
      spec.arms = sec;
    }
    if (j.contains("saddle")) {
      const auto& s = j.at("saddle");
      SaddleDgp sec;
      sec.num_kappa = s.at("num_kappa").get<std::size_t>();
      sec.num_t = s.at("num_t").get<std::size_t>();
      sec.base = s.at("base").get<std::vector<std::vector<double>>>();
      sec.gain = s.at("gain").get<std::vector<double>>();
      sec.outcome_mean = s.at("outcome_mean").get<std::vector<double>>();
      spec.saddle = sec;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config_error, std::string("bad DGP spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline DgpSpec read_dgp_spec(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_error, "cannot open '" + path + "'");
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config_error,
         "cannot parse '" + path + "' as JSON: " + e.what());
  }
  return dgp_spec_from_json(j);
}

}  // namespace envelope
