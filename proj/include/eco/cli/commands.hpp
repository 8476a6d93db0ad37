#pragma once

#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "eco/cli/config.hpp"
#include "eco/validation.hpp"

namespace eco::cli {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kConfigError = 2 };

/// Real number with 17 significant digits.
inline std::string format_real(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_real(*x) : ""; }

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline const char* kRunCsvHeader = "step,lr,loss,grad_norm_sq,m_norm_sq,err_cos,err_relnorm";

/// Undefined error metrics are written as empty fields.
inline void write_run_csv(std::ostream& out, const harness::RunRecord& rec) {
  out << kRunCsvHeader << '\n';
  for (const harness::RunRow& r : rec.rows)
    out << r.step << ',' << format_real(r.lr) << ',' << format_real(r.loss) << ',' << format_real(r.grad_norm_sq)
        << ',' << format_real(r.m_norm_sq) << ',' << format_optional(r.err_cos) << ','
        << format_optional(r.err_relnorm) << '\n';
}

// ---------------------------------------------------------------------------
// simulate-1d
// ---------------------------------------------------------------------------

struct Simulate1dParams {
  std::vector<theory::Regime> regimes{theory::Regime::Eco};
  double L = 1.0;
  std::vector<double> etas{0.1};
  std::vector<double> betas{0.9};
  double sigma2 = 1.0;
  std::uint64_t steps = 10'000'000;
  std::uint64_t seed = 0;

  void validate() const {
    if (regimes.empty() || etas.empty() || betas.empty())
      throw ConfigError("simulate-1d needs at least one regime, eta and beta");
    if (!(L > 0.0)) throw ConfigError("'L' must be positive");
    if (!(sigma2 >= 0.0)) throw ConfigError("'sigma2' must be >= 0");
    if (steps < 5) throw ConfigError("'steps' must be >= 5 (20% burn-in)");
    for (double b : betas)
      if (!(b > 0.0 && b < 1.0)) throw ConfigError("'beta' must lie in the open interval (0, 1)");
    for (double e : etas) {
      if (!(e > 0.0)) throw ConfigError("'eta' must be positive");
      for (double b : betas)
        if (!theory::stability_check(L, e, b))
          throw ConfigError("'eta' = " + format_real(e) + " is unstable for beta = " + format_real(b) +
                            " (need eta < 2(1+beta)/((1-beta)L))");
    }
  }
};

inline std::vector<validation::SimulationRow> simulate_1d(const Simulate1dParams& p) {
  p.validate();
  std::vector<validation::SimulationRow> rows;
  for (double eta : p.etas)
    for (double beta : p.betas)
      for (theory::Regime r : p.regimes)
        rows.push_back(validation::simulate_cell(r, p.L, eta, beta, p.sigma2, p.steps, p.seed));
  return rows;
}

inline void write_simulation_csv(std::ostream& out, const std::vector<validation::SimulationRow>& rows) {
  out << "eta,beta,regime,closed_form_u,monte_carlo_u,rel_err\n";
  for (const auto& r : rows)
    out << format_real(r.eta) << ',' << format_real(r.beta) << ',' << theory::to_string(r.regime) << ','
        << format_real(r.closed_form_u) << ',' << format_real(r.monte_carlo_u) << ',' << format_real(r.rel_err)
        << '\n';
}

// ---------------------------------------------------------------------------
// validate-theory
// ---------------------------------------------------------------------------

inline Json report_json(const std::vector<validation::CriterionResult>& results) {
  Json arr = Json::array();
  bool all = true;
  for (const auto& r : results) {
    Json measured = Json::object(), thresholds = Json::object();
    for (const auto& m : r.measured) measured[m.name] = m.value;
    for (const auto& t : r.thresholds) thresholds[t.name] = t.value;
    arr.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"measured", measured},
                   {"thresholds", thresholds}});
    all = all && r.passed;
  }
  return {{"passed", all}, {"criteria", arr}};
}

inline std::string summary_line(const validation::CriterionResult& r) {
  std::ostringstream ss;
  ss << (r.passed ? "PASS" : "FAIL") << " [" << std::setw(2) << r.id << "] " << r.name;
  for (const auto& m : r.measured)
    if (m.name != "seconds") ss << ' ' << m.name << '=' << std::setprecision(6) << m.value;
  return ss.str();
}

/// Runs every criterion, logging one line each. Returns the results in order.
inline std::vector<validation::CriterionResult> run_validation(std::ostream& log) {
  std::vector<validation::CriterionResult> results;
  for (const auto& c : validation::all_criteria()) {
    results.push_back(c());
    log << summary_line(results.back()) << std::endl;
  }
  return results;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareRow {
  std::string config;
  double final_loss = 0.0;
  bool diverged = false;
  double bytes_per_param = 0.0;
};

/// Runs configs concurrently; rows come back in input order.
inline std::vector<CompareRow> compare(const std::vector<std::string>& paths) {
  std::vector<ExperimentConfig> cfgs;
  for (const std::string& p : paths) cfgs.push_back(parse_config_file(p));
  std::vector<std::future<harness::RunRecord>> runs;
  for (const ExperimentConfig& c : cfgs)
    runs.push_back(std::async(std::launch::async, [&c] { return harness::run_training(c.train); }));
  std::vector<CompareRow> rows;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const harness::RunRecord rec = runs[i].get();
    rows.push_back({paths[i], rec.final_loss, rec.diverged, config_bytes_per_param(cfgs[i])});
  }
  return rows;
}

inline void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "config,final_loss,diverged,bytes_per_param\n";
  for (const auto& r : rows)
    out << r.config << ',' << format_real(r.final_loss) << ',' << (r.diverged ? 1 : 0) << ','
        << format_real(r.bytes_per_param) << '\n';
}

}  // namespace eco::cli
