// eco: command-line front end for the theory checks, 1D simulations and
// training runs.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "eco/cli/commands.hpp"

namespace {

using namespace eco;
using namespace eco::cli;

// Opens `path` for writing, or returns stdout when the path is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw ConfigError("cannot open output file '" + path + "'");
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

int cmd_validate(const std::string& out) {
  const auto results = run_validation(std::cout);
  const Json report = report_json(results);
  if (!out.empty()) {
    Output o(out);
    o.stream() << report.dump(2) << '\n';
  }
  const bool ok = report.at("passed").get<bool>();
  std::cout << (ok ? "all criteria passed" : "validation FAILED") << '\n';
  return ok ? kOk : kValidationFailure;
}

int cmd_simulate(const std::vector<std::string>& regimes, const Simulate1dParams& base, const std::string& out) {
  Simulate1dParams p = base;
  p.regimes.clear();
  for (const std::string& r : regimes) {
    try {
      p.regimes.push_back(theory::parse_regime(r));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("'regime': ") + e.what());
    }
  }
  const auto rows = simulate_1d(p);
  Output o(out);
  write_simulation_csv(o.stream(), rows);
  return kOk;
}

int cmd_train(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = parse_config_file(config);
  const harness::RunRecord rec = harness::run_training(cfg.train);
  Output o(out);
  write_run_csv(o.stream(), rec);
  if (rec.diverged) std::cerr << "run diverged after " << rec.steps_completed << " steps\n";
  return kOk;
}

int cmd_compare(const std::vector<std::string>& configs, const std::string& out) {
  const auto rows = compare(configs);
  Output o(out);
  write_compare_csv(o.stream(), rows);
  return kOk;
}

int cmd_memory(const std::string& weights, const std::string& master, const std::string& m, const std::string& v) {
  auto fmt = [](const std::string& field, const std::string& s) {
    try {
      return parse_storage_format(s);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("'" + field + "': " + e.what());
    }
  };
  const StorageFormat mf = fmt("master", master), vf = fmt("v", v);
  const double bytes = memory_bytes_per_param(fmt("weights", weights),
                                              mf == StorageFormat::None ? std::nullopt : std::optional{mf},
                                              fmt("m", m), vf == StorageFormat::None ? std::nullopt : std::optional{vf});
  std::cout << format_real(bytes) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-precision training without master weights: theory checks, simulations and runs"};
  app.require_subcommand(1);

  std::string report_out;
  auto* validate = app.add_subcommand("validate-theory", "Run the property suite and report pass/fail");
  validate->add_option("--out", report_out, "JSON report path");

  Simulate1dParams sim;
  std::vector<std::string> regimes{"eco"};
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate-1d", "Monte Carlo vs closed form on f(x) = (L/2) x^2");
  simulate->add_option("--regime", regimes, "mw, naive or eco (repeatable)");
  simulate->add_option("--L", sim.L, "curvature");
  simulate->add_option("--eta", sim.etas, "step sizes (repeatable)");
  simulate->add_option("--beta", sim.betas, "momentum values (repeatable)");
  simulate->add_option("--sigma2", sim.sigma2, "quantization noise variance");
  simulate->add_option("--steps", sim.steps, "simulation length (20% burn-in)");
  simulate->add_option("--seed", sim.seed, "random seed");
  simulate->add_option("--out", sim_out, "CSV path (default stdout)");

  std::string train_config, train_out;
  auto* train = app.add_subcommand("train", "Run one training config and write the per-step CSV");
  train->add_option("--config", train_config, "JSON config")->required();
  train->add_option("--out", train_out, "CSV path (default stdout)");

  std::vector<std::string> compare_configs;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "Run several configs and tabulate final loss and memory");
  cmp->add_option("--configs", compare_configs, "JSON configs")->required();
  cmp->add_option("--out", compare_out, "CSV path (default stdout)");

  std::string w = "fp32", master = "none", m = "fp32", v = "none";
  auto* memory = app.add_subcommand("memory", "Static bytes per parameter");
  memory->add_option("--weights", w, "fp8, bf16, fp32 or int4");
  memory->add_option("--master", master, "none, fp32 or bf16");
  memory->add_option("--m", m, "fp32, fp8 or none");
  memory->add_option("--v", v, "fp32, fp8 or none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*validate) return cmd_validate(report_out);
    if (*simulate) return cmd_simulate(regimes, sim, sim_out);
    if (*train) return cmd_train(train_config, train_out);
    if (*cmp) return cmd_compare(compare_configs, compare_out);
    if (*memory) return cmd_memory(w, master, m, v);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
