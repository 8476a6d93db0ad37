#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "eco/cli/commands.hpp"

namespace {

using eco::cli::ConfigError;
using eco::cli::ExperimentConfig;
using eco::cli::parse_config_text;

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal = R"({"objective": {"kind": "quadratic_1d", "L": 2.0}, "steps": 3})";

TEST(Config, MinimalDocumentUsesDefaults) {
  const ExperimentConfig c = parse_config_text(kMinimal);
  EXPECT_EQ(c.train.steps, 3u);
  EXPECT_EQ(c.train.optimizer, eco::OptimizerKind::Sgdm);
  EXPECT_EQ(c.train.mode, eco::Mode::Eco);
  EXPECT_TRUE(c.train.quant.is_identity());
  EXPECT_DOUBLE_EQ(std::get<eco::harness::Quadratic1DSpec>(c.train.objective).L, 2.0);
  EXPECT_FALSE(c.weight_format.has_value());
}

TEST(Config, NegativeEtaNamesTheField) {
  const std::string msg = error_of(R"({"objective": {"kind": "quadratic_1d"}, "hyper": {"eta": -1}})");
  EXPECT_NE(msg.find("eta"), std::string::npos) << msg;
}

TEST(Config, BetaOfOneIsRejected) {
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "quadratic_1d"}, "hyper": {"beta1": 1.0}})").empty());
}

TEST(Config, MisspelledKeySuggestsNearest) {
  const std::string msg = error_of(R"({"objective": {"kind": "quadratic_1d"}, "hyper": {"betta": 0.5}})");
  EXPECT_NE(msg.find("did you mean 'beta1'"), std::string::npos) << msg;
  const std::string top = error_of(R"({"objective": {"kind": "quadratic_1d"}, "stpes": 4})");
  EXPECT_NE(top.find("did you mean 'steps'"), std::string::npos) << top;
}

TEST(Config, MalformedAndMistypedDocuments) {
  EXPECT_FALSE(error_of("{").empty());
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "quadratic_1d"}, "steps": "ten"})").empty());
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "quadratic_1d"}, "steps": -1})").empty());
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "cubic"}})").empty());
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "quadratic_1d"}, "quant": {"grid": "fp4"}})").empty());
}

TEST(Config, ExactModeRequiresSgdm) {
  const std::string msg =
      error_of(R"({"objective": {"kind": "quadratic_1d"}, "optimizer": "adam", "mode": "exact"})");
  EXPECT_NE(msg.find("exact"), std::string::npos) << msg;
}

TEST(Config, GroupQuantMustNameAParameter) {
  EXPECT_FALSE(
      error_of(R"({"objective": {"kind": "quadratic_1d"}, "group_quant": {"nope": {"grid": "fp8_e4m3"}}})").empty());
}

TEST(Config, InitMustMatchTheParameter) {
  EXPECT_FALSE(error_of(R"({"objective": {"kind": "quadratic_1d"}, "init": [1, 2]})").empty());
  EXPECT_EQ(parse_config_text(R"({"objective": {"kind": "quadratic_1d"}, "init": [1.5]})").train.init,
            std::vector<double>{1.5});
}

TEST(Config, RoundTripThroughSerialize) {
  const std::vector<std::string> docs = {
      kMinimal,
      R"({"objective": {"kind": "quadratic_nd", "dim": 5, "eig_min": 0.2, "eig_max": 3.0, "rotate": false},
          "mode": "exact", "hyper": {"eta": 0.1, "beta1": 0.8, "weight_decay": 0.01},
          "quant": {"grid": "fixed_step", "delta": 0.125, "rounding": "sr"}, "steps": 7, "seed": 11})",
      R"({"objective": {"kind": "linear_regression", "samples": 20, "dim": 3, "noise": 0.3},
          "optimizer": "adam", "mode": "naive", "hyper": {"eta": 0.01, "clip_norm": 2.0},
          "quant": {"grid": "int_symmetric", "bits": 4, "granularity": "row"}, "batch_size": 5,
          "schedule": {"kind": "cosine", "peak": 0.01, "floor": 0.001, "warmup_frac": 0.1},
          "weight_format": "int4", "init_scale": 0.5})",
      R"({"objective": {"kind": "mlp2", "in": 3, "hidden": 4, "out": 2, "samples": 16, "noise": 0.0},
          "mode": "mw", "quant": {"grid": "uniform_max", "rho": 7.0}, "quantize_io": true,
          "group_quant": {"W_mid": {"grid": "noise_model", "delta": 0.01}}, "metrics_every": 3})",
  };
  for (const std::string& d : docs) {
    ExperimentConfig a;
    ASSERT_NO_THROW(a = parse_config_text(d)) << d;
    const ExperimentConfig b = parse_config_text(eco::cli::serialize(a));
    EXPECT_TRUE(a == b) << eco::cli::serialize(a);
  }
}

TEST(Config, SampleConfigsParseAndRoundTrip) {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(ECO_SAMPLE_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const ExperimentConfig a = eco::cli::parse_config_file(entry.path().string());
    EXPECT_TRUE(a == parse_config_text(eco::cli::serialize(a))) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 3u);
}

TEST(Config, EditDistanceAndNearestKey) {
  EXPECT_EQ(eco::cli::edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(eco::cli::edit_distance("", "abc"), 3u);
  EXPECT_EQ(eco::cli::edit_distance("eta", "eta"), 0u);
  const std::vector<std::string> keys{"eta", "beta1", "beta2", "epsilon"};
  EXPECT_EQ(eco::cli::nearest_key("epsilom", keys).value_or(""), "epsilon");
}

TEST(Output, FormatRealKeepsSeventeenDigits) {
  EXPECT_EQ(eco::cli::format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(eco::cli::format_real(2.0), "2");
  EXPECT_EQ(std::stod(eco::cli::format_real(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Output, ZeroStepRunIsHeaderOnly) {
  ExperimentConfig c = parse_config_text(R"({"objective": {"kind": "quadratic_1d"}, "steps": 0})");
  std::ostringstream out;
  eco::cli::write_run_csv(out, eco::harness::run_training(c.train));
  EXPECT_EQ(out.str(), std::string(eco::cli::kRunCsvHeader) + "\n");
}

TEST(Output, RunCsvHasOneRowPerRecordedStep) {
  ExperimentConfig c = parse_config_text(
      R"({"objective": {"kind": "quadratic_1d"}, "steps": 4, "init": [1.0],
          "quant": {"grid": "fixed_step", "delta": 0.1}})");
  std::ostringstream out;
  eco::cli::write_run_csv(out, eco::harness::run_training(c.train));
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    if (lines > 0) {
      EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6) << line;
    }
    ++lines;
  }
  EXPECT_EQ(lines, 1u + 5u);
}

TEST(Simulate1d, RejectsBadParameters) {
  eco::cli::Simulate1dParams p;
  p.steps = 100;
  EXPECT_NO_THROW(p.validate());
  auto bad = p;
  bad.etas = {100.0};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.betas = {1.0};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.sigma2 = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.regimes.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = p;
  bad.steps = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Simulate1d, RowsFollowTheGridOrder) {
  eco::cli::Simulate1dParams p;
  p.regimes = {eco::theory::Regime::MW, eco::theory::Regime::Eco};
  p.etas = {0.1, 0.2};
  p.betas = {0.5};
  p.steps = 1000;
  const auto rows = eco::cli::simulate_1d(p);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].regime, eco::theory::Regime::MW);
  EXPECT_EQ(rows[1].regime, eco::theory::Regime::Eco);
  EXPECT_EQ(rows[2].eta, 0.2);
}

TEST(Simulate1d, LongRunMatchesClosedForm) {
  eco::cli::Simulate1dParams p;
  p.etas = {0.1};
  p.betas = {0.9};
  p.steps = 2'000'000;
  p.seed = 5;
  const auto rows = eco::cli::simulate_1d(p);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_LT(rows[0].rel_err, 0.05) << rows[0].closed_form_u << " vs " << rows[0].monte_carlo_u;
}

TEST(Memory, ConfigBytesPerParam) {
  const auto bytes = [](const std::string& extra) {
    return eco::cli::config_bytes_per_param(parse_config_text(
        R"({"objective": {"kind": "quadratic_nd", "dim": 4}, )" + extra + "}"));
  };
  const std::string fp8 = R"("quant": {"grid": "fp8_e4m3"})";
  EXPECT_DOUBLE_EQ(bytes(R"("optimizer": "adam", "mode": "eco", )" + fp8), 9.0);
  EXPECT_DOUBLE_EQ(bytes(R"("optimizer": "adam", "mode": "mw", )" + fp8), 13.0);
  EXPECT_DOUBLE_EQ(bytes(R"("optimizer": "sgdm", "mode": "eco", )" + fp8), 5.0);
  EXPECT_DOUBLE_EQ(bytes(R"("optimizer": "sgdm", "mode": "exact", )" + fp8), 9.0);
  EXPECT_DOUBLE_EQ(bytes(R"("optimizer": "adam", "mode": "eco")"), 12.0);
  EXPECT_DOUBLE_EQ(bytes(R"("mode": "eco", "quant": {"grid": "int_symmetric", "bits": 4})"), 4.5);
  EXPECT_DOUBLE_EQ(bytes(R"("mode": "eco", "weight_format": "bf16", )" + fp8), 6.0);
}

TEST(Report, JsonCarriesEveryCriterion) {
  eco::validation::CriterionResult a{1, "first", true, {{"err", 1e-13}}, {{"err_max", 1e-9}}, 0.0};
  eco::validation::CriterionResult b{2, "second", false, {{"x", 2.0}}, {}, 0.0};
  const auto j = eco::cli::report_json({a, b});
  EXPECT_FALSE(j.at("passed").get<bool>());
  ASSERT_EQ(j.at("criteria").size(), 2u);
  EXPECT_EQ(j.at("criteria")[0].at("id").get<int>(), 1);
  EXPECT_DOUBLE_EQ(j.at("criteria")[0].at("thresholds").at("err_max").get<double>(), 1e-9);
  EXPECT_EQ(eco::cli::summary_line(b).rfind("FAIL [ 2] second", 0), 0u);
  EXPECT_TRUE(eco::cli::report_json({a}).at("passed").get<bool>());
}

TEST(Compare, RowsComeBackInInputOrder) {
  const std::string dir = ECO_SAMPLE_CONFIG_DIR;
  const std::vector<std::string> paths{dir + "/quadratic_naive_sr.json", dir + "/quadratic_mw.json",
                                       dir + "/quadratic_eco.json"};
  const auto rows = eco::cli::compare(paths);
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    EXPECT_EQ(rows[i].config, paths[i]);
    const auto cfg = eco::cli::parse_config_file(paths[i]);
    EXPECT_EQ(rows[i].final_loss, eco::harness::run_training(cfg.train).final_loss);
  }
}

}  // namespace
