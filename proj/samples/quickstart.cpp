// Trains the same quadratic with master weights, naive quantization and ECO
// on a coarse fixed grid, then prints the final losses.

#include <cstdio>

#include "eco/harness/training.hpp"

int main() {
  using namespace eco;

  harness::TrainConfig cfg;
  cfg.objective = harness::QuadraticNDSpec{32, 0.05, 1.0, true};
  cfg.hyper.eta = 0.05;
  cfg.hyper.beta1 = 0.9;
  cfg.steps = 2000;
  cfg.seed = 3;
  cfg.init_scale = 2.0;
  cfg.schedule = {harness::LrSchedule::Kind::Cosine, 0.05, 5e-4, 0.05};

  struct Variant {
    const char* name;
    Mode mode;
    Rounding rounding;
  };
  const Variant variants[] = {{"master weights, RTN", Mode::MasterWeights, Rounding::RTN},
                              {"naive, RTN", Mode::Naive, Rounding::RTN},
                              {"naive, SR", Mode::Naive, Rounding::SR},
                              {"eco, SR", Mode::Eco, Rounding::SR},
                              {"eco, RTN", Mode::Eco, Rounding::RTN}};
  for (const Variant& v : variants) {
    cfg.mode = v.mode;
    cfg.quant = fixed_step_spec(0.02, v.rounding);
    const harness::RunRecord rec = harness::run_training(cfg);
    std::printf("%-22s final loss %.6g%s\n", v.name, rec.final_loss, rec.diverged ? " (diverged)" : "");
  }
}
