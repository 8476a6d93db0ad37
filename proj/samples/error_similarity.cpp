// Tracks how similar consecutive quantization errors are over a master-weight
// run with cosine learning-rate decay. Prints the mean error cosine for each
// third of training.

#include <cstdio>

#include "eco/harness/training.hpp"

int main() {
  using namespace eco;

  harness::TrainConfig cfg;
  cfg.objective = harness::Mlp2Spec{8, 32, 1, 512, 0.05};
  cfg.mode = Mode::MasterWeights;
  cfg.quant = fixed_step_spec(0.01, Rounding::RTN);
  cfg.hyper.beta1 = 0.9;
  cfg.steps = 3000;
  cfg.seed = 1;
  cfg.batch_size = 16;
  cfg.schedule = {harness::LrSchedule::Kind::Cosine, 0.05, 1e-4, 0.05};

  const harness::RunRecord rec = harness::run_training(cfg);
  double sum[3] = {0, 0, 0};
  int count[3] = {0, 0, 0};
  for (const auto& row : rec.rows) {
    if (!row.err_cos || row.step >= cfg.steps) continue;
    const auto third = static_cast<std::size_t>(3 * row.step / cfg.steps);
    sum[third] += *row.err_cos;
    ++count[third];
  }
  for (int i = 0; i < 3; ++i)
    std::printf("third %d: mean cos(e_t, e_t+1) = %.4f over %d steps\n", i + 1, count[i] ? sum[i] / count[i] : 0.0,
                count[i]);
}
