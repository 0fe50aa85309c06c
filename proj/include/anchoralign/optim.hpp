#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace anchoralign {

struct ScheduleConfig {
  double base_lr = 3e-4;
  std::size_t warmup_steps = 50;
  std::size_t total_steps = 0;

  void validate() const;
};

// Linear warmup from base_lr/warmup at step 0 up to base_lr at step
// warmup-1, then linear decay from base_lr at step == warmup to 0 at
// step == total_steps.
double lr_at(std::size_t step, const ScheduleConfig& cfg);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

// One decoupled-weight-decay Adam step with bias correction:
//   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// State is sized on first use. Gradients are checked for finiteness before
// anything is modified; `names` (optional) label tensors in errors.
void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<double>> grads, AdamWState& state, double lr,
                const AdamWHyper& hyper = {}, std::span<const std::string> names = {});

}  // namespace anchoralign
