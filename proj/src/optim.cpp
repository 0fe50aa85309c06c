#include "anchoralign/optim.hpp"

#include <cmath>

#include "anchoralign/error.hpp"

namespace anchoralign {

void ScheduleConfig::validate() const {
  if (warmup_steps == 0 || warmup_steps > total_steps) {
    throw Error(ErrorCode::kInvalidArgument,
                "schedule needs 0 < warmup_steps <= total_steps, got warmup=" +
                    std::to_string(warmup_steps) + " total=" + std::to_string(total_steps));
  }
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) {
    throw Error(ErrorCode::kInvalidArgument, "base learning rate must be finite and >= 0");
  }
}

double lr_at(std::size_t step, const ScheduleConfig& cfg) {
  cfg.validate();
  if (step > cfg.total_steps) {
    throw Error(ErrorCode::kInvalidArgument, "step " + std::to_string(step) + " beyond total " +
                                                 std::to_string(cfg.total_steps));
  }
  if (step < cfg.warmup_steps) {
    return cfg.base_lr * (double(step + 1) / double(cfg.warmup_steps));
  }
  if (cfg.total_steps == cfg.warmup_steps) return 0.0;
  return cfg.base_lr *
         (double(cfg.total_steps - step) / double(cfg.total_steps - cfg.warmup_steps));
}

void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<double>> grads, AdamWState& state, double lr,
                const AdamWHyper& hyper, std::span<const std::string> names) {
  auto label = [&](std::size_t i) {
    return i < names.size() ? names[i] : "tensor " + std::to_string(i);
  };
  if (params.size() != grads.size()) {
    throw Error(ErrorCode::kShapeMismatch, std::to_string(params.size()) + " parameter tensors but " +
                                               std::to_string(grads.size()) + " gradients");
  }
  if (!(lr >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw Error(ErrorCode::kShapeMismatch, label(i) + ": " + std::to_string(params[i].size()) +
                                                 " values but gradient has " +
                                                 std::to_string(grads[i].size()));
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) throw Error(ErrorCode::kNonFinite, "gradient of " + label(i));
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  } else if (state.m.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state tracks " + std::to_string(state.m.size()) +
                                               " tensors, got " + std::to_string(params.size()));
  }

  ++state.t;
  const double bc1 = 1.0 - std::pow(hyper.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(hyper.beta2, double(state.t));
  const double decay = 1.0 - lr * hyper.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i];
    auto g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) throw Error(ErrorCode::kShapeMismatch, label(i) + ": optimizer state size");
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] *= decay;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

}  // namespace anchoralign
