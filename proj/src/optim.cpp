#include "embkit/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "embkit/errors.hpp"

namespace embkit {

void validate(const StratifiedLrConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr))
    throw ConfigError("optim: lr must be positive");
  if (!(cfg.c > 0.0 && cfg.c <= 1.0))
    throw ConfigError("optim: reduction factor c must be in (0, 1]");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("optim: weight_decay must be >= 0");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("optim: betas must be in (0, 1)");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("optim: epsilon must be > 0");
  if (cfg.total_epochs < 1) throw ConfigError("optim: total_epochs must be >= 1");
  if (!(cfg.eta_min >= 0.0) || cfg.eta_min > cfg.lr)
    throw ConfigError("optim: eta_min must be in [0, lr]");
}

double backbone_lr(const StratifiedLrConfig& cfg) {
  validate(cfg);
  return cfg.lr * cfg.c;
}

double cosine_lr(const StratifiedLrConfig& cfg, int epoch) {
  validate(cfg);
  if (epoch < 1 || epoch > cfg.total_epochs)
    throw ArgumentError("cosine_lr: epoch " + std::to_string(epoch) +
                        " outside [1, " + std::to_string(cfg.total_epochs) + "]");
  if (cfg.total_epochs < 2) return cfg.lr;  // degenerate schedule: constant
  const double progress =
      static_cast<double>(epoch - 1) / static_cast<double>(cfg.total_epochs - 1);
  return cfg.eta_min +
         0.5 * (cfg.lr - cfg.eta_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(std::span<double> params, std::span<const double> grads,
                Moments& state, std::int64_t step, double group_lr,
                const StratifiedLrConfig& cfg, bool apply_weight_decay,
                std::string_view block_name) {
  if (params.size() != grads.size())
    throw ArgumentError("adamw_step: param/grad size mismatch in block '" +
                        std::string(block_name) + "'");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ArgumentError("adamw_step: moment shape mismatch in block '" +
                        std::string(block_name) + "'");
  if (step < 1) throw ArgumentError("adamw_step: step must be >= 1");

  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double wd = apply_weight_decay ? cfg.weight_decay : 0.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw NumericError("adamw_step: non-finite gradient in block '" +
                         std::string(block_name) + "' at element " + std::to_string(i));
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= group_lr * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) + wd * params[i]);
  }
}

}  // namespace embkit
