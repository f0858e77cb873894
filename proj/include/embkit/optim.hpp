#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace embkit {

// AdamW with a cosine-annealed base rate and a reduced backbone rate
// lr_b = lr * c. Annealing is per epoch (the schedule unit of the rest of
// the pipeline), spanning either the whole run or, optionally, each
// fine-tuning phase separately.
struct StratifiedLrConfig {
  double lr = 1e-4;         // non-backbone base rate
  double c = 1e-3;          // backbone reduction factor, in (0, 1]
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int total_epochs = 3;
  double eta_min = 0.0;
};

void validate(const StratifiedLrConfig& cfg);

double backbone_lr(const StratifiedLrConfig& cfg);

// Annealed non-backbone rate for 1-based epoch e:
//   eta(e) = eta_min + (lr - eta_min)/2 * (1 + cos(pi*(e-1)/(total_epochs-1)))
// total_epochs < 2 degenerates to a constant lr. The backbone group uses
// cosine_lr(cfg, e) * c.
double cosine_lr(const StratifiedLrConfig& cfg, int epoch);

struct Moments {
  std::vector<double> m;
  std::vector<double> v;
};

// One decoupled-weight-decay Adam update on a parameter block:
//   m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  bias-corrected by step;
//   theta <- theta - group_lr * (m_hat/(sqrt(v_hat)+eps) + wd*theta)
// `step` is the 1-based update count. Weight decay is skipped when
// apply_weight_decay is false (bias blocks). Throws NumericError naming
// `block_name` on a non-finite gradient.
void adamw_step(std::span<double> params, std::span<const double> grads,
                Moments& state, std::int64_t step, double group_lr,
                const StratifiedLrConfig& cfg, bool apply_weight_decay,
                std::string_view block_name);

// Moment buffers for an ordered list of parameter blocks plus the shared
// step counter; serialized into the EKC1 checkpoint when requested.
struct AdamWMoments {
  std::int64_t t = 0;
  std::vector<Moments> blocks;
};

}  // namespace embkit
