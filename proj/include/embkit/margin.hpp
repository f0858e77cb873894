#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace embkit {

// Per-epoch additive angular margin: m(e) = min(m_init + stride_s*(e-1), m_max).
// All quantities are radians. m_max is capped at pi/2 so theta + m stays in
// a monotone regime of cos for unit-margin sanity checks.
struct MarginSchedule {
  double m_init = 0.1;
  double stride_s = 0.1;
  double m_max = 0.5;
};

void validate(const MarginSchedule& sched);

// Margin for 1-based epoch e. Nondecreasing in e; equals m_init at e = 1.
double margin_at_epoch(const MarginSchedule& sched, int epoch);

// Class-prototype head. Rows are stored unnormalized and unit-normalized at
// use; `scale` multiplies every logit.
struct ArcFaceParams {
  int class_count = 0;
  int embed_dim = 0;
  std::vector<double> weights;  // class_count x embed_dim, row-major
  double scale = 30.0;

  std::span<const double> row(int j) const {
    return {weights.data() + static_cast<std::size_t>(j) * embed_dim,
            static_cast<std::size_t>(embed_dim)};
  }
};

ArcFaceParams init_arcface(int class_count, int embed_dim, double scale,
                           std::uint64_t seed);

// Logits for a unit-length embedding: scale*cos(theta_j) for j != target and
// scale*cos(theta_target + m) for the target, computed as
// scale*(cos*cos(m) - sin*sin(m)) with sin = sqrt(max(0, 1 - cos^2)).
// When cos(theta) < cos(pi - m) the target logit falls back to
// scale*(cos(theta) - m*sin(m)) so theta + m never wraps past pi.
std::vector<double> arcface_logits(const ArcFaceParams& params,
                                   std::span<const double> embedding, int target,
                                   double margin);

// Softmax cross-entropy over arcface_logits, log-sum-exp shifted.
double arcface_loss(const ArcFaceParams& params, std::span<const double> embedding,
                    int target, double margin);

struct ArcFaceGrad {
  double loss = 0.0;
  std::vector<double> d_embedding;  // w.r.t. the raw (pre-normalization) input
  std::vector<double> d_weights;    // w.r.t. the raw weight rows
};

// Loss and exact gradients through both unit normalizations and the
// cos(theta + m) chain rule. At |cos(theta)| == 1 the sin-term derivative is
// assigned its one-sided value of zero.
ArcFaceGrad arcface_grad(const ArcFaceParams& params,
                         std::span<const double> raw_embedding, int target,
                         double margin);

}  // namespace embkit
