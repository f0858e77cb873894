#include "embkit/margin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "embkit/errors.hpp"
#include "embkit/rng.hpp"

namespace embkit {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void check_inputs(const ArcFaceParams& params, std::span<const double> embedding,
                  int target, double margin) {
  if (params.class_count < 2) throw ArgumentError("arcface: class_count must be >= 2");
  if (params.embed_dim < 1) throw ArgumentError("arcface: embed_dim must be >= 1");
  if (params.weights.size() !=
      static_cast<std::size_t>(params.class_count) * params.embed_dim)
    throw ArgumentError("arcface: weight matrix shape mismatch");
  if (embedding.size() != static_cast<std::size_t>(params.embed_dim))
    throw ArgumentError("arcface: embedding length != embed_dim");
  if (target < 0 || target >= params.class_count)
    throw ArgumentError("arcface: target " + std::to_string(target) +
                        " outside [0, class_count)");
  if (!(margin >= 0.0) || !std::isfinite(margin))
    throw ArgumentError("arcface: margin must be finite and >= 0");
  if (!std::isfinite(params.scale) || params.scale <= 0.0)
    throw ArgumentError("arcface: scale must be positive");
}

struct UnitRows {
  std::vector<double> unit;      // normalized rows, class_count x embed_dim
  std::vector<double> inv_norm;  // 1/||w_j||
};

UnitRows normalize_rows(const ArcFaceParams& params) {
  UnitRows rows;
  rows.unit.resize(params.weights.size());
  rows.inv_norm.resize(static_cast<std::size_t>(params.class_count));
  for (int j = 0; j < params.class_count; ++j) {
    const auto r = params.row(j);
    const double n = norm(r);
    if (n < 1e-300)
      throw NumericError("arcface: zero-norm weight row " + std::to_string(j));
    rows.inv_norm[static_cast<std::size_t>(j)] = 1.0 / n;
    double* out = rows.unit.data() + static_cast<std::size_t>(j) * params.embed_dim;
    for (int d = 0; d < params.embed_dim; ++d) out[d] = r[d] / n;
  }
  return rows;
}

// Target logit pre-scale: psi(c) = cos(theta + m) on the main branch,
// c - m*sin(m) once theta + m would pass pi (c below cos(pi - m)).
double psi(double c, double margin, bool* fallback) {
  const double threshold = std::cos(std::numbers::pi - margin);
  if (c < threshold) {
    if (fallback) *fallback = true;
    return c - margin * std::sin(margin);
  }
  if (fallback) *fallback = false;
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
  return c * std::cos(margin) - sin_theta * std::sin(margin);
}

double psi_derivative(double c, double margin, bool fallback) {
  if (fallback) return 1.0;
  const double s2 = std::max(0.0, 1.0 - c * c);
  if (s2 == 0.0) return std::cos(margin);  // one-sided convention at |c| = 1
  return std::cos(margin) + (c / std::sqrt(s2)) * std::sin(margin);
}

std::vector<double> logits_from_cos(const ArcFaceParams& params,
                                    const std::vector<double>& cos_theta, int target,
                                    double margin, bool* fallback) {
  std::vector<double> logits(cos_theta.size());
  for (std::size_t j = 0; j < cos_theta.size(); ++j)
    logits[j] = params.scale * cos_theta[j];
  logits[static_cast<std::size_t>(target)] =
      params.scale * psi(cos_theta[static_cast<std::size_t>(target)], margin, fallback);
  return logits;
}

double cross_entropy(const std::vector<double>& logits, int target,
                     std::vector<double>* softmax_out) {
  double max_logit = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericError("arcface: non-finite logit");
    max_logit = std::max(max_logit, z);
  }
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max_logit);
  const double log_sum = std::log(sum);
  if (softmax_out) {
    softmax_out->resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j)
      (*softmax_out)[j] = std::exp(logits[j] - max_logit) / sum;
  }
  return log_sum - (logits[static_cast<std::size_t>(target)] - max_logit);
}

}  // namespace

void validate(const MarginSchedule& sched) {
  if (!(sched.m_init >= 0.0) || !std::isfinite(sched.m_init))
    throw ArgumentError("margin schedule: m_init must be finite and >= 0");
  if (!(sched.stride_s >= 0.0) || !std::isfinite(sched.stride_s))
    throw ArgumentError("margin schedule: stride_s must be finite and >= 0");
  if (!(sched.m_max >= sched.m_init))
    throw ArgumentError("margin schedule: m_max must be >= m_init");
  if (sched.m_max > kHalfPi)
    throw ArgumentError("margin schedule: m_max must be <= pi/2");
}

double margin_at_epoch(const MarginSchedule& sched, int epoch) {
  validate(sched);
  if (epoch < 1)
    throw ArgumentError("margin_at_epoch: epoch must be >= 1, got " +
                        std::to_string(epoch));
  return std::min(sched.m_init + sched.stride_s * (epoch - 1), sched.m_max);
}

ArcFaceParams init_arcface(int class_count, int embed_dim, double scale,
                           std::uint64_t seed) {
  if (class_count < 2) throw ConfigError("init_arcface: class_count must be >= 2");
  if (embed_dim < 1) throw ConfigError("init_arcface: embed_dim must be >= 1");
  ArcFaceParams params;
  params.class_count = class_count;
  params.embed_dim = embed_dim;
  params.scale = scale;
  params.weights.resize(static_cast<std::size_t>(class_count) * embed_dim);
  SplitMix64 rng(derive_seed(seed, seed_tag::kHeadInit));
  const double bound = std::sqrt(6.0 / (class_count + embed_dim));
  for (auto& w : params.weights) w = bound * (2.0 * rng.uniform() - 1.0);
  return params;
}

std::vector<double> arcface_logits(const ArcFaceParams& params,
                                   std::span<const double> embedding, int target,
                                   double margin) {
  check_inputs(params, embedding, target, margin);
  if (std::fabs(norm(embedding) - 1.0) > 1e-6)
    throw ArgumentError("arcface_logits: embedding must be unit length within 1e-6");
  const UnitRows rows = normalize_rows(params);
  std::vector<double> cos_theta(static_cast<std::size_t>(params.class_count));
  for (int j = 0; j < params.class_count; ++j) {
    std::span<const double> wj{
        rows.unit.data() + static_cast<std::size_t>(j) * params.embed_dim,
        static_cast<std::size_t>(params.embed_dim)};
    cos_theta[static_cast<std::size_t>(j)] =
        std::clamp(dot(wj, embedding), -1.0, 1.0);
  }
  return logits_from_cos(params, cos_theta, target, margin, nullptr);
}

double arcface_loss(const ArcFaceParams& params, std::span<const double> embedding,
                    int target, double margin) {
  const auto logits = arcface_logits(params, embedding, target, margin);
  return cross_entropy(logits, target, nullptr);
}

ArcFaceGrad arcface_grad(const ArcFaceParams& params,
                         std::span<const double> raw_embedding, int target,
                         double margin) {
  check_inputs(params, raw_embedding, target, margin);

  const double x_norm = norm(raw_embedding);
  if (x_norm < 1e-300) throw NumericError("arcface_grad: zero-norm embedding");
  const std::size_t dim = raw_embedding.size();
  std::vector<double> x_hat(dim);
  for (std::size_t d = 0; d < dim; ++d) x_hat[d] = raw_embedding[d] / x_norm;

  const UnitRows rows = normalize_rows(params);
  const std::size_t classes = static_cast<std::size_t>(params.class_count);
  std::vector<double> cos_theta(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    std::span<const double> wj{rows.unit.data() + j * dim, dim};
    cos_theta[j] = std::clamp(dot(wj, x_hat), -1.0, 1.0);
  }

  bool fallback = false;
  const auto logits = logits_from_cos(params, cos_theta, target, margin, &fallback);
  std::vector<double> softmax;
  ArcFaceGrad grad;
  grad.loss = cross_entropy(logits, target, &softmax);

  // dL/d cos_j = scale * (p_j - [j==target]) * (psi'(cos_t) on the target).
  std::vector<double> d_cos(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    d_cos[j] = params.scale * (softmax[j] - (static_cast<int>(j) == target ? 1.0 : 0.0));
  }
  d_cos[static_cast<std::size_t>(target)] *=
      psi_derivative(cos_theta[static_cast<std::size_t>(target)], margin, fallback);

  // Embedding side: g_xhat = sum_j d_cos[j] * w_hat_j, then pull back
  // through x_hat = x/||x|| (tangent projection over the norm).
  std::vector<double> g_xhat(dim, 0.0);
  for (std::size_t j = 0; j < classes; ++j) {
    const double* wj = rows.unit.data() + j * dim;
    for (std::size_t d = 0; d < dim; ++d) g_xhat[d] += d_cos[j] * wj[d];
  }
  const double radial = dot(g_xhat, x_hat);
  grad.d_embedding.resize(dim);
  for (std::size_t d = 0; d < dim; ++d)
    grad.d_embedding[d] = (g_xhat[d] - radial * x_hat[d]) / x_norm;

  // Weight side: g_what_j = d_cos[j] * x_hat, same pullback per row.
  grad.d_weights.assign(params.weights.size(), 0.0);
  for (std::size_t j = 0; j < classes; ++j) {
    const double* wj = rows.unit.data() + j * dim;
    double* out = grad.d_weights.data() + j * dim;
    double row_radial = 0.0;
    for (std::size_t d = 0; d < dim; ++d) row_radial += d_cos[j] * x_hat[d] * wj[d];
    for (std::size_t d = 0; d < dim; ++d)
      out[d] = (d_cos[j] * x_hat[d] - row_radial * wj[d]) * rows.inv_norm[j];
  }
  return grad;
}

}  // namespace embkit
