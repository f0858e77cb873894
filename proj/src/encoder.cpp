#include "embkit/encoder.hpp"

#include <cmath>
#include <string>

#include "embkit/errors.hpp"
#include "embkit/rng.hpp"
#include "embkit/vecstore.hpp"

namespace embkit {

namespace {

Affine init_affine(int in, int out, SplitMix64& rng) {
  Affine layer;
  layer.in = in;
  layer.out = out;
  layer.w.resize(static_cast<std::size_t>(in) * out);
  layer.b.assign(static_cast<std::size_t>(out), 0.0);
  const double bound = std::sqrt(6.0 / (in + out));
  for (auto& w : layer.w) w = bound * (2.0 * rng.uniform() - 1.0);
  return layer;
}

// y = W x + b, W row-major out x in.
void affine_forward(const Affine& layer, std::span<const double> x,
                    std::vector<double>& y) {
  y.assign(static_cast<std::size_t>(layer.out), 0.0);
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    double acc = layer.b[static_cast<std::size_t>(o)];
    for (int i = 0; i < layer.in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
}

// Accumulates dW = dy (x)T and db = dy; returns dx when wanted.
void affine_backward(const Affine& layer, std::span<const double> x,
                     std::span<const double> dy, Affine& grad,
                     std::vector<double>* dx) {
  for (int o = 0; o < layer.out; ++o) {
    const double g = dy[static_cast<std::size_t>(o)];
    double* grow = grad.w.data() + static_cast<std::size_t>(o) * layer.in;
    for (int i = 0; i < layer.in; ++i) grow[i] += g * x[static_cast<std::size_t>(i)];
    grad.b[static_cast<std::size_t>(o)] += g;
  }
  if (dx) {
    dx->assign(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double g = dy[static_cast<std::size_t>(o)];
      const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) (*dx)[static_cast<std::size_t>(i)] += g * row[i];
    }
  }
}

Affine zero_like(const Affine& layer) {
  Affine grad;
  grad.in = layer.in;
  grad.out = layer.out;
  grad.w.assign(layer.w.size(), 0.0);
  grad.b.assign(layer.b.size(), 0.0);
  return grad;
}

}  // namespace

void validate(const EncoderConfig& config) {
  if (config.dim_in < 1) throw ConfigError("encoder: dim_in must be >= 1");
  if (config.backbone_widths.empty())
    throw ConfigError("encoder: need at least one backbone layer");
  for (int w : config.backbone_widths)
    if (w < 1) throw ConfigError("encoder: backbone widths must be >= 1");
  if (config.with_projection && config.projection_width < 1)
    throw ConfigError("encoder: projection_width must be >= 1");
  if (config.embed_dim < 1 ||
      config.embed_dim > static_cast<int>(kMaxEmbedDim))
    throw ConfigError("encoder: embed_dim must be in [1, 64], got " +
                      std::to_string(config.embed_dim));
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0))
    throw ConfigError("encoder: dropout_rate must be in [0, 1)");
}

std::size_t EncoderState::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : backbone) count += layer.w.size() + layer.b.size();
  if (projection) count += projection->w.size() + projection->b.size();
  return count + neck.w.size() + neck.b.size();
}

EncoderState init_encoder(const EncoderConfig& config) {
  validate(config);
  EncoderState state;
  state.config = config;
  SplitMix64 rng(derive_seed(config.seed, seed_tag::kEncoderInit));

  int width = config.dim_in;
  for (int next : config.backbone_widths) {
    state.backbone.push_back(init_affine(width, next, rng));
    width = next;
  }
  if (config.with_projection) {
    state.projection = init_affine(width, config.projection_width, rng);
    width = config.projection_width;
  }
  state.neck = init_affine(width, config.embed_dim, rng);
  return state;
}

std::vector<double> encoder_forward(const EncoderState& state,
                                    std::span<const double> x, RunMode mode,
                                    std::uint64_t dropout_seed, ForwardCache* cache) {
  if (x.size() != static_cast<std::size_t>(state.config.dim_in))
    throw ArgumentError("encoder_forward: input length != dim_in");
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("encoder_forward: non-finite input");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.mode = mode;
  c.revision = state.revision;

  std::vector<double> activation(x.begin(), x.end());
  for (const auto& layer : state.backbone) {
    c.backbone_in.push_back(activation);
    std::vector<double> out;
    affine_forward(layer, activation, out);
    for (auto& v : out) v = std::tanh(v);
    c.backbone_act.push_back(out);
    activation = std::move(out);
  }

  if (state.projection) {
    c.projection_in = activation;
    std::vector<double> out;
    affine_forward(*state.projection, activation, out);
    activation = std::move(out);
  }

  c.neck_in = activation;
  affine_forward(state.neck, activation, c.pre_norm);

  if (mode == RunMode::kTrain && state.config.dropout_rate > 0.0) {
    const double rate = state.config.dropout_rate;
    SplitMix64 rng(dropout_seed);
    c.dropout_mask.resize(c.pre_norm.size());
    // Inverted dropout: kept units are scaled by 1/(1-rate) so the masked
    // activation matches the unmasked one in expectation.
    for (std::size_t i = 0; i < c.pre_norm.size(); ++i) {
      const bool keep = rng.uniform() >= rate;
      c.dropout_mask[i] = keep ? 1.0 / (1.0 - rate) : 0.0;
      c.pre_norm[i] *= c.dropout_mask[i];
    }
  }

  double norm2 = 0.0;
  for (double v : c.pre_norm) norm2 += v * v;
  c.norm = std::sqrt(norm2);
  if (c.norm < 1e-12)
    throw NumericError("encoder_forward: pre-normalization embedding has zero norm");

  c.embedding.resize(c.pre_norm.size());
  for (std::size_t i = 0; i < c.pre_norm.size(); ++i)
    c.embedding[i] = c.pre_norm[i] / c.norm;
  return c.embedding;
}

EncoderGrads encoder_backward(const EncoderState& state, const ForwardCache& cache,
                              std::span<const double> d_embedding) {
  if (cache.revision != state.revision)
    throw ContractError(
        "encoder_backward: stale cache (parameters changed since forward)");
  if (cache.backbone_in.size() != state.backbone.size() ||
      cache.embedding.size() != static_cast<std::size_t>(state.config.embed_dim))
    throw ContractError("encoder_backward: cache does not match this encoder");
  if (d_embedding.size() != cache.embedding.size())
    throw ArgumentError("encoder_backward: d_embedding length != embed_dim");

  EncoderGrads grads;
  for (const auto& layer : state.backbone) grads.backbone.push_back(zero_like(layer));
  if (state.projection) grads.projection = zero_like(*state.projection);
  grads.neck = zero_like(state.neck);

  // Through y = z/||z||: dz = (dy - (dy.y) y) / ||z||.
  const std::size_t dim = cache.embedding.size();
  double radial = 0.0;
  for (std::size_t i = 0; i < dim; ++i) radial += d_embedding[i] * cache.embedding[i];
  std::vector<double> d_pre(dim);
  for (std::size_t i = 0; i < dim; ++i)
    d_pre[i] = (d_embedding[i] - radial * cache.embedding[i]) / cache.norm;

  if (cache.mode == RunMode::kTrain && !cache.dropout_mask.empty())
    for (std::size_t i = 0; i < dim; ++i) d_pre[i] *= cache.dropout_mask[i];

  std::vector<double> d_neck_in;
  affine_backward(state.neck, cache.neck_in, d_pre, grads.neck,
                  state.frozen_backbone ? nullptr : &d_neck_in);
  if (state.frozen_backbone) return grads;  // backbone blocks stay exact zeros

  std::vector<double> d_act = std::move(d_neck_in);
  if (state.projection) {
    std::vector<double> d_proj_in;
    affine_backward(*state.projection, cache.projection_in, d_act, *grads.projection,
                    &d_proj_in);
    d_act = std::move(d_proj_in);
  }

  for (std::size_t li = state.backbone.size(); li-- > 0;) {
    const auto& act = cache.backbone_act[li];
    for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= 1.0 - act[i] * act[i];
    std::vector<double> d_in;
    affine_backward(state.backbone[li], cache.backbone_in[li], d_act,
                    grads.backbone[li], li > 0 ? &d_in : nullptr);
    if (li > 0) d_act = std::move(d_in);
  }
  return grads;
}

}  // namespace embkit
