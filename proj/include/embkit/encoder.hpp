#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace embkit {

// Trainable encoder: tanh MLP backbone, optional linear projection, linear
// neck with inverted dropout, then L2 normalization to a unit embedding of
// at most 64 dimensions. The projection layer counts as part of the
// backbone group for both freezing and the stratified learning rate; the
// neck is the non-backbone part of the encoder.
struct EncoderConfig {
  int dim_in = 0;
  std::vector<int> backbone_widths;  // at least one hidden layer
  bool with_projection = false;
  int projection_width = 0;
  int embed_dim = 0;  // <= 64
  double dropout_rate = 0.2;
  std::uint64_t seed = 0;
};

void validate(const EncoderConfig& config);

struct Affine {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct EncoderState {
  EncoderConfig config;
  std::vector<Affine> backbone;
  std::optional<Affine> projection;
  Affine neck;
  bool frozen_backbone = false;
  // Bumped whenever parameters are mutated; lets backward() reject caches
  // produced against older parameter values.
  std::uint64_t revision = 0;

  std::size_t parameter_count() const;
};

// Seeded Glorot-uniform init (+-sqrt(6/(fan_in+fan_out))), zero biases.
EncoderState init_encoder(const EncoderConfig& config);

enum class RunMode { kTrain, kEval };

struct ForwardCache {
  std::vector<std::vector<double>> backbone_in;   // input to each backbone affine
  std::vector<std::vector<double>> backbone_act;  // tanh outputs
  std::vector<double> projection_in;
  std::vector<double> neck_in;
  std::vector<double> dropout_mask;  // per unit: 0 or 1/(1-rate); empty in eval
  std::vector<double> pre_norm;      // embedding before L2 normalization
  std::vector<double> embedding;     // unit output
  double norm = 0.0;
  RunMode mode = RunMode::kEval;
  std::uint64_t revision = 0;
};

// Returns the unit embedding. Train mode applies a seeded inverted-dropout
// mask after the neck; eval mode applies none. Deterministic given
// (state, x, mode, dropout_seed).
std::vector<double> encoder_forward(const EncoderState& state,
                                    std::span<const double> x, RunMode mode,
                                    std::uint64_t dropout_seed,
                                    ForwardCache* cache = nullptr);

struct EncoderGrads {
  std::vector<Affine> backbone;
  std::optional<Affine> projection;
  Affine neck;
};

// Exact gradients for the forward pass that produced `cache`. With
// frozen_backbone set, backbone and projection blocks come back as exact
// zeros and their backward work is skipped.
EncoderGrads encoder_backward(const EncoderState& state, const ForwardCache& cache,
                              std::span<const double> d_embedding);

}  // namespace embkit
