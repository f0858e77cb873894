#pragma once

#include <filesystem>
#include <optional>

#include "embkit/encoder.hpp"
#include "embkit/margin.hpp"
#include "embkit/optim.hpp"

namespace embkit {

// EKC1 checkpoint container: magic `EKC1`, u32 version, u8 section flags
// (bit 0 head, bit 1 optimizer moments), the encoder config block, then all
// parameters as little-endian 8-byte floats in fixed order: backbone layer
// 0 weights then bias, further backbone layers, projection (when present),
// neck, then the optional head and moment sections. Round trips are byte
// exact; see README.md for the full field list.
struct Checkpoint {
  EncoderState encoder;
  std::optional<ArcFaceParams> head;
  std::optional<AdamWMoments> moments;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace embkit
