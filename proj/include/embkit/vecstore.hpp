#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <unordered_map>
#include <vector>

namespace embkit {

// Hard cap on stored embedding width (retrieval currency of the system).
inline constexpr std::uint32_t kMaxEmbedDim = 64;

// Row-major id/vector table, the in-memory form of both store files:
//
//   EMB1  unit-length embeddings, dim <= 64   (write_store / read_store)
//   FTR1  raw input feature vectors, any dim  (write_features / read_features)
//
// Layout on disk is identical for both: 4-byte magic, u32 little-endian dim,
// u64 little-endian record count, then per record a u64 id followed by dim
// IEEE-754 single-precision values, little-endian. Round trips are byte
// exact.
struct VectorStore {
  std::uint32_t dim = 0;
  std::vector<std::uint64_t> ids;
  std::vector<float> data;  // ids.size() * dim floats

  std::size_t size() const { return ids.size(); }

  std::span<const float> vec(std::size_t row) const {
    return {data.data() + row * dim, dim};
  }

  // Appends one record; vector length must equal dim.
  void push(std::uint64_t id, std::span<const float> v);

  // id -> row lookup table (built on demand by callers that need it).
  std::unordered_map<std::uint64_t, std::size_t> id_index() const;
};

void write_store(const VectorStore& store, const std::filesystem::path& path);
VectorStore read_store(const std::filesystem::path& path);

void write_features(const VectorStore& store, const std::filesystem::path& path);
VectorStore read_features(const std::filesystem::path& path);

// Checks the EMB1 invariants (dim in [1,64], unique ids, unit vectors
// within 1e-5); throws ValidationError on the first violation.
void validate_embedding_store(const VectorStore& store);

}  // namespace embkit
