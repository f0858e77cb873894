#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "embkit/vecstore.hpp"

namespace embkit {

struct Hit {
  std::uint64_t id = 0;
  double similarity = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

// Per query: up to k (id, similarity) pairs, similarity nonincreasing,
// equal similarities broken by ascending id.
struct RetrievalResult {
  std::vector<std::uint64_t> query_ids;
  std::vector<std::vector<Hit>> hits;
};

// Inner product of two stored vectors, accumulated in double over eight
// fixed interleaved lanes combined as ((s0+s1)+(s2+s3))+((s4+s5)+(s6+s7)).
// Both top_k and top_k_reference score through this one compiled kernel so
// their rankings are comparable bit for bit.
double embedding_similarity(std::span<const float> a, std::span<const float> b);

// Exact top-k by inner product. Parallelizes over query ranges (threads = 0
// picks the hardware count); per-query results are independent, so output
// is identical for every thread count. k larger than the index simply
// returns fewer hits. exclude_self drops index records whose id equals the
// query id.
RetrievalResult top_k(const VectorStore& index, const VectorStore& queries,
                      int k = 5, bool exclude_self = false, int threads = 0);

// Deliberately naive double loop + full sort. Reference for tests and for
// the bench command's sampled verification.
RetrievalResult top_k_reference(const VectorStore& index, const VectorStore& queries,
                                int k = 5, bool exclude_self = false);

// Mean of unit-length views, renormalized. Throws NumericError when the
// views cancel (mean norm < 1e-12).
std::vector<double> fuse_views(const std::vector<std::vector<double>>& views);

// Results CSV: header `query_id,rank,index_id,similarity`, rank 1-based,
// similarity printed at 9 significant digits.
void write_results_csv(const RetrievalResult& result, const std::filesystem::path& path);
RetrievalResult read_results_csv(const std::filesystem::path& path);

}  // namespace embkit
