#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "embkit/retrieval.hpp"

namespace embkit {

// relevant[q] = index ids sharing an instance with query q; n_q is the set
// size. Queries with n_q = 0 are skipped (and tallied) by mp_at_5 rather
// than scored.
struct GroundTruth {
  std::unordered_map<std::uint64_t, std::unordered_set<std::uint64_t>> relevant;
};

// The metric as printed sums rel(j) over j = 1..min(n_q, 5) only: a query
// with n_q < 5 is judged on its first n_q ranks and later hits are ignored.
// kClippedDenominator is the alternative reading (count hits over the first
// 5 ranks, divide by min(n_q, 5)), kept for comparison.
enum class Mp5Convention { kTruncatedRanks, kClippedDenominator };

// Precision@5 for one query. `relevant` must be non-empty; a prediction
// list shorter than min(n_q, 5) counts the missing slots as incorrect.
// Duplicate prediction ids are a ValidationError.
double p_at_5_single(std::span<const std::uint64_t> predictions,
                     const std::unordered_set<std::uint64_t>& relevant,
                     Mp5Convention convention = Mp5Convention::kTruncatedRanks);

struct QueryScore {
  std::uint64_t query_id = 0;
  int n_q = 0;
  double p_at_5 = 0.0;
};

struct MetricReport {
  std::vector<QueryScore> per_query;  // counted queries, ascending query_id
  int counted = 0;
  int skipped = 0;  // queries with n_q = 0
  double mp_at_5 = 0.0;
};

// Mean of p_at_5_single over all counted queries, summed in ascending
// query-id order at double precision. Every query must appear in `truth`.
MetricReport mp_at_5(const RetrievalResult& results, const GroundTruth& truth,
                     Mp5Convention convention = Mp5Convention::kTruncatedRanks);

// Same-label relevance: relevant(q) = { i in index : label(i) == label(q) },
// minus q itself when q also appears in the index.
GroundTruth truth_from_labels(
    const std::vector<std::pair<std::uint64_t, std::string>>& query_labels,
    const std::vector<std::pair<std::uint64_t, std::string>>& index_labels);

// Report CSV: `query_id,n_q,p_at_5` rows for counted queries, then the CLI
// prints the one-line summary `Q,skipped,mp_at_5` at 6 decimals.
void write_metric_report(const MetricReport& report, const std::filesystem::path& path);

std::string metric_summary_line(const MetricReport& report);

}  // namespace embkit
