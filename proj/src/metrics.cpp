#include "embkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "embkit/csv.hpp"
#include "embkit/errors.hpp"

namespace embkit {

double p_at_5_single(std::span<const std::uint64_t> predictions,
                     const std::unordered_set<std::uint64_t>& relevant,
                     Mp5Convention convention) {
  if (predictions.size() > 5)
    throw ArgumentError("p_at_5_single: more than 5 predictions");
  {
    std::unordered_set<std::uint64_t> dedup(predictions.begin(), predictions.end());
    if (dedup.size() != predictions.size())
      throw ValidationError("p_at_5_single: duplicate prediction id");
  }
  const std::size_t n_q = relevant.size();
  if (n_q == 0) throw ArgumentError("p_at_5_single: query has no relevant ids");

  // Ranks examined: the literal convention stops at min(n_q, 5); the clipped
  // one examines all five ranks and only clips the denominator.
  const std::size_t denom = std::min<std::size_t>(n_q, 5);
  const std::size_t examined = convention == Mp5Convention::kTruncatedRanks
                                   ? std::min(predictions.size(), denom)
                                   : std::min<std::size_t>(predictions.size(), 5);
  std::size_t rel = 0;
  for (std::size_t j = 0; j < examined; ++j)
    if (relevant.count(predictions[j])) ++rel;
  return static_cast<double>(rel) / static_cast<double>(denom);
}

MetricReport mp_at_5(const RetrievalResult& results, const GroundTruth& truth,
                     Mp5Convention convention) {
  MetricReport report;
  report.per_query.reserve(results.query_ids.size());

  // Evaluate in ascending query id so the aggregate sum is order-independent
  // of how the result rows were produced.
  std::vector<std::size_t> order(results.query_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return results.query_ids[a] < results.query_ids[b];
  });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (results.query_ids[order[i]] == results.query_ids[order[i - 1]])
      throw ValidationError("mp_at_5: duplicate query id " +
                            std::to_string(results.query_ids[order[i]]));

  double sum = 0.0;
  for (std::size_t idx : order) {
    const std::uint64_t qid = results.query_ids[idx];
    const auto it = truth.relevant.find(qid);
    if (it == truth.relevant.end())
      throw ValidationError("mp_at_5: query " + std::to_string(qid) +
                            " missing from ground truth");
    if (it->second.empty()) {
      ++report.skipped;
      continue;
    }
    std::vector<std::uint64_t> preds;
    preds.reserve(results.hits[idx].size());
    for (const Hit& h : results.hits[idx]) preds.push_back(h.id);
    const double p = p_at_5_single(preds, it->second, convention);
    report.per_query.push_back({qid, static_cast<int>(it->second.size()), p});
    sum += p;
    ++report.counted;
  }
  report.mp_at_5 = report.counted == 0 ? 0.0 : sum / static_cast<double>(report.counted);
  return report;
}

GroundTruth truth_from_labels(
    const std::vector<std::pair<std::uint64_t, std::string>>& query_labels,
    const std::vector<std::pair<std::uint64_t, std::string>>& index_labels) {
  std::unordered_map<std::string, std::vector<std::uint64_t>> by_label;
  {
    std::unordered_set<std::uint64_t> seen;
    for (const auto& [id, label] : index_labels) {
      if (!seen.insert(id).second)
        throw ValidationError("truth_from_labels: duplicate index id " +
                              std::to_string(id));
      by_label[label].push_back(id);
    }
  }
  GroundTruth truth;
  std::unordered_set<std::uint64_t> seen_q;
  for (const auto& [id, label] : query_labels) {
    if (!seen_q.insert(id).second)
      throw ValidationError("truth_from_labels: duplicate query id " +
                            std::to_string(id));
    auto& rel = truth.relevant[id];  // present even when empty -> skip, not error
    const auto it = by_label.find(label);
    if (it == by_label.end()) continue;
    for (std::uint64_t iid : it->second)
      if (iid != id) rel.insert(iid);
  }
  return truth;
}

void write_metric_report(const MetricReport& report,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << "query_id,n_q,p_at_5\n";
  char buf[32];
  for (const QueryScore& qs : report.per_query) {
    std::snprintf(buf, sizeof buf, "%.9g", qs.p_at_5);
    out << qs.query_id << ',' << qs.n_q << ',' << buf << '\n';
  }
}

std::string metric_summary_line(const MetricReport& report) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "queries=%d skipped=%d mp_at_5=%.6f",
                report.counted, report.skipped, report.mp_at_5);
  return buf;
}

}  // namespace embkit
