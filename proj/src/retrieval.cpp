#include "embkit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>
#include <unordered_set>

#include "embkit/csv.hpp"
#include "embkit/errors.hpp"

namespace embkit {

namespace {

// Candidate ordering: higher similarity wins, equal similarity prefers the
// lower id. Exactly the rule the result lists are sorted by.
bool better(const Hit& a, const Hit& b) {
  return a.similarity > b.similarity ||
         (a.similarity == b.similarity && a.id < b.id);
}

// Bounded selection: a k-element heap whose front is the worst kept hit.
// With `better` as the strict-weak "less than", the std heap functions keep
// the maximum — i.e. the worst hit — at the front, ready for eviction.
struct WorstFirstHeap {
  explicit WorstFirstHeap(std::size_t k) : k(k) { hits.reserve(k + 1); }

  void offer(const Hit& h) {
    if (hits.size() < k) {
      hits.push_back(h);
      std::push_heap(hits.begin(), hits.end(), better);
    } else if (better(h, hits.front())) {
      std::pop_heap(hits.begin(), hits.end(), better);
      hits.back() = h;
      std::push_heap(hits.begin(), hits.end(), better);
    }
  }

  std::vector<Hit> sorted() && {
    std::sort(hits.begin(), hits.end(), better);
    return std::move(hits);
  }

  std::size_t k;
  std::vector<Hit> hits;
};

void check_pair(const VectorStore& index, const VectorStore& queries, int k) {
  if (index.dim != queries.dim)
    throw ArgumentError("top_k: dim mismatch (index " + std::to_string(index.dim) +
                        ", queries " + std::to_string(queries.dim) + ")");
  if (k < 1) throw ArgumentError("top_k: k must be >= 1");
}

constexpr std::size_t kIndexBlock = 1024;  // rows per scoring block

void scan_queries(const VectorStore& index, const VectorStore& queries,
                  std::size_t q_begin, std::size_t q_end, int k, bool exclude_self,
                  std::vector<std::vector<Hit>>& out) {
  const std::size_t keep = static_cast<std::size_t>(k);
  std::vector<WorstFirstHeap> heaps;
  heaps.reserve(q_end - q_begin);
  for (std::size_t q = q_begin; q < q_end; ++q) heaps.emplace_back(keep);

  // Stream the index once per query range, block by block, so index rows
  // stay cache-resident while every query in the range scores them.
  for (std::size_t ib = 0; ib < index.size(); ib += kIndexBlock) {
    const std::size_t ie = std::min(ib + kIndexBlock, index.size());
    for (std::size_t q = q_begin; q < q_end; ++q) {
      const auto qv = queries.vec(q);
      const std::uint64_t qid = queries.ids[q];
      WorstFirstHeap& heap = heaps[q - q_begin];
      for (std::size_t i = ib; i < ie; ++i) {
        if (exclude_self && index.ids[i] == qid) continue;
        heap.offer({index.ids[i], embedding_similarity(index.vec(i), qv)});
      }
    }
  }

  for (std::size_t q = q_begin; q < q_end; ++q)
    out[q] = std::move(heaps[q - q_begin]).sorted();
}

}  // namespace

double embedding_similarity(std::span<const float> a, std::span<const float> b) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
  std::size_t d = 0;
  const std::size_t n = a.size();
  for (; d + 8 <= n; d += 8) {
    s0 += static_cast<double>(a[d]) * static_cast<double>(b[d]);
    s1 += static_cast<double>(a[d + 1]) * static_cast<double>(b[d + 1]);
    s2 += static_cast<double>(a[d + 2]) * static_cast<double>(b[d + 2]);
    s3 += static_cast<double>(a[d + 3]) * static_cast<double>(b[d + 3]);
    s4 += static_cast<double>(a[d + 4]) * static_cast<double>(b[d + 4]);
    s5 += static_cast<double>(a[d + 5]) * static_cast<double>(b[d + 5]);
    s6 += static_cast<double>(a[d + 6]) * static_cast<double>(b[d + 6]);
    s7 += static_cast<double>(a[d + 7]) * static_cast<double>(b[d + 7]);
  }
  double tail = 0.0;
  for (; d < n; ++d) tail += static_cast<double>(a[d]) * static_cast<double>(b[d]);
  return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7)) + tail;
}

RetrievalResult top_k(const VectorStore& index, const VectorStore& queries, int k,
                      bool exclude_self, int threads) {
  check_pair(index, queries, k);
  if (threads < 0) throw ArgumentError("top_k: threads must be >= 0");
  std::size_t worker_count = threads == 0
                                 ? std::max(1u, std::thread::hardware_concurrency())
                                 : static_cast<std::size_t>(threads);
  worker_count = std::max<std::size_t>(1, std::min(worker_count, queries.size()));

  RetrievalResult result;
  result.query_ids = queries.ids;
  result.hits.resize(queries.size());

  if (queries.size() == 0) return result;
  if (worker_count == 1) {
    scan_queries(index, queries, 0, queries.size(), k, exclude_self, result.hits);
    return result;
  }

  // Contiguous query ranges; per-query output slots make the merge order
  // (and therefore the result) independent of the thread count.
  std::vector<std::thread> workers;
  workers.reserve(worker_count);
  const std::size_t chunk = (queries.size() + worker_count - 1) / worker_count;
  for (std::size_t w = 0; w < worker_count; ++w) {
    const std::size_t q_begin = w * chunk;
    const std::size_t q_end = std::min(q_begin + chunk, queries.size());
    if (q_begin >= q_end) break;
    workers.emplace_back([&, q_begin, q_end] {
      scan_queries(index, queries, q_begin, q_end, k, exclude_self, result.hits);
    });
  }
  for (auto& t : workers) t.join();
  return result;
}

RetrievalResult top_k_reference(const VectorStore& index, const VectorStore& queries,
                                int k, bool exclude_self) {
  check_pair(index, queries, k);
  RetrievalResult result;
  result.query_ids = queries.ids;
  result.hits.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<Hit> all;
    all.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (exclude_self && index.ids[i] == queries.ids[q]) continue;
      all.push_back({index.ids[i], embedding_similarity(index.vec(i), queries.vec(q))});
    }
    std::sort(all.begin(), all.end(), better);
    if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
    result.hits[q] = std::move(all);
  }
  return result;
}

std::vector<double> fuse_views(const std::vector<std::vector<double>>& views) {
  if (views.empty()) throw ArgumentError("fuse_views: need at least one view");
  const std::size_t dim = views[0].size();
  for (const auto& v : views)
    if (v.size() != dim) throw ArgumentError("fuse_views: view dimensions differ");

  std::vector<double> mean(dim, 0.0);
  for (const auto& v : views)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
  double norm2 = 0.0;
  for (auto& x : mean) {
    x /= static_cast<double>(views.size());
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  if (norm < 1e-12)
    throw NumericError("fuse_views: views cancel (mean norm < 1e-12)");
  for (auto& x : mean) x /= norm;
  return mean;
}

void write_results_csv(const RetrievalResult& result,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << "query_id,rank,index_id,similarity\n";
  char buf[32];
  for (std::size_t q = 0; q < result.query_ids.size(); ++q) {
    for (std::size_t r = 0; r < result.hits[q].size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.9g", result.hits[q][r].similarity);
      out << result.query_ids[q] << ',' << (r + 1) << ',' << result.hits[q][r].id
          << ',' << buf << '\n';
    }
  }
}

RetrievalResult read_results_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "query_id,rank,index_id,similarity")
    throw ParseError(path.string() + ": line 1: expected results header");
  RetrievalResult result;
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 4)
      throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
    const std::uint64_t qid = parse_u64_field(fields[0], "query_id", line_no);
    const std::uint64_t rank = parse_u64_field(fields[1], "rank", line_no);
    const std::uint64_t iid = parse_u64_field(fields[2], "index_id", line_no);
    double sim = 0.0;
    try {
      sim = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": bad similarity '" +
                       fields[3] + "'");
    }
    if (result.query_ids.empty() || result.query_ids.back() != qid) {
      if (!seen.insert(qid).second)
        throw ParseError("line " + std::to_string(line_no) +
                         ": query rows must be contiguous (query_id " +
                         std::to_string(qid) + " reappears)");
      result.query_ids.push_back(qid);
      result.hits.emplace_back();
    }
    if (rank != result.hits.back().size() + 1)
      throw ParseError("line " + std::to_string(line_no) + ": rank " +
                       std::to_string(rank) + " out of sequence");
    result.hits.back().push_back({iid, sim});
  }
  return result;
}

}  // namespace embkit
