// Acceptance harness: nine release criteria, one PASS/FAIL line each.
// Exit status is the number of failed criteria (0 = release-ready).
//
//   1  gradient fidelity      analytic vs central finite differences
//   2  metric oracle          mp_at_5 bitwise vs a naive evaluator
//   3  retrieval oracle       top_k vs the double-loop reference, threaded
//   4  margin schedule        hand staircase table
//   5  stratified updates     backbone/head step ratio == c
//   6  sampler invariants     1000 random manifests through plan + folds
//   7  end-to-end experiment  full CLI chain against the pinned baseline
//   8  performance target     bench 200k x 5k x 64 under 60 s, verified
//   9  format round trips     EMB1 + EKC1 byte-exact over random instances

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "embkit/checkpoint.hpp"
#include "embkit/dataset.hpp"
#include "embkit/encoder.hpp"
#include "embkit/margin.hpp"
#include "embkit/metrics.hpp"
#include "embkit/optim.hpp"
#include "embkit/retrieval.hpp"
#include "embkit/rng.hpp"
#include "embkit/vecstore.hpp"

namespace {

using namespace embkit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-3);
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(EMBKIT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {};
  RunResult r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

bool parse_field(const std::string& text, const std::string& key, double& out) {
  const auto pos = text.rfind(key);
  if (pos == std::string::npos) return false;
  try {
    out = std::stod(text.substr(pos + key.size()));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

std::vector<double> random_unit(SplitMix64& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 < 1e-8);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- criterion 1: gradient fidelity ----------------------------------------

Outcome criterion_gradients() {
  const auto t0 = Clock::now();
  const double h = 1e-6;
  double worst = 0.0;

  // (a) arcface: d_embedding and d_weights against central differences of
  // the loss as a function of the raw inputs. Instances are redrawn when
  // they land within 1e-3 of the fallback kink or of |cos(theta)| = 1,
  // where the one-sided derivative convention makes FD meaningless.
  SplitMix64 rng(0xACCE5501);
  int arc_done = 0;
  while (arc_done < 100) {
    const int classes = 2 + static_cast<int>(rng.bounded(15));  // 2..16
    const int dim = 2 + static_cast<int>(rng.bounded(7));       // 2..8
    ArcFaceParams params =
        init_arcface(classes, dim, 5.0 + 25.0 * rng.uniform(), rng.next_u64());
    std::vector<double> raw(static_cast<std::size_t>(dim));
    for (auto& x : raw) x = rng.normal();
    const int target = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(classes)));
    const double margin = 0.05 + 0.45 * rng.uniform();

    double raw_norm2 = 0.0;
    for (double x : raw) raw_norm2 += x * x;
    if (raw_norm2 < 1e-2) continue;
    std::vector<double> unit = raw;
    for (auto& x : unit) x /= std::sqrt(raw_norm2);
    const auto wrow = params.row(target);
    double wnorm2 = 0.0, dot = 0.0;
    for (int d = 0; d < dim; ++d) {
      wnorm2 += wrow[d] * wrow[d];
      dot += wrow[d] * unit[d];
    }
    const double cos_t = dot / std::sqrt(wnorm2);
    if (1.0 - std::abs(cos_t) < 1e-3) continue;
    if (std::abs(cos_t - std::cos(std::numbers::pi - margin)) < 1e-3) continue;

    const ArcFaceGrad grad = arcface_grad(params, raw, target, margin);
    if (rel_err(grad.loss, arcface_loss(params, unit, target, margin)) > 1e-9)
      return {false, "loss disagrees with arcface_loss on a unit input"};

    for (int d = 0; d < dim; ++d) {
      auto up = raw, dn = raw;
      up[static_cast<std::size_t>(d)] += h;
      dn[static_cast<std::size_t>(d)] -= h;
      const double fd = (arcface_grad(params, up, target, margin).loss -
                         arcface_grad(params, dn, target, margin).loss) /
                        (2 * h);
      worst = std::max(worst, rel_err(grad.d_embedding[static_cast<std::size_t>(d)], fd));
    }
    for (std::size_t w = 0; w < params.weights.size(); ++w) {
      ArcFaceParams up = params, dn = params;
      up.weights[w] += h;
      dn.weights[w] -= h;
      const double fd = (arcface_grad(up, raw, target, margin).loss -
                         arcface_grad(dn, raw, target, margin).loss) /
                        (2 * h);
      worst = std::max(worst, rel_err(grad.d_weights[w], fd));
    }
    ++arc_done;
  }

  // (b) encoder backward: probe loss L = c . forward(x), linear in the unit
  // output, differentiated against every parameter of random encoders.
  int enc_done = 0;
  while (enc_done < 100) {
    EncoderConfig cfg;
    cfg.dim_in = 2 + static_cast<int>(rng.bounded(15));  // 2..16
    cfg.backbone_widths = {2 + static_cast<int>(rng.bounded(15))};
    if (rng.bounded(2)) cfg.backbone_widths.push_back(2 + static_cast<int>(rng.bounded(15)));
    cfg.with_projection = rng.bounded(2) != 0;
    cfg.projection_width = cfg.with_projection ? 2 + static_cast<int>(rng.bounded(7)) : 0;
    cfg.embed_dim = 2 + static_cast<int>(rng.bounded(7));  // 2..8
    cfg.dropout_rate = 0.25;
    cfg.seed = rng.next_u64();
    EncoderState state = init_encoder(cfg);

    const RunMode mode = enc_done % 2 == 0 ? RunMode::kEval : RunMode::kTrain;
    const std::uint64_t mask_seed = rng.next_u64();
    std::vector<double> x(static_cast<std::size_t>(cfg.dim_in));
    for (auto& v : x) v = rng.normal();
    std::vector<double> c(static_cast<std::size_t>(cfg.embed_dim));
    for (auto& v : c) v = rng.normal();

    auto probe = [&]() {
      const auto y = encoder_forward(state, x, mode, mask_seed, nullptr);
      double loss = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) loss += c[i] * y[i];
      return loss;
    };

    ForwardCache cache;
    try {
      encoder_forward(state, x, mode, mask_seed, &cache);
    } catch (const NumericError&) {
      continue;  // dropout zeroed the whole embedding; redraw
    }
    const EncoderGrads grads = encoder_backward(state, cache, c);

    auto check_block = [&](Affine& p, const Affine& g) {
      for (std::size_t i = 0; i < p.w.size(); ++i) {
        const double saved = p.w[i];
        p.w[i] = saved + h;
        const double up = probe();
        p.w[i] = saved - h;
        const double dn = probe();
        p.w[i] = saved;
        worst = std::max(worst, rel_err(g.w[i], (up - dn) / (2 * h)));
      }
      for (std::size_t i = 0; i < p.b.size(); ++i) {
        const double saved = p.b[i];
        p.b[i] = saved + h;
        const double up = probe();
        p.b[i] = saved - h;
        const double dn = probe();
        p.b[i] = saved;
        worst = std::max(worst, rel_err(g.b[i], (up - dn) / (2 * h)));
      }
    };
    for (std::size_t l = 0; l < state.backbone.size(); ++l)
      check_block(state.backbone[l], grads.backbone[l]);
    if (state.projection) check_block(*state.projection, *grads.projection);
    check_block(state.neck, grads.neck);
    ++enc_done;
  }

  const double secs = seconds_since(t0);
  const bool pass = worst < 1e-5 && secs < 10.0;
  return {pass, fmt("max_rel_err=%.3g instances=%d+%d seconds=%.2f (bounds 1e-5, 10s)",
                    worst, arc_done, enc_done, secs)};
}

// ---- criterion 2: metric oracle ---------------------------------------------

// Second implementation of the metric, linear scans only.
double naive_p5(const std::vector<std::uint64_t>& preds,
                const std::vector<std::uint64_t>& rel) {
  const std::size_t nq = rel.size();
  const std::size_t upto =
      std::min(preds.size(), std::min<std::size_t>(nq, 5));
  double hits = 0;
  for (std::size_t j = 0; j < upto; ++j)
    for (const auto r : rel)
      if (preds[j] == r) {
        hits += 1;
        break;
      }
  return hits / static_cast<double>(std::min<std::size_t>(nq, 5));
}

Outcome criterion_metric() {
  const auto t0 = Clock::now();
  SplitMix64 rng(0xACCE5502);
  int mismatches = 0, skipped_checked = 0;
  RetrievalResult all_results;
  GroundTruth all_truth;
  double naive_sum = 0.0;
  int naive_counted = 0, naive_skipped = 0;

  for (int i = 0; i < 1000; ++i) {
    const std::size_t nq = static_cast<std::size_t>(i % 11);  // covers 0..10
    const std::uint64_t qid = static_cast<std::uint64_t>(i);
    std::vector<std::uint64_t> rel;
    for (std::size_t r = 0; r < nq; ++r) rel.push_back(qid * 64 + r);
    std::vector<std::uint64_t> pool = rel;
    for (std::uint64_t d = 0; d < 7; ++d) pool.push_back(qid * 64 + 32 + d);
    rng.shuffle(pool);
    std::vector<std::uint64_t> preds(
        pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(rng.bounded(6)));

    all_results.query_ids.push_back(qid);
    std::vector<Hit> hits;
    for (std::size_t r = 0; r < preds.size(); ++r)
      hits.push_back({preds[r], 1.0 - 0.01 * static_cast<double>(r)});
    all_results.hits.push_back(std::move(hits));
    all_truth.relevant[qid] =
        std::unordered_set<std::uint64_t>(rel.begin(), rel.end());

    if (nq == 0) {
      ++naive_skipped;
      ++skipped_checked;
      continue;
    }
    const double got = p_at_5_single(preds, all_truth.relevant[qid]);
    const double want = naive_p5(preds, rel);
    if (got != want) ++mismatches;
    naive_sum += want;  // qids ascend, matching the aggregate's sum order
    ++naive_counted;
  }

  const MetricReport report = mp_at_5(all_results, all_truth);
  const double naive_mean =
      naive_counted == 0 ? 0.0 : naive_sum / static_cast<double>(naive_counted);
  const bool aggregate_ok = report.mp_at_5 == naive_mean &&
                            report.counted == naive_counted &&
                            report.skipped == naive_skipped;
  const double secs = seconds_since(t0);
  const bool pass = mismatches == 0 && aggregate_ok && secs < 5.0;
  return {pass,
          fmt("instances=1000 mismatches=%d zero_nq=%d aggregate=%s mp=%.9g "
              "seconds=%.2f (bounds bitwise, 5s)",
              mismatches, skipped_checked, aggregate_ok ? "bitwise" : "DIFFERS",
              report.mp_at_5, secs)};
}

// ---- criterion 3: retrieval oracle -------------------------------------------

VectorStore seeded_store(std::size_t n, std::uint32_t dim, std::uint64_t seed,
                         std::uint64_t id_base) {
  SplitMix64 rng(seed);
  VectorStore store;
  store.dim = dim;
  store.ids.reserve(n);
  store.data.reserve(n * dim);
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    store.ids.push_back(id_base + i);
    for (double x : v) store.data.push_back(static_cast<float>(x * inv));
  }
  return store;
}

Outcome criterion_retrieval() {
  const auto t0 = Clock::now();
  const VectorStore index = seeded_store(10000, 64, 0xACCE5503, 0);
  const VectorStore queries = seeded_store(1000, 64, 0xACCE5504, 1 << 20);
  const RetrievalResult want = top_k_reference(index, queries, 5, false);
  std::string mismatch;
  for (const int threads : {1, 4, 8}) {
    const RetrievalResult got = top_k(index, queries, 5, false, threads);
    if (got.query_ids != want.query_ids || got.hits != want.hits) {
      mismatch = fmt("threads=%d differs from reference", threads);
      break;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = mismatch.empty() && secs < 30.0;
  return {pass, fmt("index=10000 queries=1000 dim=64 threads={1,4,8} %s "
                    "seconds=%.2f (bound 30s)",
                    mismatch.empty() ? "identical" : mismatch.c_str(), secs)};
}

// ---- criterion 4: margin schedule --------------------------------------------

Outcome criterion_margin() {
  const MarginSchedule sched{0.1, 0.1, 0.5};
  const double table[10] = {0.1, 0.2, 0.3, 0.4, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  for (int e = 1; e <= 10; ++e) {
    const double got = margin_at_epoch(sched, e);
    const double formula = std::min(0.1 + 0.1 * (e - 1), 0.5);
    if (got != formula)
      return {false, fmt("epoch %d: %.17g != formula %.17g", e, got, formula)};
    if (std::abs(got - table[e - 1]) > 1e-12)
      return {false, fmt("epoch %d: %.17g vs table %.3g", e, got, table[e - 1])};
  }
  return {true, "epochs 1..10 match (0.1,0.2,0.3,0.4,0.5,0.5,...) exactly"};
}

// ---- criterion 5: stratified updates ------------------------------------------

Outcome criterion_stratified() {
  StratifiedLrConfig cfg;
  cfg.lr = 1e-4;
  cfg.c = 1e-3;
  cfg.weight_decay = 0.0;
  SplitMix64 rng(0xACCE5505);
  // Decay is off, so the update does not depend on theta; stepping from zero
  // parameters observes each group's update exactly.
  std::vector<double> head(256, 0.0), backbone(256, 0.0), grads(256);
  for (auto& g : grads) g = rng.normal();
  Moments mh, mb;
  adamw_step(head, grads, mh, 1, cfg.lr, cfg, true, "head");
  adamw_step(backbone, grads, mb, 1, backbone_lr(cfg), cfg, true, "backbone");
  double worst = 0.0;
  for (std::size_t i = 0; i < head.size(); ++i) {
    if (head[i] == 0.0) return {false, fmt("element %zu saw no head update", i)};
    worst = std::max(worst, std::abs(backbone[i] / head[i] - cfg.c) / cfg.c);
  }
  return {worst <= 1e-12,
          fmt("elements=256 max_rel_ratio_err=%.3g (bound 1e-12)", worst)};
}

// ---- criterion 6: sampler invariants -------------------------------------------

Outcome criterion_sampler() {
  const auto t0 = Clock::now();
  int violations = 0;
  std::string first;
  auto violate = [&](const std::string& what) {
    ++violations;
    if (first.empty()) first = what;
  };

  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    SplitMix64 rng(0xACCE5506 + trial);
    const int class_count = 1 + static_cast<int>(rng.bounded(24));
    std::vector<ManifestRecord> records;
    std::map<std::string, std::unordered_set<std::uint64_t>> sizes;
    std::uint64_t next_id = 1;
    for (int cls = 0; cls < class_count; ++cls) {
      const std::string label = "c" + std::to_string(cls);
      // Class 0 always survives min_keep so the plan is never empty.
      const int n = cls == 0 ? 3 + static_cast<int>(rng.bounded(148))
                             : 1 + static_cast<int>(rng.bounded(150));
      for (int s = 0; s < n; ++s) {
        records.push_back({next_id, label, "ref"});
        sizes[label].insert(next_id);
        ++next_id;
      }
    }
    rng.shuffle(records);

    const DatasetPlan plan = plan_classes(records, 100, 3, 20, trial);
    std::vector<std::string> survivors;
    for (const auto& [label, ids] : sizes)
      if (ids.size() >= 3) survivors.push_back(label);  // map is label-sorted
    if (plan.class_count != static_cast<int>(survivors.size())) {
      violate(fmt("trial %llu: class_count %d, expected %zu",
                  static_cast<unsigned long long>(trial), plan.class_count,
                  survivors.size()));
      continue;
    }

    std::unordered_map<int, std::size_t> total_mult;
    std::unordered_map<int, std::unordered_set<std::uint64_t>> distinct;
    for (const PlanEntry& e : plan.entries) {
      total_mult[e.class_index] += static_cast<std::size_t>(e.multiplicity);
      distinct[e.class_index].insert(e.sample_id);
      if (!sizes[survivors[static_cast<std::size_t>(e.class_index)]].count(e.sample_id))
        violate(fmt("trial %llu: sample %llu not from its class",
                    static_cast<unsigned long long>(trial),
                    static_cast<unsigned long long>(e.sample_id)));
    }
    for (int cls = 0; cls < plan.class_count; ++cls) {
      const std::size_t n =
          sizes[survivors[static_cast<std::size_t>(cls)]].size();
      const std::size_t want_distinct = std::min<std::size_t>(n, 100);
      const std::size_t want_mult = std::clamp<std::size_t>(n, 20, 100);
      if (distinct[cls].size() != want_distinct || total_mult[cls] != want_mult)
        violate(fmt("trial %llu class %d (n=%zu): %zu distinct / %zu total, "
                    "want %zu / %zu",
                    static_cast<unsigned long long>(trial), cls, n,
                    distinct[cls].size(), total_mult[cls], want_distinct,
                    want_mult));
      if (total_mult[cls] < 20 || total_mult[cls] > 100)
        violate(fmt("trial %llu class %d: multiplicity %zu outside [20,100]",
                    static_cast<unsigned long long>(trial), cls,
                    total_mult[cls]));
    }

    const int val_fold = static_cast<int>(trial % 20);
    const DatasetPlan folded = assign_folds(plan, 20, val_fold, trial);
    std::unordered_map<int, std::size_t> val_ids;
    for (const PlanEntry& e : folded.entries) {
      if (e.split != Split::kValidation) continue;
      ++val_ids[e.class_index];
      if (e.multiplicity != 1)
        violate(fmt("trial %llu: validation entry with multiplicity %d",
                    static_cast<unsigned long long>(trial), e.multiplicity));
    }
    for (int cls = 0; cls < plan.class_count; ++cls) {
      const std::size_t n = distinct[cls].size();
      const std::size_t lo = n / 20, hi = (n + 19) / 20;
      const std::size_t v = val_ids.count(cls) ? val_ids[cls] : 0;
      if (v < lo || v > hi)
        violate(fmt("trial %llu class %d: %zu val ids for n=%zu (want [%zu,%zu])",
                    static_cast<unsigned long long>(trial), cls, v, n, lo, hi));
    }
  }

  const double secs = seconds_since(t0);
  if (violations > 0)
    return {false, fmt("violations=%d first: %s", violations, first.c_str())};
  return {true, fmt("manifests=1000 violations=0 seconds=%.2f", secs)};
}

// ---- criterion 7: end-to-end experiment -----------------------------------------

Outcome criterion_end_to_end() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "embkit_acceptance_e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return (dir / name).string(); };

  auto step = [&](const std::string& args) -> RunResult {
    RunResult r = run_cli(args);
    return r;
  };

  RunResult r = step("synth --classes 200 --dim-in 32 --per-class-min 30 "
                     "--per-class-max 60 --std 0.15 --seed 42 --out " + p("data"));
  if (r.code != 0) return {false, "synth failed: " + r.output};
  r = step("plan --manifest " + p("data.manifest.csv") +
           " --cap 100 --min-keep 3 --floor 20 --k 20 --val-fold 0 --seed 42 "
           "--out " + p("plan.csv"));
  if (r.code != 0) return {false, "plan failed: " + r.output};

  const std::string train_common =
      std::string(" --features ") + p("data.ftr") + " --plan " + p("plan.csv") +
      " --hidden 64 --hidden 64 --embed-dim 64 --batch 64 --lr 0.01 "
      "--eta-min 0.001 --dropout 0.2 --c 1e-3 --seed 42";
  r = step("train" + train_common +
           " --phases 2u,1f --margin-init 0.1 --margin-stride 0.1 --margin-max 0.5"
           " --out-ckpt " + p("model.ekc") + " --out-report " + p("report.csv"));
  if (r.code != 0) return {false, "train failed: " + r.output};
  double dynamic_e1 = 0.0;
  if (!parse_field(r.output.substr(0, r.output.find('\n')), "loss=", dynamic_e1))
    return {false, "could not parse epoch-1 loss from train output"};

  r = step("embed --ckpt " + p("model.ekc") + " --manifest " + p("data.manifest.csv") +
           " --features " + p("data.ftr") + " --plan " + p("plan.csv") +
           " --split val --out " + p("val.emb") + " --out-labels " + p("val.csv"));
  if (r.code != 0) return {false, "embed val failed: " + r.output};
  r = step("embed --ckpt " + p("model.ekc") + " --manifest " + p("data.manifest.csv") +
           " --features " + p("data.ftr") + " --plan " + p("plan.csv") +
           " --split train --out " + p("train.emb") + " --out-labels " + p("train.csv"));
  if (r.code != 0) return {false, "embed train failed: " + r.output};
  r = step("query --index " + p("train.emb") + " --queries " + p("val.emb") +
           " --k 5 --threads 1 --out " + p("results.csv"));
  if (r.code != 0) return {false, "query failed: " + r.output};
  r = step("evaluate --results " + p("results.csv") + " --query-labels " + p("val.csv") +
           " --index-labels " + p("train.csv"));
  if (r.code != 0) return {false, "evaluate failed: " + r.output};
  double mp = 0.0;
  if (!parse_field(r.output, "mp_at_5=", mp))
    return {false, "could not parse mp_at_5 from: " + r.output};

  // Ablation, reported not gated: margin pinned at m_max for every epoch
  // should start with a higher epoch-1 loss than the ramped schedule.
  r = step("train" + train_common + " --phases 1u --no-dynamic-margin --margin-max 0.5");
  double fixed_e1 = 0.0;
  const bool ablation_parsed =
      r.code == 0 &&
      parse_field(r.output.substr(0, r.output.find('\n')), "loss=", fixed_e1);

  const double secs = seconds_since(t0);
  fs::remove_all(dir);
  const double pinned = 0.949907;  // first verified run of this exact chain
  const bool pass =
      mp >= 0.90 && std::abs(mp - pinned) <= 0.02 && secs < 300.0;
  return {pass,
          fmt("mp_at_5=%.6f (pinned %.6f +-0.02, floor 0.90) "
              "epoch1_loss dynamic=%.4f fixed_margin=%s%.4f seconds=%.1f (bound 300s)",
              mp, pinned, dynamic_e1, ablation_parsed ? "" : "unparsed:", fixed_e1,
              secs)};
}

// ---- criterion 8: performance target --------------------------------------------

Outcome criterion_bench() {
  const RunResult r = run_cli(
      "bench --index-size 200000 --queries 5000 --dim 64 --k 5 --threads 8 "
      "--verify-sample 100 --seed 0");
  if (r.code != 0) return {false, "bench failed: " + r.output};
  double secs = 0.0;
  if (!parse_field(r.output, "seconds=", secs))
    return {false, "could not parse seconds from: " + r.output};
  const bool verified = r.output.find("verify=ok") != std::string::npos;
  const bool pass = secs < 60.0 && verified;
  return {pass, fmt("200000x5000 dim=64 k=5 seconds=%.3f verify=%s (bound 60s)", secs,
                    verified ? "ok" : "MISSING")};
}

// ---- criterion 9: format round trips ----------------------------------------------

Outcome criterion_formats() {
  const fs::path dir = fs::temp_directory_path() / "embkit_acceptance_fmt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path a = dir / "a.bin", b = dir / "b.bin";
  SplitMix64 rng(0xACCE5509);

  for (int i = 0; i < 100; ++i) {
    const std::uint32_t dim = 1 + static_cast<std::uint32_t>(rng.bounded(64));
    const std::size_t rows = rng.bounded(61);  // includes empty stores
    VectorStore store;
    store.dim = dim;
    std::vector<float> v(dim);
    for (std::size_t row = 0; row < rows; ++row) {
      const auto unit = random_unit(rng, static_cast<int>(dim));
      for (std::uint32_t d = 0; d < dim; ++d) v[d] = static_cast<float>(unit[d]);
      store.push(1000 + row, v);
    }
    write_store(store, a);
    write_store(read_store(a), b);
    if (slurp(a) != slurp(b)) {
      fs::remove_all(dir);
      return {false, fmt("EMB1 instance %d not byte-exact", i)};
    }
  }

  for (int i = 0; i < 100; ++i) {
    EncoderConfig cfg;
    cfg.dim_in = 1 + static_cast<int>(rng.bounded(16));
    cfg.backbone_widths = {1 + static_cast<int>(rng.bounded(16))};
    if (rng.bounded(2)) cfg.backbone_widths.push_back(1 + static_cast<int>(rng.bounded(16)));
    cfg.with_projection = rng.bounded(2) != 0;
    cfg.projection_width = cfg.with_projection ? 1 + static_cast<int>(rng.bounded(12)) : 0;
    cfg.embed_dim = 1 + static_cast<int>(rng.bounded(64));
    cfg.dropout_rate = rng.uniform() * 0.9;
    cfg.seed = rng.next_u64();
    Checkpoint ckpt;
    ckpt.encoder = init_encoder(cfg);
    ckpt.encoder.frozen_backbone = rng.bounded(2) != 0;
    ckpt.encoder.revision = rng.next_u64();
    for (Affine& layer : ckpt.encoder.backbone)
      for (auto& w : layer.w) w = rng.normal();
    if (rng.bounded(2)) {
      ArcFaceParams head;
      head.class_count = 1 + static_cast<int>(rng.bounded(12));
      head.embed_dim = cfg.embed_dim;
      head.scale = 1.0 + rng.uniform() * 63.0;
      head.weights.resize(static_cast<std::size_t>(head.class_count) * cfg.embed_dim);
      for (auto& w : head.weights) w = rng.normal();
      ckpt.head = std::move(head);
    }
    if (rng.bounded(2)) {
      AdamWMoments mom;
      mom.t = static_cast<std::int64_t>(rng.bounded(1000));
      mom.blocks.resize(rng.bounded(8));
      for (Moments& m : mom.blocks) {
        const std::size_t n = rng.bounded(40);
        m.m.resize(n);
        m.v.resize(n);
        for (auto& x : m.m) x = rng.normal();
        for (auto& x : m.v) x = rng.uniform();
      }
      ckpt.moments = std::move(mom);
    }
    write_checkpoint(ckpt, a);
    write_checkpoint(read_checkpoint(a), b);
    if (slurp(a) != slurp(b)) {
      fs::remove_all(dir);
      return {false, fmt("EKC1 instance %d not byte-exact", i)};
    }
  }

  fs::remove_all(dir);
  return {true, "EMB1 x100 and EKC1 x100 byte-exact"};
}

}  // namespace

int main() {
  struct Entry {
    int number;
    const char* name;
    Outcome (*run)();
  };
  const Entry criteria[] = {
      {1, "gradient-fidelity", criterion_gradients},
      {2, "metric-oracle", criterion_metric},
      {3, "retrieval-oracle", criterion_retrieval},
      {4, "margin-schedule", criterion_margin},
      {5, "stratified-updates", criterion_stratified},
      {6, "sampler-invariants", criterion_sampler},
      {7, "end-to-end", criterion_end_to_end},
      {8, "performance", criterion_bench},
      {9, "format-round-trips", criterion_formats},
  };
  int failures = 0;
  for (const Entry& entry : criteria) {
    Outcome outcome;
    try {
      outcome = entry.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion-%d %s: %s\n", outcome.pass ? "PASS" : "FAIL",
                entry.number, entry.name, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
