// embkit: batch CLI over the embedding pipeline.
//
//   synth            deterministic Gaussian-cluster dataset
//   plan             class-balanced plan with stratified K-fold split
//   train            ArcFace fine-tuning with dynamic margin + stratified LR
//   embed            eval-mode embeddings (optionally fused over jitter views)
//   query            exact top-k retrieval between stores
//   evaluate         mP@5 report from results + label files
//   margin-schedule  per-epoch margin table as CSV or SVG
//   bench            timed retrieval at benchmark scale with sampled oracle
//
// Every command exits 0 on success and nonzero with a one-line diagnostic on
// any contract violation. All randomness flows from explicit --seed flags.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "embkit/checkpoint.hpp"
#include "embkit/csv.hpp"
#include "embkit/dataset.hpp"
#include "embkit/encoder.hpp"
#include "embkit/errors.hpp"
#include "embkit/margin.hpp"
#include "embkit/metrics.hpp"
#include "embkit/optim.hpp"
#include "embkit/retrieval.hpp"
#include "embkit/rng.hpp"
#include "embkit/trainer.hpp"
#include "embkit/vecstore.hpp"

namespace {

using namespace embkit;

double elapsed(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- label files: `sample_id,class_label` ---------------------------------

void write_labels(const std::vector<std::pair<std::uint64_t, std::string>>& labels,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << "sample_id,class_label\n";
  for (const auto& [id, label] : labels) out << id << ',' << label << '\n';
}

std::vector<std::pair<std::uint64_t, std::string>> read_labels(
    const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "sample_id,class_label")
    throw ParseError(path.string() + ": line 1: expected `sample_id,class_label`");
  std::vector<std::pair<std::uint64_t, std::string>> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 2)
      throw ParseError(path.string() + ": line " + std::to_string(i + 1) +
                       ": expected 2 fields");
    if (!is_safe_label(fields[1]))
      throw ParseError(path.string() + ": line " + std::to_string(i + 1) +
                       ": bad class label '" + fields[1] + "'");
    labels.emplace_back(parse_u64_field(fields[0], "sample_id", i + 1), fields[1]);
  }
  return labels;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  if (a.spec.cluster_std == 0.0)
    std::cerr << "embkit: warning: --std 0 makes every vector of a class identical\n";
  const SyntheticData data = synthesize(a.spec);
  const std::string manifest_path = a.out + ".manifest.csv";
  const std::string features_path = a.out + ".ftr";
  write_manifest(data.manifest, manifest_path);
  write_features(data.features, features_path);
  std::cout << "classes=" << a.spec.class_count << " samples=" << data.manifest.size()
            << " dim_in=" << a.spec.dim_in << " manifest=" << manifest_path
            << " features=" << features_path << "\n";
  return 0;
}

// ---- plan ------------------------------------------------------------------

struct PlanArgs {
  std::string manifest;
  int cap = 100;
  int min_keep = 3;
  int floor = 20;
  int k_folds = 20;
  int val_fold = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_plan(const PlanArgs& a) {
  if (a.cap < a.floor)
    throw ConfigError("plan: --cap (" + std::to_string(a.cap) +
                      ") must be >= --floor (" + std::to_string(a.floor) + ")");
  const auto records = load_manifest(a.manifest);
  DatasetPlan plan = plan_classes(records, a.cap, a.min_keep, a.floor, a.seed);
  plan = assign_folds(std::move(plan), a.k_folds, a.val_fold, a.seed);
  write_plan(plan, a.out);
  std::size_t train_rows = 0, val_rows = 0, train_mult = 0;
  for (const PlanEntry& e : plan.entries) {
    if (e.split == Split::kTrain) {
      ++train_rows;
      train_mult += static_cast<std::size_t>(e.multiplicity);
    } else {
      ++val_rows;
    }
  }
  std::cout << "classes=" << plan.class_count << " entries=" << plan.entries.size()
            << " train_ids=" << train_rows << " train_samples=" << train_mult
            << " val_ids=" << val_rows << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string plan;
  std::string features;
  std::string phases = "2u,1f";
  double margin_init = 0.1;
  double margin_stride = 0.1;
  double margin_max = 0.5;
  double lr = 1e-4;
  double c = 1e-3;
  double weight_decay = 1e-2;
  double eta_min = 0.0;
  int batch = 64;
  std::uint64_t seed = 0;
  std::vector<int> hidden{64, 64};
  int embed_dim = 64;
  double dropout = 0.2;
  int projection_width = 0;
  double head_scale = 30.0;
  bool no_dynamic_margin = false;
  bool with_projection = false;
  bool no_stratified_lr = false;
  std::string out_ckpt;
  std::string out_report;
};

PhasePlan parse_phases(const std::string& text) {
  PhasePlan plan;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t comma = std::min(text.find(',', begin), text.size());
    const std::string token = text.substr(begin, comma - begin);
    if (token.size() < 2)
      throw ConfigError("train: bad phase token '" + token +
                        "' (want e.g. 2u or 1f)");
    const char kind = token.back();
    if (kind != 'u' && kind != 'f')
      throw ConfigError("train: bad phase token '" + token +
                        "' (must end in u or f)");
    int epochs = 0;
    for (std::size_t i = 0; i + 1 < token.size(); ++i) {
      if (token[i] < '0' || token[i] > '9')
        throw ConfigError("train: bad phase token '" + token + "'");
      epochs = epochs * 10 + (token[i] - '0');
      if (epochs > 1000) throw ConfigError("train: phase too long: '" + token + "'");
    }
    plan.phases.push_back({epochs, kind == 'f'});
    begin = comma + 1;
    if (comma == text.size()) break;
  }
  validate(plan);
  return plan;
}

int run_train(const TrainArgs& a) {
  const DatasetPlan plan = read_plan(a.plan);
  const VectorStore features = read_features(a.features);
  const PhasePlan phases = parse_phases(a.phases);

  MarginSchedule sched{a.margin_init, a.margin_stride, a.margin_max};
  if (a.no_dynamic_margin) sched = {a.margin_max, 0.0, a.margin_max};
  validate(sched);

  StratifiedLrConfig opt;
  opt.lr = a.lr;
  opt.c = a.no_stratified_lr ? 1.0 : a.c;
  opt.weight_decay = a.weight_decay;
  opt.eta_min = a.eta_min;
  opt.total_epochs = phases.total_epochs();

  EncoderConfig enc;
  enc.dim_in = static_cast<int>(features.dim);
  enc.backbone_widths = a.hidden;
  enc.with_projection = a.with_projection;
  enc.projection_width =
      a.with_projection ? (a.projection_width > 0 ? a.projection_width : a.embed_dim)
                        : 0;
  enc.embed_dim = a.embed_dim;
  enc.dropout_rate = a.dropout;
  enc.seed = a.seed;

  TrainOptions options;
  options.batch_size = a.batch;
  options.seed = a.seed;
  options.head_scale = a.head_scale;

  TrainOutput out = train_run(plan, features, enc, sched, opt, phases, options);
  for (const EpochRow& r : out.report.rows) {
    std::printf(
        "epoch=%d loss=%.6f margin=%.4f lr_head=%.3e lr_backbone=%.3e "
        "val_mp5=%.6f seconds=%.2f\n",
        r.epoch, r.mean_loss, r.margin, r.lr_head, r.lr_backbone, r.val_mp5,
        r.seconds);
  }
  if (!a.out_ckpt.empty()) {
    Checkpoint ckpt{std::move(out.encoder), std::move(out.head),
                    std::move(out.moments)};
    write_checkpoint(ckpt, a.out_ckpt);
  }
  if (!a.out_report.empty()) write_train_report(out.report, a.out_report);
  return 0;
}

// ---- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string ckpt;
  std::string manifest;
  std::string features;
  int flip_views = 1;
  double flip_std = 0.05;
  std::uint64_t seed = 0;
  std::string plan;     // optional: enables --split filtering
  std::string split = "all";
  std::string out;
  std::string out_labels;
};

int run_embed(const EmbedArgs& a) {
  if (a.flip_views < 1) throw ConfigError("embed: --flip-views must be >= 1");
  if (a.split != "all" && a.split != "train" && a.split != "val")
    throw ConfigError("embed: --split must be all, train or val");
  if (a.split != "all" && a.plan.empty())
    throw ConfigError("embed: --split train/val needs --plan");

  const Checkpoint ckpt = read_checkpoint(a.ckpt);
  const auto manifest = load_manifest(a.manifest);
  const VectorStore features = read_features(a.features);
  const auto row_of = features.id_index();

  std::unordered_set<std::uint64_t> keep;
  bool filter = false;
  if (!a.plan.empty() && a.split != "all") {
    filter = true;
    const DatasetPlan plan = read_plan(a.plan);
    const Split want = a.split == "val" ? Split::kValidation : Split::kTrain;
    for (const PlanEntry& e : plan.entries)
      if (e.split == want) keep.insert(e.sample_id);
  }

  VectorStore store;
  store.dim = static_cast<std::uint32_t>(ckpt.encoder.config.embed_dim);
  std::vector<std::pair<std::uint64_t, std::string>> labels;
  std::vector<double> x(features.dim);
  std::vector<float> ef(store.dim);

  for (const ManifestRecord& rec : manifest) {
    if (filter && !keep.count(rec.sample_id)) continue;
    const auto it = row_of.find(rec.sample_id);
    if (it == row_of.end())
      throw ValidationError("embed: sample " + std::to_string(rec.sample_id) +
                            " missing from feature store");
    const auto fv = features.vec(it->second);

    std::vector<std::vector<double>> views;
    views.reserve(static_cast<std::size_t>(a.flip_views));
    for (int v = 0; v < a.flip_views; ++v) {
      for (std::size_t d = 0; d < fv.size(); ++d) x[d] = fv[d];
      if (v > 0) {
        // Deterministic jitter views standing in for flip augmentation on
        // vector data; view 0 is always the untouched input.
        SplitMix64 rng(derive_seed(a.seed, seed_tag::kFlipView, rec.sample_id,
                                   static_cast<std::uint64_t>(v)));
        for (auto& xd : x) xd += a.flip_std * rng.normal();
      }
      views.push_back(encoder_forward(ckpt.encoder, x, RunMode::kEval, 0, nullptr));
    }
    const std::vector<double> emb =
        views.size() == 1 ? std::move(views[0]) : fuse_views(views);
    for (std::size_t d = 0; d < ef.size(); ++d) ef[d] = static_cast<float>(emb[d]);
    store.push(rec.sample_id, ef);
    labels.emplace_back(rec.sample_id, rec.class_label);
  }
  if (store.size() == 0) throw ValidationError("embed: no samples selected");

  write_store(store, a.out);
  if (!a.out_labels.empty()) write_labels(labels, a.out_labels);
  std::cout << "embedded=" << store.size() << " dim=" << store.dim
            << " views=" << a.flip_views << " out=" << a.out << "\n";
  return 0;
}

// ---- query -----------------------------------------------------------------

struct QueryArgs {
  std::string index;
  std::string queries;
  int k = 5;
  bool exclude_self = false;
  int threads = 0;
  std::string out;
};

int run_query(const QueryArgs& a) {
  const VectorStore index = read_store(a.index);
  const VectorStore queries = read_store(a.queries);
  const auto t0 = std::chrono::steady_clock::now();
  const RetrievalResult result = top_k(index, queries, a.k, a.exclude_self, a.threads);
  const double secs = elapsed(t0);
  write_results_csv(result, a.out);
  std::printf("queries=%zu index=%zu k=%d seconds=%.3f\n", queries.size(),
              index.size(), a.k, secs);
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvalArgs {
  std::string results;
  std::string query_labels;
  std::string index_labels;
  std::string convention = "truncated";
  std::string out;
};

int run_evaluate(const EvalArgs& a) {
  Mp5Convention conv;
  if (a.convention == "truncated") {
    conv = Mp5Convention::kTruncatedRanks;
  } else if (a.convention == "clipped") {
    conv = Mp5Convention::kClippedDenominator;
  } else {
    throw ConfigError("evaluate: --convention must be truncated or clipped");
  }
  const RetrievalResult results = read_results_csv(a.results);
  const GroundTruth truth =
      truth_from_labels(read_labels(a.query_labels), read_labels(a.index_labels));
  const MetricReport report = mp_at_5(results, truth, conv);
  if (!a.out.empty()) write_metric_report(report, a.out);
  std::cout << metric_summary_line(report) << "\n";
  return 0;
}

// ---- margin-schedule ---------------------------------------------------------

struct ScheduleArgs {
  double init = 0.1;
  double stride = 0.1;
  double max = 0.5;
  int epochs = 0;
  std::string out;
};

void write_schedule_svg(const MarginSchedule& sched, int epochs,
                        const std::filesystem::path& path) {
  constexpr double kW = 640, kH = 400;
  constexpr double kL = 60, kR = 20, kT = 20, kB = 50;
  const double plot_w = kW - kL - kR, plot_h = kH - kT - kB;
  const double y_max = sched.m_max > 0 ? sched.m_max * 1.1 : 1.0;
  auto px = [&](int e) {
    return epochs == 1 ? kL + plot_w / 2
                       : kL + plot_w * (e - 1) / static_cast<double>(epochs - 1);
  };
  auto py = [&](double m) { return kT + plot_h * (1.0 - m / y_max); };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 400\" "
         "font-family=\"monospace\" font-size=\"12\">\n";
  std::snprintf(buf, sizeof buf,
                "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                kL, kT + plot_h, kL + plot_w, kT + plot_h);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                kL, kT, kL, kT + plot_h);
  out << buf;
  out << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (int e = 1; e <= epochs; ++e) {
    std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", e == 1 ? "" : " ", px(e),
                  py(margin_at_epoch(sched, e)));
    out << buf;
  }
  out << "\"/>\n";
  const int tick_step = std::max(1, epochs / 10);
  for (int e = 1; e <= epochs; e += tick_step) {
    std::snprintf(buf, sizeof buf,
                  "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%d</text>\n",
                  px(e), kT + plot_h + 16, e);
    out << buf;
  }
  for (int i = 0; i <= 4; ++i) {
    const double m = y_max * i / 4.0;
    std::snprintf(buf, sizeof buf,
                  "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3f</text>\n",
                  kL - 6, py(m) + 4, m);
    out << buf;
  }
  std::snprintf(buf, sizeof buf,
                "  <text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">epoch</text>\n",
                kL + plot_w / 2, kH - 12);
  out << buf;
  out << "  <text x=\"14\" y=\"" << (kT + plot_h / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << (kT + plot_h / 2) << ")\">margin (rad)</text>\n";
  out << "</svg>\n";
}

int run_schedule(const ScheduleArgs& a) {
  if (a.epochs < 1) throw ConfigError("margin-schedule: --epochs must be >= 1");
  const MarginSchedule sched{a.init, a.stride, a.max};
  validate(sched);
  const std::filesystem::path path(a.out);
  if (path.extension() == ".svg") {
    write_schedule_svg(sched, a.epochs, path);
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open for write: " + path.string());
    out << "epoch,margin\n";
    char buf[64];
    for (int e = 1; e <= a.epochs; ++e) {
      std::snprintf(buf, sizeof buf, "%d,%.17g\n", e, margin_at_epoch(sched, e));
      out << buf;
    }
  }
  std::cout << "epochs=" << a.epochs << " out=" << a.out << "\n";
  return 0;
}

// ---- bench -------------------------------------------------------------------

struct BenchArgs {
  std::size_t index_size = 200000;
  std::size_t queries = 5000;
  int dim = 64;
  int k = 5;
  int threads = 0;
  int verify_sample = 100;
  std::uint64_t seed = 0;
  std::string dump;
};

VectorStore random_unit_store(std::size_t count, int dim, SplitMix64& rng,
                              std::uint64_t id_base) {
  VectorStore store;
  store.dim = static_cast<std::uint32_t>(dim);
  store.ids.reserve(count);
  store.data.reserve(count * static_cast<std::size_t>(dim));
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < count; ++i) {
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

int run_bench(const BenchArgs& a) {
  if (a.dim < 1 || a.dim > static_cast<int>(kMaxEmbedDim))
    throw ConfigError("bench: --dim must be in [1, 64]");
  if (a.index_size == 0 || a.queries == 0)
    throw ConfigError("bench: --index-size and --queries must be >= 1");

  SplitMix64 rng(derive_seed(a.seed, seed_tag::kBench));
  const VectorStore index = random_unit_store(a.index_size, a.dim, rng, 0);
  const VectorStore queries =
      random_unit_store(a.queries, a.dim, rng, a.index_size);

  const auto t0 = std::chrono::steady_clock::now();
  const RetrievalResult result = top_k(index, queries, a.k, false, a.threads);
  const double secs = elapsed(t0);
  const double pairs = static_cast<double>(a.index_size) * a.queries;
  std::printf("index=%zu queries=%zu dim=%d k=%d threads=%d seconds=%.3f "
              "gmacs=%.2f qps=%.1f\n",
              a.index_size, a.queries, a.dim, a.k, a.threads, secs,
              pairs * a.dim / 1e9, a.queries / secs);

  if (a.verify_sample > 0) {
    const std::size_t sample =
        std::min(static_cast<std::size_t>(a.verify_sample), a.queries);
    std::vector<std::size_t> rows(a.queries);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    SplitMix64 pick(derive_seed(a.seed, seed_tag::kBench, 1));
    pick.shuffle(rows);
    rows.resize(sample);
    std::sort(rows.begin(), rows.end());

    VectorStore sub;
    sub.dim = queries.dim;
    for (std::size_t row : rows) sub.push(queries.ids[row], queries.vec(row));
    const RetrievalResult oracle = top_k_reference(index, sub, a.k, false);
    for (std::size_t s = 0; s < sample; ++s) {
      const auto& got = result.hits[rows[s]];
      const auto& want = oracle.hits[s];
      if (got.size() != want.size())
        throw ValidationError("bench: verify failed on query " +
                              std::to_string(sub.ids[s]) + " (hit count)");
      for (std::size_t r = 0; r < got.size(); ++r)
        if (got[r].id != want[r].id || got[r].similarity != want[r].similarity)
          throw ValidationError("bench: verify failed on query " +
                                std::to_string(sub.ids[s]) + " rank " +
                                std::to_string(r + 1));
    }
    std::printf("verify=ok sampled=%zu\n", sample);
  }
  if (!a.dump.empty()) write_results_csv(result, a.dump);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embkit: embedding training and exact retrieval toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML key=value file");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  cmd_synth->add_option("--classes", synth.spec.class_count, "Class count")
      ->default_val(200);
  cmd_synth->add_option("--dim-in", synth.spec.dim_in, "Feature dimension")
      ->default_val(32);
  cmd_synth->add_option("--per-class-min", synth.spec.samples_min,
                        "Min samples per class")->default_val(30);
  cmd_synth->add_option("--per-class-max", synth.spec.samples_max,
                        "Max samples per class")->default_val(60);
  cmd_synth->add_option("--std", synth.spec.cluster_std, "Cluster std")
      ->default_val(0.15);
  cmd_synth->add_option("--seed", synth.spec.seed, "RNG seed")->default_val(0);
  cmd_synth->add_option("--out", synth.out,
                        "Output prefix (<out>.manifest.csv, <out>.ftr)")
      ->required();

  PlanArgs plan;
  auto* cmd_plan = app.add_subcommand("plan", "Build a class-balanced dataset plan");
  cmd_plan->add_option("--manifest", plan.manifest, "Manifest CSV")->required();
  cmd_plan->add_option("--cap", plan.cap, "Max distinct ids per class")
      ->default_val(100);
  cmd_plan->add_option("--min-keep", plan.min_keep, "Drop classes below this size")
      ->default_val(3);
  cmd_plan->add_option("--floor", plan.floor, "Resample multiplicity floor")
      ->default_val(20);
  cmd_plan->add_option("--k", plan.k_folds, "Fold count")->default_val(20);
  cmd_plan->add_option("--val-fold", plan.val_fold, "Validation fold index")
      ->default_val(0);
  cmd_plan->add_option("--seed", plan.seed, "RNG seed")->default_val(0);
  cmd_plan->add_option("--out", plan.out, "Plan CSV path")->required();

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "Fine-tune encoder + ArcFace head");
  cmd_train->add_option("--plan", train.plan, "Plan CSV")->required();
  cmd_train->add_option("--features", train.features, "Feature store (FTR1)")
      ->required();
  cmd_train->add_option("--phases", train.phases,
                        "Comma phases, e.g. 2u,1f (u unfrozen, f frozen)");
  cmd_train->add_option("--margin-init", train.margin_init, "Initial margin");
  cmd_train->add_option("--margin-stride", train.margin_stride, "Margin stride");
  cmd_train->add_option("--margin-max", train.margin_max, "Margin cap");
  cmd_train->add_option("--lr", train.lr, "Base learning rate");
  cmd_train->add_option("--c", train.c, "Backbone LR reduction factor");
  cmd_train->add_option("--wd", train.weight_decay, "Weight decay");
  cmd_train->add_option("--eta-min", train.eta_min, "Cosine annealing floor");
  cmd_train->add_option("--batch", train.batch, "Batch size");
  cmd_train->add_option("--seed", train.seed, "RNG seed");
  cmd_train->add_option("--hidden", train.hidden,
                        "Backbone hidden widths (repeatable)");
  cmd_train->add_option("--embed-dim", train.embed_dim, "Embedding dimension");
  cmd_train->add_option("--dropout", train.dropout, "Neck dropout rate");
  cmd_train->add_option("--proj-width", train.projection_width,
                        "Projection width (with --with-projection)");
  cmd_train->add_option("--head-scale", train.head_scale, "ArcFace logit scale");
  cmd_train->add_flag("--no-dynamic-margin", train.no_dynamic_margin,
                      "Pin margin at --margin-max for every epoch");
  cmd_train->add_flag("--with-projection", train.with_projection,
                      "Keep a projection layer between backbone and neck");
  cmd_train->add_flag("--no-stratified-lr", train.no_stratified_lr,
                      "Train backbone at the full base rate (c=1)");
  cmd_train->add_option("--out-ckpt", train.out_ckpt, "Checkpoint path (EKC1)");
  cmd_train->add_option("--out-report", train.out_report, "Train report CSV");

  EmbedArgs embed;
  auto* cmd_embed = app.add_subcommand("embed", "Embed features with a checkpoint");
  cmd_embed->add_option("--ckpt", embed.ckpt, "Checkpoint (EKC1)")->required();
  cmd_embed->add_option("--manifest", embed.manifest, "Manifest CSV")->required();
  cmd_embed->add_option("--features", embed.features, "Feature store (FTR1)")
      ->required();
  cmd_embed->add_option("--flip-views", embed.flip_views,
                        "Views per sample; >1 fuses jittered views");
  cmd_embed->add_option("--flip-std", embed.flip_std, "Jitter std for views > 0");
  cmd_embed->add_option("--seed", embed.seed, "RNG seed for jitter views");
  cmd_embed->add_option("--plan", embed.plan, "Plan CSV (enables --split)");
  cmd_embed->add_option("--split", embed.split, "all, train or val");
  cmd_embed->add_option("--out", embed.out, "Embedding store path (EMB1)")
      ->required();
  cmd_embed->add_option("--out-labels", embed.out_labels,
                        "Also write sample_id,class_label CSV");

  QueryArgs query;
  auto* cmd_query = app.add_subcommand("query", "Exact top-k retrieval");
  cmd_query->add_option("--index", query.index, "Index store (EMB1)")->required();
  cmd_query->add_option("--queries", query.queries, "Query store (EMB1)")
      ->required();
  cmd_query->add_option("--k", query.k, "Neighbors per query")->default_val(5);
  cmd_query->add_flag("--exclude-self", query.exclude_self,
                      "Skip index rows whose id equals the query id");
  cmd_query->add_option("--threads", query.threads, "Worker threads (0 = auto)");
  cmd_query->add_option("--out", query.out, "Results CSV path")->required();

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("evaluate", "Score results with mP@5");
  cmd_eval->add_option("--results", eval.results, "Results CSV")->required();
  cmd_eval->add_option("--query-labels", eval.query_labels,
                       "Query labels CSV (sample_id,class_label)")->required();
  cmd_eval->add_option("--index-labels", eval.index_labels,
                       "Index labels CSV (sample_id,class_label)")->required();
  cmd_eval->add_option("--convention", eval.convention,
                       "truncated (default) or clipped");
  cmd_eval->add_option("--out", eval.out, "Per-query report CSV");

  ScheduleArgs sched;
  auto* cmd_sched = app.add_subcommand("margin-schedule",
                                       "Emit the per-epoch margin table");
  cmd_sched->add_option("--init", sched.init, "Initial margin");
  cmd_sched->add_option("--stride", sched.stride, "Per-epoch stride");
  cmd_sched->add_option("--max", sched.max, "Margin cap");
  cmd_sched->add_option("--epochs", sched.epochs, "Epoch count")->required();
  cmd_sched->add_option("--out", sched.out, "Output path (.csv or .svg)")
      ->required();

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand("bench", "Timed retrieval benchmark");
  cmd_bench->add_option("--index-size", bench.index_size, "Index row count")
      ->default_val(200000);
  cmd_bench->add_option("--queries", bench.queries, "Query row count")
      ->default_val(5000);
  cmd_bench->add_option("--dim", bench.dim, "Vector dimension")->default_val(64);
  cmd_bench->add_option("--k", bench.k, "Neighbors per query")->default_val(5);
  cmd_bench->add_option("--threads", bench.threads, "Worker threads (0 = auto)");
  cmd_bench->add_option("--verify-sample", bench.verify_sample,
                        "Queries re-checked against the naive oracle (0 = skip)");
  cmd_bench->add_option("--seed", bench.seed, "RNG seed");
  cmd_bench->add_option("--dump", bench.dump, "Optional results CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_plan) return run_plan(plan);
    if (*cmd_train) return run_train(train);
    if (*cmd_embed) return run_embed(embed);
    if (*cmd_query) return run_query(query);
    if (*cmd_eval) return run_evaluate(eval);
    if (*cmd_sched) return run_schedule(sched);
    if (*cmd_bench) return run_bench(bench);
  } catch (const Error& e) {
    std::cerr << "embkit: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "embkit: internal error: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
