#include "embkit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>

#include "embkit/csv.hpp"
#include "embkit/errors.hpp"
#include "embkit/metrics.hpp"
#include "embkit/retrieval.hpp"
#include "embkit/rng.hpp"

namespace embkit {

namespace {

struct TrainSample {
  std::size_t feature_row = 0;
  int class_index = 0;
};

// Parameter blocks in checkpoint order: backbone affines (w then b each),
// projection, neck, then the head weight matrix. Moments follow the same
// order with one Moments entry per block.
struct BlockRef {
  std::span<double> params;
  std::span<const double> grads;
  double group_lr_scale = 1.0;  // 1 for head/neck, c applied by caller
  bool backbone_group = false;
  bool decay = false;
  std::string name;
};

std::vector<BlockRef> collect_blocks(EncoderState& enc, ArcFaceParams& head,
                                     EncoderGrads& grads,
                                     std::vector<double>& head_grad) {
  std::vector<BlockRef> blocks;
  auto add = [&](std::vector<double>& p, std::vector<double>& g, bool backbone,
                 bool decay, std::string name) {
    blocks.push_back({std::span<double>(p), std::span<const double>(g), 1.0,
                      backbone, decay, std::move(name)});
  };
  for (std::size_t i = 0; i < enc.backbone.size(); ++i) {
    const std::string base = "backbone[" + std::to_string(i) + "]";
    add(enc.backbone[i].w, grads.backbone[i].w, true, true, base + ".w");
    add(enc.backbone[i].b, grads.backbone[i].b, true, false, base + ".b");
  }
  if (enc.projection) {
    add(enc.projection->w, grads.projection->w, true, true, "projection.w");
    add(enc.projection->b, grads.projection->b, true, false, "projection.b");
  }
  add(enc.neck.w, grads.neck.w, false, true, "neck.w");
  add(enc.neck.b, grads.neck.b, false, false, "neck.b");
  add(head.weights, head_grad, false, true, "head.w");
  return blocks;
}

EncoderGrads zero_grads_like(const EncoderState& enc) {
  EncoderGrads g;
  g.backbone.reserve(enc.backbone.size());
  for (const Affine& a : enc.backbone)
    g.backbone.push_back({a.in, a.out, std::vector<double>(a.w.size(), 0.0),
                          std::vector<double>(a.b.size(), 0.0)});
  if (enc.projection)
    g.projection = Affine{enc.projection->in, enc.projection->out,
                          std::vector<double>(enc.projection->w.size(), 0.0),
                          std::vector<double>(enc.projection->b.size(), 0.0)};
  g.neck = {enc.neck.in, enc.neck.out, std::vector<double>(enc.neck.w.size(), 0.0),
            std::vector<double>(enc.neck.b.size(), 0.0)};
  return g;
}

void accumulate(Affine& into, const Affine& from) {
  for (std::size_t i = 0; i < into.w.size(); ++i) into.w[i] += from.w[i];
  for (std::size_t i = 0; i < into.b.size(); ++i) into.b[i] += from.b[i];
}

void scale(Affine& a, double s) {
  for (double& x : a.w) x *= s;
  for (double& x : a.b) x *= s;
}

}  // namespace

int PhasePlan::total_epochs() const {
  int total = 0;
  for (const Phase& p : phases) total += p.epochs;
  return total;
}

void validate(const PhasePlan& plan) {
  if (plan.phases.empty()) throw ConfigError("phase plan: need at least one phase");
  for (const Phase& p : plan.phases)
    if (p.epochs < 1) throw ConfigError("phase plan: every phase needs epochs >= 1");
}

TrainOutput train_run(const DatasetPlan& plan, const VectorStore& features,
                      const EncoderConfig& encoder_config,
                      const MarginSchedule& sched, const StratifiedLrConfig& opt,
                      const PhasePlan& phases, const TrainOptions& options) {
  validate(encoder_config);
  validate(sched);
  validate(opt);
  validate(phases);
  if (options.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (options.head_scale <= 0.0) throw ConfigError("train: head_scale must be > 0");
  if (static_cast<int>(features.dim) != encoder_config.dim_in)
    throw ConfigError("train: feature dim " + std::to_string(features.dim) +
                      " does not match encoder dim_in " +
                      std::to_string(encoder_config.dim_in));
  if (plan.class_count < 2)
    throw ValidationError("train: plan must cover at least two classes");

  const auto row_of = features.id_index();
  auto feature_row = [&](std::uint64_t sample_id) {
    const auto it = row_of.find(sample_id);
    if (it == row_of.end())
      throw ValidationError("train: sample " + std::to_string(sample_id) +
                            " missing from feature store");
    return it->second;
  };

  std::vector<TrainSample> train_set;
  for (const PlanEntry& e : plan.entries) {
    if (e.split != Split::kTrain) continue;
    const std::size_t row = feature_row(e.sample_id);
    for (int r = 0; r < e.multiplicity; ++r) train_set.push_back({row, e.class_index});
  }
  if (train_set.empty()) throw ValidationError("train: plan has no train entries");

  TrainOutput out;
  out.encoder = init_encoder(encoder_config);
  out.head = init_arcface(plan.class_count, encoder_config.embed_dim,
                          options.head_scale, options.seed);

  std::vector<double> head_grad(out.head.weights.size(), 0.0);
  {
    EncoderGrads probe = zero_grads_like(out.encoder);
    out.moments.blocks.resize(
        collect_blocks(out.encoder, out.head, probe, head_grad).size());
  }

  const int total_epochs = phases.total_epochs();
  StratifiedLrConfig lr_cfg = opt;

  std::vector<double> x(features.dim);
  int global_epoch = 0;
  for (const Phase& phase : phases.phases) {
    out.encoder.frozen_backbone = phase.frozen_backbone;
    for (int pe = 1; pe <= phase.epochs; ++pe) {
      ++global_epoch;
      const auto t0 = std::chrono::steady_clock::now();

      const double margin = margin_at_epoch(sched, global_epoch);
      if (options.cosine_restart_per_phase) {
        lr_cfg.total_epochs = phase.epochs;
      } else {
        lr_cfg.total_epochs = total_epochs;
      }
      const double lr_head =
          cosine_lr(lr_cfg, options.cosine_restart_per_phase ? pe : global_epoch);
      const double lr_bb = lr_head * opt.c;

      std::vector<std::size_t> order(train_set.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      SplitMix64 shuffler(derive_seed(options.seed, seed_tag::kEpochShuffle,
                                      static_cast<std::uint64_t>(global_epoch)));
      shuffler.shuffle(order);

      double loss_sum = 0.0;
      const std::size_t batch = static_cast<std::size_t>(options.batch_size);
      for (std::size_t begin = 0; begin < order.size(); begin += batch) {
        const std::size_t end = std::min(begin + batch, order.size());
        const double inv_n = 1.0 / static_cast<double>(end - begin);

        EncoderGrads grads = zero_grads_like(out.encoder);
        std::fill(head_grad.begin(), head_grad.end(), 0.0);

        for (std::size_t pos = begin; pos < end; ++pos) {
          const TrainSample& s = train_set[order[pos]];
          const auto fv = features.vec(s.feature_row);
          for (std::size_t d = 0; d < fv.size(); ++d) x[d] = fv[d];

          ForwardCache cache;
          const std::uint64_t drop_seed =
              derive_seed(options.seed, seed_tag::kDropout,
                          static_cast<std::uint64_t>(global_epoch),
                          static_cast<std::uint64_t>(pos));
          const std::vector<double> emb =
              encoder_forward(out.encoder, x, RunMode::kTrain, drop_seed, &cache);

          ArcFaceGrad ag = arcface_grad(out.head, emb, s.class_index, margin);
          loss_sum += ag.loss;

          EncoderGrads eg = encoder_backward(out.encoder, cache, ag.d_embedding);
          for (std::size_t i = 0; i < grads.backbone.size(); ++i)
            accumulate(grads.backbone[i], eg.backbone[i]);
          if (grads.projection) accumulate(*grads.projection, *eg.projection);
          accumulate(grads.neck, eg.neck);
          for (std::size_t i = 0; i < head_grad.size(); ++i)
            head_grad[i] += ag.d_weights[i];
        }

        for (Affine& a : grads.backbone) scale(a, inv_n);
        if (grads.projection) scale(*grads.projection, inv_n);
        scale(grads.neck, inv_n);
        for (double& g : head_grad) g *= inv_n;

        ++out.moments.t;
        auto blocks = collect_blocks(out.encoder, out.head, grads, head_grad);
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
          BlockRef& blk = blocks[bi];
          if (phase.frozen_backbone && blk.backbone_group) continue;
          adamw_step(blk.params, blk.grads, out.moments.blocks[bi], out.moments.t,
                     blk.backbone_group ? lr_bb : lr_head, opt, blk.decay, blk.name);
        }
        ++out.encoder.revision;
      }

      const ValidationScore val = validate_encoder(out.encoder, plan, features);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.report.rows.push_back({global_epoch,
                                 loss_sum / static_cast<double>(train_set.size()),
                                 margin, lr_head, lr_bb, val.mp_at_5, val.skipped,
                                 seconds});
    }
  }
  return out;
}

ValidationScore validate_encoder(const EncoderState& state, const DatasetPlan& plan,
                                 const VectorStore& features, int k) {
  if (static_cast<int>(features.dim) != state.config.dim_in)
    throw ConfigError("validate: feature dim does not match encoder dim_in");
  const auto row_of = features.id_index();

  std::vector<const PlanEntry*> val_entries;
  std::unordered_map<int, std::vector<std::uint64_t>> by_class;
  for (const PlanEntry& e : plan.entries) {
    if (e.split != Split::kValidation) continue;
    val_entries.push_back(&e);
    by_class[e.class_index].push_back(e.sample_id);
  }
  if (val_entries.empty())
    throw ValidationError("validate: plan has no validation entries");
  if (by_class.size() < 2)
    throw ValidationError("validate: validation split must span two classes");

  VectorStore store;
  store.dim = static_cast<std::uint32_t>(state.config.embed_dim);
  std::vector<double> x(features.dim);
  std::vector<float> ef(store.dim);
  for (const PlanEntry* e : val_entries) {
    const auto it = row_of.find(e->sample_id);
    if (it == row_of.end())
      throw ValidationError("validate: sample " + std::to_string(e->sample_id) +
                            " missing from feature store");
    const auto fv = features.vec(it->second);
    for (std::size_t d = 0; d < fv.size(); ++d) x[d] = fv[d];
    const std::vector<double> emb =
        encoder_forward(state, x, RunMode::kEval, 0, nullptr);
    for (std::size_t d = 0; d < ef.size(); ++d) ef[d] = static_cast<float>(emb[d]);
    store.push(e->sample_id, ef);
  }

  GroundTruth truth;
  for (const PlanEntry* e : val_entries) {
    auto& rel = truth.relevant[e->sample_id];
    for (std::uint64_t other : by_class[e->class_index])
      if (other != e->sample_id) rel.insert(other);
  }

  const RetrievalResult result = top_k(store, store, k, /*exclude_self=*/true);
  const MetricReport report = mp_at_5(result, truth);
  return {report.mp_at_5, report.skipped, report.counted};
}

void write_train_report(const TrainReport& report,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << "epoch,loss,margin,lr_head,lr_backbone,val_mp5,seconds\n";
  char buf[256];
  for (const EpochRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", r.epoch,
                  r.mean_loss, r.margin, r.lr_head, r.lr_backbone, r.val_mp5,
                  r.seconds);
    out << buf << '\n';
  }
}

TrainReport read_train_report(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "epoch,loss,margin,lr_head,lr_backbone,val_mp5,seconds")
    throw ParseError(path.string() + ": line 1: expected train report header");
  TrainReport report;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 7)
      throw ParseError("line " + std::to_string(line_no) + ": expected 7 fields");
    EpochRow row;
    row.epoch = static_cast<int>(parse_i64_field(fields[0], "epoch", line_no));
    auto num = [&](const std::string& f, const char* what) {
      try {
        return std::stod(f);
      } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " +
                         std::string(what) + " '" + f + "'");
      }
    };
    row.mean_loss = num(fields[1], "loss");
    row.margin = num(fields[2], "margin");
    row.lr_head = num(fields[3], "lr_head");
    row.lr_backbone = num(fields[4], "lr_backbone");
    row.val_mp5 = num(fields[5], "val_mp5");
    row.seconds = num(fields[6], "seconds");
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace embkit
