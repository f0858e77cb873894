// embkit._core: python bindings over the library's main operations.
// Arrays cross the boundary as numpy (float32 for stored vectors, float64
// for training-precision math), matching the file formats.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "embkit/checkpoint.hpp"
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

namespace py = pybind11;
using namespace embkit;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleRows = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<std::uint64_t> ids_or_iota(const py::object& ids, std::size_t rows) {
  if (ids.is_none()) {
    std::vector<std::uint64_t> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = i;
    return out;
  }
  auto out = ids.cast<std::vector<std::uint64_t>>();
  if (out.size() != rows)
    throw ArgumentError("ids length " + std::to_string(out.size()) +
                        " does not match row count " + std::to_string(rows));
  return out;
}

VectorStore store_from(const FloatRows& vecs, const py::object& ids) {
  if (vecs.ndim() != 2) throw ArgumentError("vectors must be a 2-D array");
  if (vecs.shape(1) < 1) throw ArgumentError("vectors must have at least one column");
  const auto rows = static_cast<std::size_t>(vecs.shape(0));
  VectorStore store;
  store.dim = static_cast<std::uint32_t>(vecs.shape(1));
  store.ids = ids_or_iota(ids, rows);
  store.data.assign(vecs.data(), vecs.data() + rows * store.dim);
  return store;
}

py::array_t<float> rows_f32(const VectorStore& store) {
  py::array_t<float> out({store.size(), static_cast<std::size_t>(store.dim)});
  std::copy(store.data.begin(), store.data.end(), out.mutable_data());
  return out;
}

py::array_t<std::uint64_t> ids_array(const std::vector<std::uint64_t>& ids) {
  py::array_t<std::uint64_t> out(ids.size());
  std::copy(ids.begin(), ids.end(), out.mutable_data());
  return out;
}

py::list plan_rows(const DatasetPlan& plan) {
  py::list rows;
  for (const PlanEntry& e : plan.entries) {
    py::dict row;
    row["sample_id"] = e.sample_id;
    row["class_index"] = e.class_index;
    row["fold"] = e.fold;
    row["split"] = split_name(e.split);
    row["multiplicity"] = e.multiplicity;
    rows.append(std::move(row));
  }
  return rows;
}

DatasetPlan plan_from(const py::sequence& rows) {
  DatasetPlan plan;
  plan.entries.reserve(py::len(rows));
  for (const auto& obj : rows) {
    const auto row = py::cast<py::dict>(obj);
    PlanEntry e;
    e.sample_id = py::cast<std::uint64_t>(row["sample_id"]);
    e.class_index = py::cast<int>(row["class_index"]);
    e.fold = py::cast<int>(row["fold"]);
    const auto split = py::cast<std::string>(row["split"]);
    if (split == "train") {
      e.split = Split::kTrain;
    } else if (split == "validation") {
      e.split = Split::kValidation;
    } else {
      throw ArgumentError("unknown split token '" + split + "'");
    }
    e.multiplicity = py::cast<int>(row["multiplicity"]);
    plan.class_count = std::max(plan.class_count, e.class_index + 1);
    plan.entries.push_back(e);
  }
  return plan;
}

ArcFaceParams head_from(const DoubleRows& weights, double scale) {
  if (weights.ndim() != 2) throw ArgumentError("weights must be a 2-D array");
  ArcFaceParams params;
  params.class_count = static_cast<int>(weights.shape(0));
  params.embed_dim = static_cast<int>(weights.shape(1));
  params.scale = scale;
  params.weights.assign(weights.data(),
                        weights.data() + weights.size());
  return params;
}

std::vector<double> vec_from(const DoubleRows& v, const char* what) {
  if (v.ndim() != 1) throw ArgumentError(std::string(what) + " must be a 1-D array");
  return {v.data(), v.data() + v.shape(0)};
}

Mp5Convention convention_from(const std::string& name) {
  if (name == "truncated") return Mp5Convention::kTruncatedRanks;
  if (name == "clipped") return Mp5Convention::kClippedDenominator;
  throw ArgumentError("convention must be 'truncated' or 'clipped'");
}

StratifiedLrConfig lr_config(double lr, double c, double eta_min, int total_epochs) {
  StratifiedLrConfig cfg;
  cfg.lr = lr;
  cfg.c = c;
  cfg.eta_min = eta_min;
  cfg.total_epochs = total_epochs;
  validate(cfg);
  return cfg;
}

py::list report_rows(const TrainReport& report) {
  py::list rows;
  for (const EpochRow& r : report.rows) {
    py::dict row;
    row["epoch"] = r.epoch;
    row["loss"] = r.mean_loss;
    row["margin"] = r.margin;
    row["lr_head"] = r.lr_head;
    row["lr_backbone"] = r.lr_backbone;
    row["val_mp5"] = r.val_mp5;
    row["val_skipped"] = r.val_skipped;
    row["seconds"] = r.seconds;
    rows.append(std::move(row));
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "embkit core: metric-learning embeddings, exact retrieval, mP@5";
  m.attr("__version__") = "0.1.0";
  m.attr("MAX_EMBED_DIM") = kMaxEmbedDim;

  py::register_exception<Error>(m, "EmbkitError", PyExc_RuntimeError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  // ---- seeded randomness ----------------------------------------------------

  m.def("mix64", [](std::uint64_t x) { return mix64(x); }, py::arg("x"),
        "SplitMix64 output function (golden-gamma add + finalizer).");
  m.def(
      "splitmix64",
      [](std::uint64_t seed, std::size_t count) {
        SplitMix64 rng(seed);
        std::vector<std::uint64_t> out(count);
        for (auto& x : out) x = rng.next_u64();
        return out;
      },
      py::arg("seed"), py::arg("count"),
      "First `count` outputs of the SplitMix64 sequence for `seed`.");
  m.def("derive_seed",
        [](std::uint64_t seed, std::uint64_t tag) { return derive_seed(seed, tag); },
        py::arg("seed"), py::arg("tag"));
  m.def("derive_seed",
        [](std::uint64_t seed, std::uint64_t tag, std::uint64_t a) {
          return derive_seed(seed, tag, a);
        },
        py::arg("seed"), py::arg("tag"), py::arg("a"));
  m.def("derive_seed",
        [](std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
          return derive_seed(seed, tag, a, b);
        },
        py::arg("seed"), py::arg("tag"), py::arg("a"), py::arg("b"));

  py::dict tags;
  tags["class_sample"] = seed_tag::kClassSample;
  tags["fold_shuffle"] = seed_tag::kFoldShuffle;
  tags["synth_class"] = seed_tag::kSynthClass;
  tags["encoder_init"] = seed_tag::kEncoderInit;
  tags["head_init"] = seed_tag::kHeadInit;
  tags["epoch_shuffle"] = seed_tag::kEpochShuffle;
  tags["dropout"] = seed_tag::kDropout;
  tags["flip_view"] = seed_tag::kFlipView;
  tags["bench"] = seed_tag::kBench;
  m.attr("SEED_TAGS") = std::move(tags);

  // ---- margin schedule + learning rates --------------------------------------

  m.def(
      "margin_at_epoch",
      [](double m_init, double stride_s, double m_max, int epoch) {
        const MarginSchedule sched{m_init, stride_s, m_max};
        validate(sched);
        return margin_at_epoch(sched, epoch);
      },
      py::arg("m_init"), py::arg("stride_s"), py::arg("m_max"), py::arg("epoch"),
      "min(m_init + stride_s*(epoch-1), m_max) for a 1-based epoch.");
  m.def(
      "margin_table",
      [](double m_init, double stride_s, double m_max, int epochs) {
        const MarginSchedule sched{m_init, stride_s, m_max};
        validate(sched);
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(epochs));
        for (int e = 1; e <= epochs; ++e) out.push_back(margin_at_epoch(sched, e));
        return out;
      },
      py::arg("m_init"), py::arg("stride_s"), py::arg("m_max"), py::arg("epochs"));
  m.def(
      "cosine_lr",
      [](double lr, double eta_min, int total_epochs, int epoch) {
        return cosine_lr(lr_config(lr, 1e-3, eta_min, total_epochs), epoch);
      },
      py::arg("lr"), py::arg("eta_min"), py::arg("total_epochs"), py::arg("epoch"),
      "Cosine-annealed rate for a 1-based epoch over `total_epochs`.");
  m.def(
      "backbone_lr",
      [](double lr, double c) { return backbone_lr(lr_config(lr, c, 0.0, 1)); },
      py::arg("lr"), py::arg("c"), "Reduced backbone rate lr * c.");

  // ---- ArcFace head -----------------------------------------------------------

  m.def(
      "arcface_logits",
      [](const DoubleRows& weights, const DoubleRows& embedding, int target,
         double margin, double scale) {
        const auto logits = arcface_logits(head_from(weights, scale),
                                           vec_from(embedding, "embedding"),
                                           target, margin);
        py::array_t<double> out(logits.size());
        std::copy(logits.begin(), logits.end(), out.mutable_data());
        return out;
      },
      py::arg("weights"), py::arg("embedding"), py::arg("target"), py::arg("margin"),
      py::arg("scale") = 30.0,
      "Scaled cosine logits with the additive angular margin on `target`; "
      "`embedding` must be unit length.");
  m.def(
      "arcface_loss",
      [](const DoubleRows& weights, const DoubleRows& embedding, int target,
         double margin, double scale) {
        return arcface_loss(head_from(weights, scale),
                            vec_from(embedding, "embedding"), target, margin);
      },
      py::arg("weights"), py::arg("embedding"), py::arg("target"), py::arg("margin"),
      py::arg("scale") = 30.0);
  m.def(
      "arcface_grad",
      [](const DoubleRows& weights, const DoubleRows& raw_embedding, int target,
         double margin, double scale) {
        const ArcFaceParams params = head_from(weights, scale);
        const ArcFaceGrad g =
            arcface_grad(params, vec_from(raw_embedding, "raw_embedding"), target,
                         margin);
        py::array_t<double> d_emb(g.d_embedding.size());
        std::copy(g.d_embedding.begin(), g.d_embedding.end(), d_emb.mutable_data());
        py::array_t<double> d_w({static_cast<std::size_t>(params.class_count),
                                 static_cast<std::size_t>(params.embed_dim)});
        std::copy(g.d_weights.begin(), g.d_weights.end(), d_w.mutable_data());
        return py::make_tuple(g.loss, std::move(d_emb), std::move(d_w));
      },
      py::arg("weights"), py::arg("raw_embedding"), py::arg("target"),
      py::arg("margin"), py::arg("scale") = 30.0,
      "(loss, d_raw_embedding, d_weights); the raw input is normalized inside.");

  // ---- retrieval ----------------------------------------------------------------

  m.def(
      "top_k",
      [](const FloatRows& index_vecs, const FloatRows& query_vecs, int k,
         const py::object& index_ids, const py::object& query_ids,
         bool exclude_self, int threads) {
        const VectorStore index = store_from(index_vecs, index_ids);
        const VectorStore queries = store_from(query_vecs, query_ids);
        const RetrievalResult res = top_k(index, queries, k, exclude_self, threads);
        std::vector<std::vector<std::pair<std::uint64_t, double>>> out;
        out.reserve(res.hits.size());
        for (const auto& hits : res.hits) {
          std::vector<std::pair<std::uint64_t, double>> row;
          row.reserve(hits.size());
          for (const Hit& h : hits) row.emplace_back(h.id, h.similarity);
          out.push_back(std::move(row));
        }
        return out;
      },
      py::arg("index"), py::arg("queries"), py::arg("k") = 5,
      py::arg("index_ids") = py::none(), py::arg("query_ids") = py::none(),
      py::arg("exclude_self") = false, py::arg("threads") = 0,
      "Exact inner-product top-k. Returns one [(id, similarity), ...] list per "
      "query row, ties broken by ascending id. Default ids are row numbers.");
  m.def(
      "fuse_views",
      [](const DoubleRows& views) {
        if (views.ndim() != 2) throw ArgumentError("views must be a 2-D array");
        std::vector<std::vector<double>> rows(
            static_cast<std::size_t>(views.shape(0)));
        const auto dim = static_cast<std::size_t>(views.shape(1));
        for (std::size_t r = 0; r < rows.size(); ++r)
          rows[r].assign(views.data() + r * dim, views.data() + (r + 1) * dim);
        const auto fused = fuse_views(rows);
        py::array_t<double> out(fused.size());
        std::copy(fused.begin(), fused.end(), out.mutable_data());
        return out;
      },
      py::arg("views"), "Renormalized mean of unit-length view embeddings.");

  // ---- metric ---------------------------------------------------------------------

  m.def(
      "p_at_5",
      [](const std::vector<std::uint64_t>& predictions,
         const std::vector<std::uint64_t>& relevant, const std::string& convention) {
        const std::unordered_set<std::uint64_t> rel(relevant.begin(), relevant.end());
        return p_at_5_single(predictions, rel, convention_from(convention));
      },
      py::arg("predictions"), py::arg("relevant"),
      py::arg("convention") = "truncated",
      "Precision@5 for one query; ranks truncated to min(n_q, 5).");
  m.def(
      "mp_at_5",
      [](const std::map<std::uint64_t, std::vector<std::uint64_t>>& predictions,
         const std::map<std::uint64_t, std::vector<std::uint64_t>>& relevant,
         const std::string& convention) {
        RetrievalResult results;
        for (const auto& [qid, preds] : predictions) {
          results.query_ids.push_back(qid);
          std::vector<Hit> hits;
          hits.reserve(preds.size());
          for (std::size_t r = 0; r < preds.size(); ++r)
            hits.push_back({preds[r], 1.0 - 0.001 * static_cast<double>(r)});
          results.hits.push_back(std::move(hits));
        }
        GroundTruth truth;
        for (const auto& [qid, rel] : relevant)
          truth.relevant[qid] =
              std::unordered_set<std::uint64_t>(rel.begin(), rel.end());
        const MetricReport report =
            mp_at_5(results, truth, convention_from(convention));
        py::dict out;
        out["mp_at_5"] = report.mp_at_5;
        out["counted"] = report.counted;
        out["skipped"] = report.skipped;
        return out;
      },
      py::arg("predictions"), py::arg("relevant"),
      py::arg("convention") = "truncated",
      "Mean P@5 over {query_id: [predicted ids]} against {query_id: [relevant "
      "ids]}; queries with no relevant ids are skipped and tallied.");

  // ---- dataset planning --------------------------------------------------------------

  m.def(
      "synthesize",
      [](int classes, int dim_in, int samples_min, int samples_max,
         double cluster_std, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.class_count = classes;
        spec.dim_in = dim_in;
        spec.samples_min = samples_min;
        spec.samples_max = samples_max;
        spec.cluster_std = cluster_std;
        spec.seed = seed;
        const SyntheticData data = synthesize(spec);
        std::vector<std::string> labels;
        labels.reserve(data.manifest.size());
        for (const auto& rec : data.manifest) labels.push_back(rec.class_label);
        return py::make_tuple(ids_array(data.features.ids), std::move(labels),
                              rows_f32(data.features));
      },
      py::arg("classes"), py::arg("dim_in"), py::arg("samples_min"),
      py::arg("samples_max"), py::arg("cluster_std"), py::arg("seed") = 0,
      "Deterministic Gaussian clusters: (sample_ids, class_labels, features).");
  m.def(
      "plan_dataset",
      [](const std::vector<std::uint64_t>& sample_ids,
         const std::vector<std::string>& labels, int cap, int min_keep,
         int resample_floor, int k_folds, int val_fold, std::uint64_t seed) {
        if (sample_ids.size() != labels.size())
          throw ArgumentError("sample_ids and labels must have equal length");
        std::vector<ManifestRecord> records(sample_ids.size());
        for (std::size_t i = 0; i < records.size(); ++i)
          records[i] = {sample_ids[i], labels[i], ""};
        DatasetPlan plan =
            plan_classes(records, cap, min_keep, resample_floor, seed);
        plan = assign_folds(std::move(plan), k_folds, val_fold, seed);
        return plan_rows(plan);
      },
      py::arg("sample_ids"), py::arg("labels"), py::arg("cap") = 100,
      py::arg("min_keep") = 3, py::arg("resample_floor") = 20,
      py::arg("k_folds") = 20, py::arg("val_fold") = 0, py::arg("seed") = 0,
      "Class-balanced plan rows with the stratified K-fold split applied.");
  m.def(
      "write_plan",
      [](const std::string& path, const py::sequence& plan) {
        write_plan(plan_from(plan), path);
      },
      py::arg("path"), py::arg("plan"),
      "Write plan rows (as returned by plan_dataset) to a plan CSV.");
  m.def(
      "read_plan",
      [](const std::string& path) { return plan_rows(read_plan(path)); },
      py::arg("path"), "Read a plan CSV back into plan rows.");

  // ---- stores -------------------------------------------------------------------------

  m.def(
      "write_store",
      [](const std::string& path, const FloatRows& vecs, const py::object& ids) {
        write_store(store_from(vecs, ids), path);
      },
      py::arg("path"), py::arg("vectors"), py::arg("ids") = py::none(),
      "Write an EMB1 unit-embedding store (dim <= 64).");
  m.def(
      "read_store",
      [](const std::string& path) {
        const VectorStore store = read_store(path);
        return py::make_tuple(ids_array(store.ids), rows_f32(store));
      },
      py::arg("path"), "Read an EMB1 store: (ids, vectors).");
  m.def(
      "write_features",
      [](const std::string& path, const FloatRows& vecs, const py::object& ids) {
        write_features(store_from(vecs, ids), path);
      },
      py::arg("path"), py::arg("vectors"), py::arg("ids") = py::none(),
      "Write an FTR1 raw-feature store.");
  m.def(
      "read_features",
      [](const std::string& path) {
        const VectorStore store = read_features(path);
        return py::make_tuple(ids_array(store.ids), rows_f32(store));
      },
      py::arg("path"), "Read an FTR1 store: (ids, vectors).");

  // ---- training + inference --------------------------------------------------------------

  m.def(
      "train",
      [](const std::string& plan_csv, const std::string& features_path,
         const std::vector<std::pair<int, bool>>& phases, double margin_init,
         double margin_stride, double margin_max, double lr, double c,
         double weight_decay, double eta_min, int batch, std::uint64_t seed,
         const std::vector<int>& hidden, int embed_dim, double dropout,
         bool with_projection, int projection_width, double head_scale,
         bool cosine_restart_per_phase, const std::string& out_ckpt,
         const std::string& out_report) {
        const DatasetPlan plan = read_plan(plan_csv);
        const VectorStore features = read_features(features_path);

        PhasePlan phase_plan;
        for (const auto& [epochs, frozen] : phases)
          phase_plan.phases.push_back({epochs, frozen});
        validate(phase_plan);

        const MarginSchedule sched{margin_init, margin_stride, margin_max};
        StratifiedLrConfig opt;
        opt.lr = lr;
        opt.c = c;
        opt.weight_decay = weight_decay;
        opt.eta_min = eta_min;
        opt.total_epochs = phase_plan.total_epochs();

        EncoderConfig enc;
        enc.dim_in = static_cast<int>(features.dim);
        enc.backbone_widths = hidden;
        enc.with_projection = with_projection;
        enc.projection_width =
            with_projection ? (projection_width > 0 ? projection_width : embed_dim)
                            : 0;
        enc.embed_dim = embed_dim;
        enc.dropout_rate = dropout;
        enc.seed = seed;

        TrainOptions options;
        options.batch_size = batch;
        options.seed = seed;
        options.head_scale = head_scale;
        options.cosine_restart_per_phase = cosine_restart_per_phase;

        TrainOutput out = train_run(plan, features, enc, sched, opt, phase_plan,
                                    options);
        if (!out_ckpt.empty()) {
          Checkpoint ckpt{std::move(out.encoder), std::move(out.head),
                          std::move(out.moments)};
          write_checkpoint(ckpt, out_ckpt);
        }
        if (!out_report.empty()) write_train_report(out.report, out_report);
        return report_rows(out.report);
      },
      py::arg("plan"), py::arg("features"),
      py::arg("phases") = std::vector<std::pair<int, bool>>{{2, false}, {1, true}},
      py::arg("margin_init") = 0.1, py::arg("margin_stride") = 0.1,
      py::arg("margin_max") = 0.5, py::arg("lr") = 1e-4, py::arg("c") = 1e-3,
      py::arg("weight_decay") = 1e-2, py::arg("eta_min") = 0.0,
      py::arg("batch") = 64, py::arg("seed") = 0,
      py::arg("hidden") = std::vector<int>{64, 64}, py::arg("embed_dim") = 64,
      py::arg("dropout") = 0.2, py::arg("with_projection") = false,
      py::arg("projection_width") = 0, py::arg("head_scale") = 30.0,
      py::arg("cosine_restart_per_phase") = false, py::arg("out_ckpt") = "",
      py::arg("out_report") = "",
      "Run the fine-tuning protocol over a plan CSV + FTR1 features. Phases are "
      "(epochs, frozen_backbone) pairs. Returns one dict per epoch.");
  m.def(
      "encode",
      [](const std::string& ckpt_path, const FloatRows& vecs) {
        const Checkpoint ckpt = read_checkpoint(ckpt_path);
        if (vecs.ndim() != 2) throw ArgumentError("vectors must be a 2-D array");
        if (static_cast<int>(vecs.shape(1)) != ckpt.encoder.config.dim_in)
          throw ArgumentError("feature dim " + std::to_string(vecs.shape(1)) +
                              " does not match checkpoint dim_in " +
                              std::to_string(ckpt.encoder.config.dim_in));
        const auto rows = static_cast<std::size_t>(vecs.shape(0));
        const auto dim = static_cast<std::size_t>(vecs.shape(1));
        const auto embed = static_cast<std::size_t>(ckpt.encoder.config.embed_dim);
        py::array_t<double> out({rows, embed});
        std::vector<double> x(dim);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t d = 0; d < dim; ++d) x[d] = vecs.data()[r * dim + d];
          const auto y = encoder_forward(ckpt.encoder, x, RunMode::kEval, 0);
          std::copy(y.begin(), y.end(), out.mutable_data() + r * embed);
        }
        return out;
      },
      py::arg("checkpoint"), py::arg("vectors"),
      "Eval-mode unit embeddings for feature rows, using a trained checkpoint.");
}
