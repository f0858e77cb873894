#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embkit/dataset.hpp"
#include "embkit/encoder.hpp"
#include "embkit/margin.hpp"
#include "embkit/optim.hpp"
#include "embkit/vecstore.hpp"

namespace embkit {

struct Phase {
  int epochs = 1;
  bool frozen_backbone = false;
};

struct PhasePlan {
  std::vector<Phase> phases;

  int total_epochs() const;
};

void validate(const PhasePlan& plan);

struct EpochRow {
  int epoch = 0;
  double mean_loss = 0.0;
  double margin = 0.0;
  double lr_head = 0.0;
  double lr_backbone = 0.0;
  double val_mp5 = 0.0;
  int val_skipped = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRow> rows;
};

struct TrainOptions {
  int batch_size = 64;
  std::uint64_t seed = 0;
  double head_scale = 30.0;
  // When set, the cosine schedule restarts at the start of every phase
  // (phase length as its horizon) instead of spanning the whole run.
  bool cosine_restart_per_phase = false;
};

struct TrainOutput {
  EncoderState encoder;
  ArcFaceParams head;
  AdamWMoments moments;
  TrainReport report;
};

// Runs the full protocol: phases in order with a global 1-based epoch index
// feeding the margin schedule, seeded shuffles over train entries expanded
// by multiplicity, per-batch AdamW updates with stratified group rates, and
// validation mP@5 after every epoch. Frozen phases leave backbone and
// projection parameters (and their moments) bit-identical. The cosine
// horizon comes from the phase plan (opt.total_epochs is ignored here).
TrainOutput train_run(const DatasetPlan& plan, const VectorStore& features,
                      const EncoderConfig& encoder_config,
                      const MarginSchedule& sched, const StratifiedLrConfig& opt,
                      const PhasePlan& phases, const TrainOptions& options);

struct ValidationScore {
  double mp_at_5 = 0.0;
  int skipped = 0;  // queries excluded for n_q = 0
  int queries = 0;
};

// Embeds every validation entry in eval mode and retrieves each against all
// others (self excluded); relevance = same class_index. Requires at least
// one validation entry spanning at least two classes.
ValidationScore validate_encoder(const EncoderState& state, const DatasetPlan& plan,
                                 const VectorStore& features, int k = 5);

// Report CSV: `epoch,loss,margin,lr_head,lr_backbone,val_mp5,seconds`.
void write_train_report(const TrainReport& report, const std::filesystem::path& path);
TrainReport read_train_report(const std::filesystem::path& path);

}  // namespace embkit
