#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "embkit/vecstore.hpp"

namespace embkit {

struct ManifestRecord {
  std::uint64_t sample_id = 0;
  std::string class_label;
  std::string payload_ref;
};

enum class Split { kTrain, kValidation };

inline constexpr int kFoldUnassigned = -1;

// One plan row per distinct (class, sample) pair. Resampling is recorded as
// a multiplicity count rather than duplicated rows, which keeps files small
// and makes validation de-duplication trivial.
struct PlanEntry {
  std::uint64_t sample_id = 0;
  int class_index = 0;
  int fold = kFoldUnassigned;
  Split split = Split::kTrain;
  int multiplicity = 1;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

struct DatasetPlan {
  std::vector<PlanEntry> entries;
  int class_count = 0;
  std::uint64_t seed = 0;  // provenance only; not part of value equality

  friend bool operator==(const DatasetPlan& a, const DatasetPlan& b) {
    return a.entries == b.entries && a.class_count == b.class_count;
  }
};

struct SyntheticSpec {
  int class_count = 2;
  int dim_in = 8;
  int samples_min = 1;
  int samples_max = 1;
  double cluster_std = 0.1;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::vector<ManifestRecord> manifest;
  VectorStore features;
};

// Manifest CSV: header `sample_id,class_label,payload_ref`, one record per
// row, order preserved. Labels are restricted to [A-Za-z0-9_-].
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& path);

// Class balancing: classes above `cap` are subsampled to exactly cap
// distinct ids (seeded, uniform without replacement); classes below
// `min_keep` are dropped; classes in [min_keep, resample_floor) keep all
// ids and draw with replacement until total multiplicity reaches
// resample_floor. Dense class indices follow sorted class_label order.
// The returned plan is pre-fold: every entry has fold = -1, split = train.
DatasetPlan plan_classes(const std::vector<ManifestRecord>& records, int cap = 100,
                         int min_keep = 3, int resample_floor = 20,
                         std::uint64_t seed = 0);

// Stratified K-fold assignment: per class, distinct sample ids are
// seeded-shuffled and dealt round-robin over folds. Ids landing in
// validation_fold become split = validation with multiplicity collapsed
// to 1; everything else is train.
DatasetPlan assign_folds(DatasetPlan plan, int k_folds = 20, int validation_fold = 0,
                         std::uint64_t seed = 0);

// Deterministic Gaussian clusters: per class a seeded unit-sphere center,
// samples = center + cluster_std * noise. Same spec -> bit-identical data.
SyntheticData synthesize(const SyntheticSpec& spec);

// Plan CSV: header `sample_id,class_index,fold,split,multiplicity`.
void write_plan(const DatasetPlan& plan, const std::filesystem::path& path);
DatasetPlan read_plan(const std::filesystem::path& path);

const char* split_name(Split s);

}  // namespace embkit
