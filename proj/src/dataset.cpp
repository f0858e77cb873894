#include "embkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "embkit/csv.hpp"
#include "embkit/errors.hpp"
#include "embkit/rng.hpp"

namespace embkit {

namespace {

constexpr char kManifestHeader[] = "sample_id,class_label,payload_ref";
constexpr char kPlanHeader[] = "sample_id,class_index,fold,split,multiplicity";

bool is_safe_payload_ref(const std::string& s) {
  for (char ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') return false;
  }
  return true;
}

void reject_duplicate_ids(const std::vector<ManifestRecord>& records) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(records.size());
  for (const auto& rec : records) {
    if (!seen.insert(rec.sample_id).second)
      throw ValidationError("duplicate sample_id " + std::to_string(rec.sample_id));
  }
}

}  // namespace

const char* split_name(Split s) {
  return s == Split::kTrain ? "train" : "validation";
}

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kManifestHeader)
    throw ParseError(path.string() + ": line 1: expected header '" +
                     kManifestHeader + "'");

  std::vector<ManifestRecord> records;
  records.reserve(lines.size() - 1);
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                       std::to_string(fields.size()));
    ManifestRecord rec;
    rec.sample_id = parse_u64_field(fields[0], "sample_id", line_no);
    rec.class_label = fields[1];
    rec.payload_ref = fields[2];
    if (!is_safe_label(rec.class_label))
      throw ParseError("line " + std::to_string(line_no) +
                       ": class_label must be non-empty [A-Za-z0-9_-], got '" +
                       rec.class_label + "'");
    if (!seen.insert(rec.sample_id).second)
      throw ValidationError("duplicate sample_id " + std::to_string(rec.sample_id) +
                            " (line " + std::to_string(line_no) + ")");
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::vector<ManifestRecord>& records,
                    const std::filesystem::path& path) {
  for (const auto& rec : records) {
    if (!is_safe_label(rec.class_label))
      throw ValidationError("class_label '" + rec.class_label +
                            "' not writable without quoting");
    if (!is_safe_payload_ref(rec.payload_ref))
      throw ValidationError("payload_ref contains a delimiter");
  }
  reject_duplicate_ids(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& rec : records)
    out << rec.sample_id << ',' << rec.class_label << ',' << rec.payload_ref << '\n';
}

DatasetPlan plan_classes(const std::vector<ManifestRecord>& records, int cap,
                         int min_keep, int resample_floor, std::uint64_t seed) {
  if (!(cap >= resample_floor && resample_floor >= min_keep && min_keep >= 1))
    throw ArgumentError("plan_classes requires cap >= resample_floor >= min_keep >= 1");
  reject_duplicate_ids(records);

  // std::map keeps labels sorted, which fixes the dense class_index order.
  std::map<std::string, std::vector<std::uint64_t>> by_label;
  for (const auto& rec : records) by_label[rec.class_label].push_back(rec.sample_id);

  DatasetPlan plan;
  plan.seed = seed;
  int class_index = 0;
  for (auto& [label, ids] : by_label) {
    const int n = static_cast<int>(ids.size());
    if (n < min_keep) continue;

    std::sort(ids.begin(), ids.end());
    SplitMix64 rng(derive_seed(seed, seed_tag::kClassSample,
                               static_cast<std::uint64_t>(class_index)));

    std::vector<std::uint64_t> kept;
    std::unordered_map<std::uint64_t, int> multiplicity;
    if (n > cap) {
      // Uniform without replacement: shuffle, take the first `cap`.
      std::vector<std::uint64_t> pool = ids;
      rng.shuffle(pool);
      kept.assign(pool.begin(), pool.begin() + cap);
      std::sort(kept.begin(), kept.end());
      for (auto id : kept) multiplicity[id] = 1;
    } else {
      kept = ids;
      for (auto id : kept) multiplicity[id] = 1;
      // Light resampling with replacement up to the floor.
      for (int total = n; total < resample_floor; ++total) {
        const auto pick = kept[static_cast<std::size_t>(
            rng.bounded(static_cast<std::uint64_t>(n)))];
        ++multiplicity[pick];
      }
    }

    for (auto id : kept) {
      PlanEntry entry;
      entry.sample_id = id;
      entry.class_index = class_index;
      entry.fold = kFoldUnassigned;
      entry.split = Split::kTrain;
      entry.multiplicity = multiplicity[id];
      plan.entries.push_back(entry);
    }
    ++class_index;
  }

  plan.class_count = class_index;
  if (plan.class_count == 0)
    throw ValidationError("empty plan: every class was dropped (fewer than " +
                          std::to_string(min_keep) + " records each)");
  return plan;
}

DatasetPlan assign_folds(DatasetPlan plan, int k_folds, int validation_fold,
                         std::uint64_t seed) {
  if (k_folds < 2) throw ArgumentError("assign_folds requires K >= 2");
  if (validation_fold < 0 || validation_fold >= k_folds)
    throw ArgumentError("validation_fold " + std::to_string(validation_fold) +
                        " outside [0, " + std::to_string(k_folds) + ")");

  // Group entry indices per class; ids within a class are distinct by
  // construction of plan_classes.
  std::vector<std::vector<std::size_t>> per_class(
      static_cast<std::size_t>(plan.class_count));
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const int ci = plan.entries[i].class_index;
    if (ci < 0 || ci >= plan.class_count)
      throw ValidationError("plan entry has class_index outside [0, class_count)");
    per_class[static_cast<std::size_t>(ci)].push_back(i);
  }

  for (int ci = 0; ci < plan.class_count; ++ci) {
    auto& indices = per_class[static_cast<std::size_t>(ci)];
    std::sort(indices.begin(), indices.end(),
              [&](std::size_t a, std::size_t b) {
                return plan.entries[a].sample_id < plan.entries[b].sample_id;
              });
    SplitMix64 rng(derive_seed(seed, seed_tag::kFoldShuffle,
                               static_cast<std::uint64_t>(ci)));
    rng.shuffle(indices);
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
      PlanEntry& entry = plan.entries[indices[pos]];
      entry.fold = static_cast<int>(pos % static_cast<std::size_t>(k_folds));
      if (entry.fold == validation_fold) {
        entry.split = Split::kValidation;
        entry.multiplicity = 1;  // resampled duplicates never enter validation
      } else {
        entry.split = Split::kTrain;
      }
    }
  }
  return plan;
}

SyntheticData synthesize(const SyntheticSpec& spec) {
  if (spec.class_count < 2) throw ConfigError("synthesize: class_count must be >= 2");
  if (spec.dim_in < 1) throw ConfigError("synthesize: dim_in must be >= 1");
  if (spec.samples_min < 1 || spec.samples_max < spec.samples_min)
    throw ConfigError("synthesize: need 1 <= samples_min <= samples_max");
  if (!(spec.cluster_std >= 0.0) || !std::isfinite(spec.cluster_std))
    throw ConfigError("synthesize: cluster_std must be finite and >= 0");

  SyntheticData out;
  out.features.dim = static_cast<std::uint32_t>(spec.dim_in);

  int label_width = 1;
  for (int c = spec.class_count - 1; c >= 10; c /= 10) ++label_width;

  std::uint64_t next_id = 0;
  for (int c = 0; c < spec.class_count; ++c) {
    SplitMix64 rng(derive_seed(spec.seed, seed_tag::kSynthClass,
                               static_cast<std::uint64_t>(c)));
    // Class center: normalized Gaussian draw on the unit sphere.
    std::vector<double> center(static_cast<std::size_t>(spec.dim_in));
    double norm2 = 0.0;
    for (auto& x : center) {
      x = rng.normal();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& x : center) x *= inv;

    const int count =
        spec.samples_min +
        static_cast<int>(rng.bounded(
            static_cast<std::uint64_t>(spec.samples_max - spec.samples_min + 1)));

    std::string label = "class_" + std::to_string(c);
    const std::size_t digits = std::to_string(c).size();
    label.insert(6, static_cast<std::size_t>(label_width) - digits, '0');

    std::vector<float> row(static_cast<std::size_t>(spec.dim_in));
    for (int s = 0; s < count; ++s) {
      for (std::size_t d = 0; d < row.size(); ++d)
        row[d] = static_cast<float>(center[d] + spec.cluster_std * rng.normal());
      out.features.push(next_id, row);
      out.manifest.push_back(
          {next_id, label, "vec_" + std::to_string(next_id)});
      ++next_id;
    }
  }
  return out;
}

void write_plan(const DatasetPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for write: " + path.string());
  out << kPlanHeader << '\n';
  for (const auto& e : plan.entries) {
    out << e.sample_id << ',' << e.class_index << ',' << e.fold << ','
        << split_name(e.split) << ',' << e.multiplicity << '\n';
  }
}

DatasetPlan read_plan(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kPlanHeader)
    throw ParseError(path.string() + ": line 1: expected header '" + kPlanHeader +
                     "'");
  DatasetPlan plan;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 5)
      throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                       std::to_string(fields.size()));
    PlanEntry e;
    e.sample_id = parse_u64_field(fields[0], "sample_id", line_no);
    e.class_index =
        static_cast<int>(parse_i64_field(fields[1], "class_index", line_no));
    e.fold = static_cast<int>(parse_i64_field(fields[2], "fold", line_no));
    if (fields[3] == "train") {
      e.split = Split::kTrain;
    } else if (fields[3] == "validation") {
      e.split = Split::kValidation;
    } else {
      throw ParseError("line " + std::to_string(line_no) + ": unknown split token '" +
                       fields[3] + "'");
    }
    e.multiplicity =
        static_cast<int>(parse_i64_field(fields[4], "multiplicity", line_no));
    if (e.class_index < 0)
      throw ParseError("line " + std::to_string(line_no) + ": negative class_index");
    if (e.fold < kFoldUnassigned)
      throw ParseError("line " + std::to_string(line_no) + ": bad fold");
    if (e.multiplicity < 1)
      throw ParseError("line " + std::to_string(line_no) + ": multiplicity must be >= 1");
    plan.class_count = std::max(plan.class_count, e.class_index + 1);
    plan.entries.push_back(e);
  }
  return plan;
}

}  // namespace embkit
