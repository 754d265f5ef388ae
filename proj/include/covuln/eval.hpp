#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covuln/types.hpp"

namespace covuln {

/// Positive class = Vulnerable.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

using PredictionMap = std::map<SampleId, Verdict>;

/// Thrown when prediction and truth key sets differ.
class KeyMismatch : public Error {
 public:
  explicit KeyMismatch(std::vector<SampleId> symmetric_difference);
  [[nodiscard]] const std::vector<SampleId>& ids() const noexcept { return ids_; }

 private:
  std::vector<SampleId> ids_;
};

// Kernels over aligned verdict arrays. The OpenMP versions and the serial
// references must agree exactly; tests and the benchmark compare them.
ConfusionCounts tally(std::span<const Verdict> predictions, std::span<const Verdict> truths);
ConfusionCounts tally_serial(std::span<const Verdict> predictions, std::span<const Verdict> truths);

/// Exact confusion counts. Throws KeyMismatch listing the symmetric
/// difference of the key sets.
ConfusionCounts confusion(const PredictionMap& predictions, const PredictionMap& truths);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  /// A zero denominator forced the metric to 0.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
  ConfusionCounts counts;
};

/// Precision TP/(TP+FP), recall TP/(TP+FN), F1 their harmonic mean,
/// accuracy (TP+TN)/total. Throws ContractError on empty counts.
MetricsReport metrics(const ConfusionCounts& counts);

/// Harmonic mean; 0 when precision + recall == 0.
double f1_score(double precision, double recall) noexcept;

struct NamedPredictions {
  std::string name;
  PredictionMap predictions;
};

/// Venn analysis of 2-3 models over the truly vulnerable samples. Regions
/// are indexed by a model bitmask (bit i = model i): region[m] counts ids
/// included by exactly the models in m. region[0] counts ids no model
/// includes and is not part of the union.
struct OverlapReport {
  std::vector<std::string> models;
  std::vector<std::set<SampleId>> correct;          ///< truth V, predicted V
  std::vector<std::set<SampleId>> false_negatives;  ///< truth V, predicted Clean
  std::vector<std::uint64_t> correct_regions;
  std::vector<std::uint64_t> fn_regions;

  [[nodiscard]] std::uint64_t correct_union() const noexcept;
  [[nodiscard]] std::uint64_t fn_union() const noexcept;
};

/// Region histograms over per-sample model masks.
std::vector<std::uint64_t> region_histogram(std::span<const std::uint8_t> masks,
                                            std::size_t models);
std::vector<std::uint64_t> region_histogram_serial(std::span<const std::uint8_t> masks,
                                                   std::size_t models);

/// Throws ContractError for fewer than 2 or more than 3 models and
/// KeyMismatch when a model's keys differ from the truths'.
OverlapReport compare_models(const std::vector<NamedPredictions>& results,
                             const PredictionMap& truths);

// ---- reports --------------------------------------------------------------

struct ReportRow {
  std::string name;
  MetricsReport metrics;
  bool skipped = false;
  std::string note;
};

/// Aligned, human-readable table.
std::string format_table(const std::vector<ReportRow>& rows);
/// One JSON object per row.
nlohmann::json to_json(const ReportRow& row);
std::string format_jsonl(const std::vector<ReportRow>& rows);

std::string format_overlap(const OverlapReport& report);
nlohmann::json to_json(const OverlapReport& report);

}  // namespace covuln
