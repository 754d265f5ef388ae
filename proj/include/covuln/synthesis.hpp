#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covuln/assessment.hpp"
#include "covuln/corpus.hpp"

namespace covuln {

// Marker vocabulary, version "m1". ASCII only.
inline constexpr std::string_view kMarkerVersion = "m1";
inline constexpr std::string_view kMarkerPrefix = "ANALYST:";
inline constexpr std::string_view kMarkerYes = "YES";
inline constexpr std::string_view kMarkerNo = "NO";
inline constexpr std::string_view kMarkerSeparator = " - ";

struct MarkerOptions {
  /// false drops the YES/NO token and keeps only the description.
  bool include_verdict = true;
};

/// Code fused with the final LLM verdict and description.
struct EnrichedSample {
  SampleId id = 0;
  std::string text;
  std::optional<Verdict> label;
  /// SHA-256 of the assessment record the text was built from.
  std::string provenance;
  /// The LLM never produced a usable verdict; rendered as NO.
  bool unknown_verdict = false;
};

/// The marker line for a final LLM reply: "ANALYST: YES - <description>",
/// "ANALYST: YES" when the description is empty, or "ANALYST: NO" for
/// Clean and Unknown.
std::string marker_line(const ParsedReply& final_reply, MarkerOptions options = {});

/// text = code + "\n" + marker line. The label is copied only so exporters
/// can write it in its own column; it never reaches `text`.
EnrichedSample enrich(const CodeSample& sample, const Assessment& assessment,
                      MarkerOptions options = {});

/// Throws CoverageError when the store has no assessment for the sample.
EnrichedSample enrich(const CodeSample& sample, const AssessmentStore& store,
                      MarkerOptions options = {});

class CoverageError : public Error {
 public:
  explicit CoverageError(std::vector<SampleId> missing);
  [[nodiscard]] const std::vector<SampleId>& missing() const noexcept { return missing_; }

 private:
  std::vector<SampleId> missing_;
};

/// Ids of the split the store does not cover, ascending.
std::vector<SampleId> missing_assessments(const SplitCorpus& split, const AssessmentStore& store);

struct ExportSummary {
  std::array<std::filesystem::path, 3> files;
  std::array<std::size_t, 3> records{};
};

/// Writes train.jsonl, valid.jsonl and test.jsonl ({"idx","text","target"},
/// target 1 = Vulnerable) into `out_dir`. Refuses (CoverageError listing every
/// missing id) unless the store covers all three parts.
ExportSummary export_training_set(const SplitCorpus& split, const AssessmentStore& store,
                                  const std::filesystem::path& out_dir,
                                  MarkerOptions options = {});

/// Reads an export file back: (idx, text, label).
std::vector<EnrichedSample> read_enriched(const std::filesystem::path& path);

}  // namespace covuln
