#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "covuln/assessment.hpp"
#include "covuln/backends.hpp"
#include "covuln/corpus.hpp"
#include "covuln/dialogue.hpp"

namespace covuln {

struct PipelineOptions {
  HintMode hint_mode = HintMode::Detector;
  PromptingVariant prompting = PromptingVariant::Plain;
  FewShotCounts fewshot;
  std::uint64_t seed = 42;
  /// Samples in flight at once; 1 runs the serial reference path.
  int concurrency = 8;
  /// Abort once failed samples exceed this fraction of the run.
  double failure_threshold = 0.05;
  /// Re-asks of an unparseable reply before recording Unknown.
  int unknown_reasks = 2;
  /// Token-bucket limit on LLM requests; <= 0 disables it.
  double llm_requests_per_second = 0.0;
  double llm_burst = 8.0;
  PromptTemplates templates = PromptTemplates::defaults();
};

struct Backends {
  DetectorBackend& detector;
  LlmBackend& llm;
};

struct PartStats {
  std::size_t total = 0;
  std::size_t cached = 0;     ///< already in the store before the run
  std::size_t assessed = 0;   ///< completed during this run
  std::size_t failed = 0;
  std::size_t agreements = 0;
  std::size_t disagreements = 0;
  std::size_t refinements = 0;
  std::size_t unknown = 0;    ///< Unknown initial verdicts

  PartStats& operator+=(const PartStats& o);
};

struct PipelineReport {
  std::array<PartStats, 3> parts{};
  std::size_t detector_calls = 0;
  std::size_t llm_calls = 0;
  std::vector<SampleId> failed;
  bool aborted = false;

  [[nodiscard]] PartStats totals() const;
  [[nodiscard]] const PartStats& part(SplitPart p) const noexcept {
    return parts[static_cast<std::size_t>(p)];
  }
};

/// Failure threshold exceeded. Completed assessments remain in the store.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, PipelineReport report)
      : Error(what), report_(std::move(report)) {}
  [[nodiscard]] const PipelineReport& report() const noexcept { return report_; }

 private:
  PipelineReport report_;
};

/// Token bucket shared by all workers of a run.
class RateLimiter {
 public:
  RateLimiter(double per_second, double burst);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

/// Phase I for every corpus sample not already in `store`: detector verdict
/// z and the LLM's first (c, n), the two calls running concurrently. Failed
/// samples come back with status Failed. Nothing is written to the store.
std::vector<Assessment> run_phase1(const Corpus& corpus, Backends backends,
                                   const AssessmentStore& store, const PipelineOptions& options,
                                   std::span<const CodeSample> exemplar_pool = {});

/// Phase II, at most one exchange:
///   Detector  - only when c != z (Unknown never triggers), hint = z
///   None      - never
///   AlwaysYes / AlwaysNo - every sample, fixed hint
/// LLM failure yields status RefinementFailed with the initial reply kept.
Assessment refine(Assessment assessment, LlmBackend& llm, const PipelineOptions& options);

/// Phase I + II over train, valid and test. Every requested part list other
/// than all three is rejected, so the validator never sees text produced by a
/// different process than the test data. Completed samples are appended to
/// the store as they finish; the store is compacted when the run ends.
PipelineReport run_pipeline(const SplitCorpus& split, Backends backends, AssessmentStore& store,
                            const PipelineOptions& options,
                            std::span<const SplitPart> parts = kAllParts);

/// Both phases for one probe sample (inference path).
Assessment assess_one(const CodeSample& sample, Backends backends, const PipelineOptions& options,
                      std::span<const CodeSample> exemplar_pool = {});

}  // namespace covuln
