#pragma once

#include <span>
#include <string>
#include <vector>

#include "covuln/collab.hpp"
#include "covuln/eval.hpp"
#include "covuln/response_cache.hpp"
#include "covuln/synthesis.hpp"

namespace covuln {

/// Which verdict a configuration is scored on.
enum class Scorer {
  LlmInitial,  ///< Phase I LLM verdict (Unknown counts as Clean)
  LlmFinal,    ///< LLM verdict after refinement (Unknown counts as Clean)
  Detector,    ///< detector verdict z
  Validator,   ///< validator backend on the enriched text
};

std::string_view to_string(Scorer s) noexcept;
Scorer parse_scorer(std::string_view text);

/// Predictions for `samples` read from stored assessments. Validator
/// scoring is not available here (it needs a backend).
PredictionMap predictions_from_store(const Corpus& samples, const AssessmentStore& store,
                                     Scorer scorer);

/// Queries `validator` with the enriched text of every sample.
PredictionMap validator_predictions(const Corpus& samples, const AssessmentStore& store,
                                    DetectorBackend& validator, MarkerOptions marker = {},
                                    int concurrency = 1);

PredictionMap truths_of(const Corpus& samples);

/// One configuration of the experiment matrix. Rows differ only in the
/// declared axes: hint mode, prompting variant, backend pair, scorer.
struct AblationRow {
  std::string name;
  PipelineOptions options;
  DetectorBackend* detector = nullptr;
  LlmBackend* llm = nullptr;
  DetectorBackend* validator = nullptr;
  Scorer scorer = Scorer::LlmFinal;
  MarkerOptions marker;
};

struct AblationResult {
  ReportRow row;
  PipelineReport pipeline;
};

/// Runs every row over the whole split and scores it on the test part.
/// Backend replies go through `cache`, so rows whose prompts coincide (e.g.
/// Phase I across hint modes) share calls. A row with a missing backend, or
/// whose run aborts, is reported as skipped.
std::vector<AblationResult> run_ablation(std::span<const AblationRow> rows,
                                         const SplitCorpus& split, ResponseCache& cache);

}  // namespace covuln
