#include "covuln/ablation.hpp"

#include <set>

#include <spdlog/spdlog.h>

#include "covuln/parallel.hpp"

namespace covuln {
namespace {

Verdict or_clean(const std::optional<Verdict>& v) { return v.value_or(Verdict::Clean); }

}  // namespace

std::string_view to_string(Scorer s) noexcept {
  switch (s) {
    case Scorer::LlmInitial: return "llm_initial";
    case Scorer::LlmFinal: return "llm_final";
    case Scorer::Detector: return "detector";
    case Scorer::Validator: return "validator";
  }
  return "?";
}

Scorer parse_scorer(std::string_view text) {
  if (text == "llm_initial") return Scorer::LlmInitial;
  if (text == "llm_final") return Scorer::LlmFinal;
  if (text == "detector") return Scorer::Detector;
  if (text == "validator") return Scorer::Validator;
  throw ContractError("unknown scorer '" + std::string(text) +
                      "' (expected llm_initial, llm_final, detector or validator)");
}

PredictionMap truths_of(const Corpus& samples) {
  PredictionMap out;
  for (const auto& s : samples) out.emplace(s.id, s.label);
  return out;
}

PredictionMap predictions_from_store(const Corpus& samples, const AssessmentStore& store,
                                     Scorer scorer) {
  if (scorer == Scorer::Validator) {
    throw ContractError("validator scoring needs a validator backend");
  }
  PredictionMap out;
  std::vector<SampleId> missing;
  for (const auto& s : samples) {
    const auto a = store.find(s.id);
    if (!a) {
      missing.push_back(s.id);
      continue;
    }
    switch (scorer) {
      case Scorer::LlmInitial: out.emplace(s.id, or_clean(a->llm_initial.verdict)); break;
      case Scorer::LlmFinal: out.emplace(s.id, or_clean(a->llm_final.verdict)); break;
      default: out.emplace(s.id, a->detector.verdict); break;
    }
  }
  if (!missing.empty()) throw CoverageError(std::move(missing));
  return out;
}

PredictionMap validator_predictions(const Corpus& samples, const AssessmentStore& store,
                                    DetectorBackend& validator, MarkerOptions marker,
                                    int concurrency) {
  if (auto missing = [&] {
        std::vector<SampleId> m;
        for (const auto& s : samples) {
          if (!store.contains(s.id)) m.push_back(s.id);
        }
        return m;
      }();
      !missing.empty()) {
    throw CoverageError(std::move(missing));
  }
  const auto items = samples.samples();
  std::vector<Verdict> verdicts(items.size());
  std::vector<std::string> errors(items.size());
  for_each_index(items.size(), concurrency, [&](std::size_t i) {
    try {
      const auto e = enrich(items[i], store, marker);
      // The label field of the probe is never sent over the wire.
      verdicts[i] = validator.predict({e.id, e.text, Verdict::Clean}).verdict;
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  PredictionMap out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error("validator failed on sample " + std::to_string(items[i].id) + ": " + errors[i]);
    }
    out.emplace(items[i].id, verdicts[i]);
  }
  return out;
}

std::vector<AblationResult> run_ablation(std::span<const AblationRow> rows,
                                         const SplitCorpus& split, ResponseCache& cache) {
  std::set<std::string> names;
  for (const auto& r : rows) {
    if (!names.insert(r.name).second) throw ContractError("duplicate ablation row '" + r.name + "'");
  }
  std::vector<AblationResult> out;
  for (const auto& row : rows) {
    AblationResult result;
    result.row.name = row.name;
    auto skip = [&](std::string why) {
      spdlog::warn("ablation row '{}' skipped: {}", row.name, why);
      result.row.skipped = true;
      result.row.note = std::move(why);
      out.push_back(std::move(result));
    };
    if (!row.detector || !row.llm) {
      skip("missing detector or llm backend");
      continue;
    }
    if (row.scorer == Scorer::Validator && !row.validator) {
      skip("missing validator backend");
      continue;
    }

    CachingDetector detector(*row.detector, cache);
    CachingLlm llm(*row.llm, cache);
    AssessmentStore store(StoreManifest{{{"row", row.name}}, row.options.templates.version});
    try {
      result.pipeline = run_pipeline(split, {detector, llm}, store, row.options);
    } catch (const RunAborted& e) {
      result.pipeline = e.report();
      skip(e.what());
      continue;
    }
    const auto truths = truths_of(split.test);
    const auto preds =
        row.scorer == Scorer::Validator
            ? validator_predictions(split.test, store, *row.validator, row.marker,
                                    row.options.concurrency)
            : predictions_from_store(split.test, store, row.scorer);
    result.row.metrics = metrics(confusion(preds, truths));
    result.row.note = std::string(to_string(row.scorer));
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace covuln
