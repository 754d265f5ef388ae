#include "covuln/synthesis.hpp"

#include <algorithm>
#include <fstream>

#include "covuln/digest.hpp"

namespace covuln {
namespace {

std::string single_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r' || s[i] == '\n') {
      if (s[i] == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string missing_message(const std::vector<SampleId>& missing) {
  std::string msg = "assessment store does not cover " + std::to_string(missing.size()) +
                    " sample(s) of the split; run assess over all three parts first. Missing ids:";
  for (auto id : missing) msg += " " + std::to_string(id);
  return msg;
}

}  // namespace

std::string marker_line(const ParsedReply& final_reply, MarkerOptions options) {
  std::string line(kMarkerPrefix);
  const bool vulnerable = final_reply.verdict == Verdict::Vulnerable;
  const auto description = vulnerable && final_reply.description
                               ? single_line(*final_reply.description)
                               : std::string();
  if (options.include_verdict) {
    line += " ";
    line += vulnerable ? kMarkerYes : kMarkerNo;
    if (!description.empty()) {
      line += kMarkerSeparator;
      line += description;
    }
  } else if (!description.empty()) {
    line += " " + description;
  }
  return line;
}

EnrichedSample enrich(const CodeSample& sample, const Assessment& assessment,
                      MarkerOptions options) {
  if (assessment.id != sample.id) {
    throw ContractError("enrich: assessment " + std::to_string(assessment.id) +
                        " does not belong to sample " + std::to_string(sample.id));
  }
  if (assessment.status != AssessmentStatus::Complete) {
    throw ContractError("enrich: assessment for sample " + std::to_string(sample.id) +
                        " is incomplete");
  }
  EnrichedSample e;
  e.id = sample.id;
  e.text = sample.code + "\n" + marker_line(assessment.llm_final, options);
  e.label = sample.label;
  e.provenance = json_digest(to_json(assessment));
  e.unknown_verdict = assessment.llm_final.unknown();
  return e;
}

EnrichedSample enrich(const CodeSample& sample, const AssessmentStore& store,
                      MarkerOptions options) {
  const auto a = store.find(sample.id);
  if (!a) throw CoverageError({sample.id});
  return enrich(sample, *a, options);
}

CoverageError::CoverageError(std::vector<SampleId> missing)
    : Error(missing_message(missing)), missing_(std::move(missing)) {}

std::vector<SampleId> missing_assessments(const SplitCorpus& split, const AssessmentStore& store) {
  std::vector<SampleId> missing;
  for (auto part : kAllParts) {
    for (const auto& s : split.part(part)) {
      if (!store.contains(s.id)) missing.push_back(s.id);
    }
  }
  std::sort(missing.begin(), missing.end());
  return missing;
}

ExportSummary export_training_set(const SplitCorpus& split, const AssessmentStore& store,
                                  const std::filesystem::path& out_dir, MarkerOptions options) {
  if (auto missing = missing_assessments(split, store); !missing.empty()) {
    throw CoverageError(std::move(missing));
  }
  std::filesystem::create_directories(out_dir);
  ExportSummary summary;
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    const auto part = kAllParts[p];
    summary.files[p] = out_dir / (std::string(to_string(part)) + ".jsonl");
    std::ofstream out(summary.files[p], std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + summary.files[p].string() + "'");
    for (const auto& s : split.part(part)) {
      const auto e = enrich(s, store, options);
      out << canonical_json({{"idx", e.id}, {"text", e.text}, {"target", to_canonical(*e.label)}})
          << '\n';
      ++summary.records[p];
    }
  }
  return summary;
}

std::vector<EnrichedSample> read_enriched(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<EnrichedSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EnrichedSample e;
      e.id = j.at("idx").get<SampleId>();
      e.text = j.at("text").get<std::string>();
      if (j.contains("target") && !j.at("target").is_null()) {
        e.label = from_canonical(j.at("target").get<std::int64_t>());
        if (!e.label) throw DataError("non-binary target");
      }
      out.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace covuln
