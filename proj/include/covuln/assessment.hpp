#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covuln/backends.hpp"
#include "covuln/dialogue.hpp"

namespace covuln {

/// What the Phase II prompt claims "another expert" found.
enum class HintMode {
  Detector,   ///< the detector's actual verdict, only on disagreement
  None,       ///< no refinement round
  AlwaysYes,  ///< every sample told "has vulnerabilities"
  AlwaysNo,   ///< every sample told "does not have vulnerabilities"
};

std::string_view to_string(HintMode mode) noexcept;
HintMode parse_hint_mode(std::string_view text);

enum class AssessmentStatus { Complete, Failed, RefinementFailed };

struct Phase1Exchange {
  Transcript transcript;
  std::string reply;
};

/// Per-sample record of z, (c, n) before and after refinement.
struct Assessment {
  SampleId id = 0;
  DetectorReply detector;
  ParsedReply llm_initial;
  ParsedReply llm_final;
  bool refined = false;
  HintMode hint_mode = HintMode::Detector;
  /// Digest of the last transcript sent for this sample.
  std::string prompt_hash;

  AssessmentStatus status = AssessmentStatus::Complete;
  std::string error;
  /// Needed to build the Phase II transcript; not persisted.
  std::optional<Phase1Exchange> phase1;

  [[nodiscard]] bool disagrees() const noexcept {
    return llm_initial.verdict.has_value() && *llm_initial.verdict != detector.verdict;
  }
};

/// Store line: {"idx","z","z_score","c1","n1","c2","n2","refined","hint_mode","prompt_hash"}
/// with z/c encoded 1 = Vulnerable, 0 = Clean, null = Unknown.
nlohmann::json to_json(const Assessment& a);
Assessment assessment_from_json(const nlohmann::json& j);

/// Header line recorded at the top of a store file.
struct StoreManifest {
  nlohmann::json config = nlohmann::json::object();
  std::string template_version = "v1";

  [[nodiscard]] std::string config_digest() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Thrown when an existing store was produced under a different
/// configuration or template version.
class StaleStoreError : public Error {
 public:
  using Error::Error;
};

/// Append-only id -> Assessment map, optionally persisted as JSONL. Appends
/// are serialized through one mutex (single writer) and flushed per record;
/// compact() rewrites the file in id order.
class AssessmentStore {
 public:
  explicit AssessmentStore(StoreManifest manifest);

  /// Creates `path` or loads it. Refuses a store whose header digest or
  /// template version differs from `manifest`. A torn final line (a run
  /// killed mid-write) is dropped.
  static AssessmentStore open(const std::filesystem::path& path, StoreManifest manifest);
  /// Loads without a staleness check.
  static AssessmentStore load(const std::filesystem::path& path);

  AssessmentStore(AssessmentStore&& other) noexcept;
  AssessmentStore& operator=(AssessmentStore&&) = delete;

  [[nodiscard]] bool contains(SampleId id) const;
  [[nodiscard]] std::optional<Assessment> find(SampleId id) const;
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::vector<SampleId> ids() const;
  [[nodiscard]] const StoreManifest& manifest() const noexcept { return manifest_; }
  [[nodiscard]] const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

  /// Only complete assessments are accepted; a second record for the same
  /// id is a ContractError.
  void append(const Assessment& a);

  /// Header plus one line per record in ascending id order.
  [[nodiscard]] std::string serialize() const;
  /// Atomically rewrites the backing file as serialize().
  void compact();

 private:
  StoreManifest manifest_;
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mu_;
  std::map<SampleId, Assessment> records_;
  std::ofstream out_;
};

}  // namespace covuln
