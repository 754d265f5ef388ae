#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "covuln/backends.hpp"
#include "covuln/collab.hpp"
#include "covuln/corpus.hpp"
#include "covuln/synthesis.hpp"

namespace covuln {

/// Minimum metrics a scored run must reach; unset entries are not checked.
struct AcceptanceThresholds {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// Every run-level knob. Serialized as one flat JSON object; the file form
/// and command-line flags share key names (flags use dashes).
struct RunConfig {
  std::string data;
  Polarity polarity = Polarity::OneIsVulnerable;
  SplitRatios ratios;
  std::uint64_t seed = 42;
  std::string manifest = "split.json";

  /// Backend specs: http(s)://..., scripted:<path>, statistical:tpr=..,fpr=..,seed=..,
  /// and (validator only) marker.
  std::string detector;
  std::string llm;
  std::string validator;
  std::string llm_model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 512;
  double threshold = kDefaultDecisionThreshold;
  int timeout_ms = 120'000;

  HintMode hint_mode = HintMode::Detector;
  PromptingVariant prompting = PromptingVariant::Plain;
  FewShotCounts fewshot;
  int concurrency = 8;
  int retries = 3;  ///< total attempts per request
  int backoff_ms = 500;
  double failure_threshold = 0.05;
  int unknown_reasks = 2;
  double llm_rps = 0.0;

  std::string store = "assessments.jsonl";
  std::string templates;  ///< empty = built-in v1
  std::string cache;      ///< optional response cache file
  std::string export_dir = "export";
  bool marker_verdict_token = true;
  int tail_budget = 256;

  std::string trainer_command = "covuln-train";
  std::string encoder = "microsoft/unixcoder-base";
  std::string checkpoint = "checkpoint";
  int epochs = 4;
  double lr = 2e-5;
  int batch_size = 12;
  int max_length = 1024;

  AcceptanceThresholds acceptance;
  /// When set, each command appends a digest record of its inputs/outputs.
  std::string run_manifest;
};

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are a ContractError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
/// SHA-256 of the canonical JSON form; independent of key order in the file.
std::string config_digest(const RunConfig& config);

PipelineOptions pipeline_options(const RunConfig& config);
RetryPolicy retry_policy(const RunConfig& config);
MarkerOptions marker_options(const RunConfig& config);

/// Store header config: only the settings that change what an assessment
/// contains, with backends named by identity.
nlohmann::json assessment_config(const RunConfig& config, const DetectorBackend& detector,
                                 const LlmBackend& llm, const std::string& dataset_digest);

/// Builds a detector from a spec string. `truths` feeds statistical mocks.
std::unique_ptr<DetectorBackend> make_detector(
    const std::string& spec, const RunConfig& config,
    const std::unordered_map<SampleId, Verdict>& truths = {});
std::unique_ptr<LlmBackend> make_llm(const std::string& spec, const RunConfig& config);

}  // namespace covuln
