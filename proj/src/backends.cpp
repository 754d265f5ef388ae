#include "covuln/backends.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "covuln/digest.hpp"

namespace covuln {

DetectorReply make_detector_reply(double score, double threshold) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw ContractError("detector score must lie in [0, 1]");
  }
  return {score >= threshold ? Verdict::Vulnerable : Verdict::Clean, score};
}

nlohmann::json to_json(const Transcript& transcript) {
  auto arr = nlohmann::json::array();
  for (const auto& m : transcript) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

std::string transcript_digest(const Transcript& transcript) {
  return json_digest(to_json(transcript));
}

BackendUnavailable::BackendUnavailable(SampleId sample, int attempts, const std::string& last_error)
    : Error("backend unavailable for sample " + std::to_string(sample) + " after " +
            std::to_string(attempts) + " attempt(s): " + last_error),
      sample_(sample),
      attempts_(attempts) {}

std::chrono::milliseconds RetryPolicy::backoff_before(int retry) const {
  double ms = static_cast<double>(initial_backoff.count()) *
              std::pow(multiplier, static_cast<double>(std::max(0, retry - 1)));
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(std::max(0.0, ms)));
}

void log_retry(const RetryEvent& event) {
  spdlog::warn("sample {}: attempt {} failed, retrying: {}", event.sample, event.attempt,
               event.reason);
}

DetectorReply DetectorBackend::predict(const CodeSample& sample) {
  if (sample.code.empty()) {
    throw ContractError("detector_predict: sample " + std::to_string(sample.id) + " has empty code");
  }
  return predict_impl(sample);
}

std::string LlmBackend::chat(const Transcript& transcript, const CallContext& ctx) {
  if (transcript.empty()) throw ContractError("llm_chat: empty transcript");
  if (transcript.front().role != "user") {
    throw ContractError("llm_chat: transcript must open with a user message");
  }
  return chat_impl(transcript, ctx);
}

}  // namespace covuln
