#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "covuln/backends.hpp"

namespace covuln {

/// "http://host:8080/predict" -> {"http://host:8080", "/predict"}.
struct Url {
  std::string origin;
  std::string path;
};
Url parse_url(std::string_view url);

// Detector wire contract:
//   POST {"id": int, "code": string} -> {"verdict": "vulnerable"|"clean", "score": float}
nlohmann::json detector_request(const CodeSample& sample);
/// Verdict is recomputed from the score with `threshold`; the server's
/// verdict word must still be one of the two contract values.
DetectorReply parse_detector_reply(std::string_view body,
                                   double threshold = kDefaultDecisionThreshold);

// LLM wire contract (chat-completions shape):
//   {"model", "messages": [{"role","content"}...], "temperature", "max_tokens"}
//   reply: choices[0].message.content
nlohmann::json chat_request(const std::string& model, const Transcript& transcript,
                            double temperature, int max_tokens);
std::string parse_chat_reply(std::string_view body);

/// Maps an HTTP status to the error taxonomy: 2xx returns, 408/429/5xx
/// throw TransientError, anything else throws ProtocolError.
void check_http_status(int status, std::string_view body);

struct HttpDetectorOptions {
  std::string url;
  std::chrono::milliseconds timeout{60'000};
  RetryPolicy retry;
  double threshold = kDefaultDecisionThreshold;
  RetryObserver on_retry;
};

class HttpDetector final : public DetectorBackend {
 public:
  explicit HttpDetector(HttpDetectorOptions options);
  [[nodiscard]] std::string identity() const override;

 protected:
  DetectorReply predict_impl(const CodeSample& sample) override;

 private:
  HttpDetectorOptions options_;
  Url url_;
};

struct HttpLlmOptions {
  std::string url;
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 512;
  std::chrono::milliseconds timeout{120'000};
  RetryPolicy retry;
  /// Bearer token source. Never read from config files.
  std::string api_key_env = "COVULN_LLM_API_KEY";
  RetryObserver on_retry;
};

class HttpLlm final : public LlmBackend {
 public:
  explicit HttpLlm(HttpLlmOptions options);
  [[nodiscard]] std::string identity() const override;

 protected:
  std::string chat_impl(const Transcript& transcript, const CallContext& ctx) override;

 private:
  HttpLlmOptions options_;
  Url url_;
};

/// One line of the detector wire-contract conformance suite.
struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exercises a running detector server: well-formed reply with a verdict
/// consistent with its score at 0.5, deterministic repeats, protocol errors
/// (4xx) for empty code and malformed bodies, and liveness afterwards.
std::vector<ConformanceCheck> check_detector_contract(
    const std::string& url, std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace covuln
