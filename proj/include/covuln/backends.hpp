#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "covuln/corpus.hpp"
#include "covuln/types.hpp"

namespace covuln {

inline constexpr double kDefaultDecisionThreshold = 0.5;

/// Detector output z: verdict plus confidence that the code is vulnerable.
/// verdict == Vulnerable iff score >= the decision threshold.
struct DetectorReply {
  Verdict verdict = Verdict::Clean;
  double score = 0.0;

  friend bool operator==(const DetectorReply&, const DetectorReply&) = default;
};

/// Builds a reply whose verdict is derived from `score`. Throws
/// ContractError for scores outside [0, 1].
DetectorReply make_detector_reply(double score, double threshold = kDefaultDecisionThreshold);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using Transcript = std::vector<ChatMessage>;

nlohmann::json to_json(const Transcript& transcript);
/// SHA-256 of the canonical JSON array [{"content","role"}...].
std::string transcript_digest(const Transcript& transcript);

/// Identifies one LLM request for logging, retries and cache keys.
struct CallContext {
  SampleId sample = 0;
  /// 0 for the first ask; re-asks of the same prompt count up.
  int attempt = 0;
};

// ---- errors ---------------------------------------------------------------

/// Retryable transport problem (connection refused, timeout, 429, 5xx).
class TransientError : public Error {
 public:
  using Error::Error;
};

/// The backend answered, but not in the contracted shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Retries exhausted.
class BackendUnavailable : public Error {
 public:
  BackendUnavailable(SampleId sample, int attempts, const std::string& last_error);
  [[nodiscard]] SampleId sample() const noexcept { return sample_; }
  [[nodiscard]] int attempts() const noexcept { return attempts_; }

 private:
  SampleId sample_;
  int attempts_;
};

/// A scripted mock was asked for more replies than it holds.
class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

// ---- retry ----------------------------------------------------------------

struct RetryPolicy {
  /// Total attempts including the first one.
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  [[nodiscard]] std::chrono::milliseconds backoff_before(int retry) const;
};

struct RetryEvent {
  SampleId sample = 0;
  /// 1-based number of the attempt that just failed.
  int attempt = 0;
  std::string reason;
};

using RetryObserver = std::function<void(const RetryEvent&)>;

/// Logs each retry with its sample id through spdlog.
void log_retry(const RetryEvent& event);

/// Runs `fn` up to policy.max_attempts times, retrying only on
/// TransientError. Every retry is reported to `observer` (or logged) before
/// the backoff sleep. Other exceptions propagate immediately.
template <class Fn>
auto call_with_retry(const RetryPolicy& policy, SampleId sample, Fn&& fn,
                     const RetryObserver& observer = {}) -> std::invoke_result_t<Fn&> {
  const int max_attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransientError& e) {
      if (attempt >= max_attempts) throw BackendUnavailable(sample, attempt, e.what());
      const RetryEvent event{sample, attempt, e.what()};
      if (observer) {
        observer(event);
      } else {
        log_retry(event);
      }
      std::this_thread::sleep_for(policy.backoff_before(attempt));
    }
  }
}

// ---- model roles ----------------------------------------------------------

/// f_d (or f_v when serving the validation checkpoint). Implementations must
/// be safe to call from several threads at once.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;

  /// Throws ContractError for empty code; see implementations for the rest.
  DetectorReply predict(const CodeSample& sample);

  /// Stable description used in config digests and cache keys.
  [[nodiscard]] virtual std::string identity() const = 0;

 protected:
  virtual DetectorReply predict_impl(const CodeSample& sample) = 0;
};

/// f_c. Transcripts are sent verbatim. Thread-safe.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Requires a non-empty transcript opening with a user message.
  std::string chat(const Transcript& transcript, const CallContext& ctx);

  [[nodiscard]] virtual std::string identity() const = 0;

 protected:
  virtual std::string chat_impl(const Transcript& transcript, const CallContext& ctx) = 0;
};

inline DetectorReply detector_predict(DetectorBackend& backend, const CodeSample& sample) {
  return backend.predict(sample);
}

inline std::string llm_chat(LlmBackend& backend, const Transcript& transcript,
                            const CallContext& ctx) {
  return backend.chat(transcript, ctx);
}

}  // namespace covuln
