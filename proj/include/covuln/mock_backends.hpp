#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "covuln/backends.hpp"

namespace covuln {

// Deterministic test doubles for offline runs. All of them count calls and
// are safe to share between worker threads.

/// Replays per-sample reply sequences; the n-th call for a sample returns its
/// n-th scripted reply. Over-consumption throws ScriptExhausted.
class ScriptedDetector final : public DetectorBackend {
 public:
  ScriptedDetector() = default;
  ScriptedDetector(const ScriptedDetector&) = delete;
  ScriptedDetector& operator=(const ScriptedDetector&) = delete;

  void add(SampleId id, DetectorReply reply);
  /// JSONL records {"idx", "score"[, "verdict"]}; repeated idx extends the
  /// sequence. Verdicts are derived from scores at `threshold`.
  static std::unique_ptr<ScriptedDetector> load(const std::filesystem::path& path,
                                                double threshold = kDefaultDecisionThreshold);

  [[nodiscard]] std::string identity() const override { return identity_; }
  void set_identity(std::string identity) { identity_ = std::move(identity); }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  DetectorReply predict_impl(const CodeSample& sample) override;

 private:
  mutable std::mutex mu_;
  std::unordered_map<SampleId, std::deque<DetectorReply>> script_;
  std::atomic<std::size_t> calls_{0};
  std::string identity_ = "scripted-detector";
};

struct DetectorRates {
  double true_positive_rate = 0.5;
  double false_positive_rate = 0.5;
};

/// Draws a verdict per sample from (TPR, FPR) given the sample's true label.
/// The draw is a pure function of (seed, id), so results do not depend on
/// call order or thread interleaving.
class StatisticalDetector final : public DetectorBackend {
 public:
  StatisticalDetector(DetectorRates rates, std::uint64_t seed,
                      std::unordered_map<SampleId, Verdict> truths);

  [[nodiscard]] std::string identity() const override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  DetectorReply predict_impl(const CodeSample& sample) override;

 private:
  DetectorRates rates_;
  std::uint64_t seed_;
  std::unordered_map<SampleId, Verdict> truths_;
  std::atomic<std::size_t> calls_{0};
};

/// Validator double: reads the analyst marker line appended by synthesis and
/// answers Vulnerable (score 1) iff it says YES.
class MarkerValidator final : public DetectorBackend {
 public:
  [[nodiscard]] std::string identity() const override { return "marker-validator"; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  DetectorReply predict_impl(const CodeSample& sample) override;

 private:
  std::atomic<std::size_t> calls_{0};
};

enum class MockMode { Scripted, Statistical };

/// Declarative description of a mock detector.
struct MockSpec {
  MockMode mode = MockMode::Scripted;
  std::map<SampleId, std::vector<DetectorReply>> script;
  DetectorRates rates;
  std::uint64_t seed = 42;
};

/// `truths` is only consulted in statistical mode.
std::unique_ptr<DetectorBackend> make_mock_detector(
    const MockSpec& spec, std::unordered_map<SampleId, Verdict> truths = {});

/// Replays LLM replies. Lookup order: an exact-transcript entry (keyed by
/// transcript digest) if present, else the next reply queued for the
/// sample. Every transcript received is recorded for audits.
class ScriptedLlm final : public LlmBackend {
 public:
  ScriptedLlm() = default;
  ScriptedLlm(const ScriptedLlm&) = delete;
  ScriptedLlm& operator=(const ScriptedLlm&) = delete;

  void add_for_sample(SampleId id, std::vector<std::string> replies);
  void add_for_transcript(std::string digest, std::string reply);
  /// JSONL: {"idx", "replies": [...]} or {"transcript_sha256", "reply"}.
  static std::unique_ptr<ScriptedLlm> load(const std::filesystem::path& path);

  [[nodiscard]] std::string identity() const override { return identity_; }
  void set_identity(std::string identity) { identity_ = std::move(identity); }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

  struct Received {
    SampleId sample;
    int attempt;
    Transcript transcript;
  };
  [[nodiscard]] std::vector<Received> received() const;

 protected:
  std::string chat_impl(const Transcript& transcript, const CallContext& ctx) override;

 private:
  mutable std::mutex mu_;
  std::unordered_map<SampleId, std::deque<std::string>> by_sample_;
  std::unordered_map<std::string, std::string> by_transcript_;
  std::vector<Received> received_;
  std::atomic<std::size_t> calls_{0};
  std::string identity_ = "scripted-llm";
};

}  // namespace covuln
