#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "covuln/backends.hpp"

namespace covuln {

/// Thread-safe key -> reply map, optionally persisted as append-only JSONL
/// {"key","value"} so separate runs (e.g. ablation rows whose prompts
/// coincide) reuse earlier backend replies.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(const std::filesystem::path& file);

  [[nodiscard]] std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value);

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::size_t hits() const noexcept { return hits_.load(); }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
  mutable std::atomic<std::size_t> hits_{0};
};

/// Serves repeated (backend, transcript, attempt) requests from the cache.
class CachingLlm final : public LlmBackend {
 public:
  CachingLlm(LlmBackend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}
  [[nodiscard]] std::string identity() const override { return inner_.identity(); }

 protected:
  std::string chat_impl(const Transcript& transcript, const CallContext& ctx) override;

 private:
  LlmBackend& inner_;
  ResponseCache& cache_;
};

/// Serves repeated (backend, id, code) predictions from the cache.
class CachingDetector final : public DetectorBackend {
 public:
  CachingDetector(DetectorBackend& inner, ResponseCache& cache) : inner_(inner), cache_(cache) {}
  [[nodiscard]] std::string identity() const override { return inner_.identity(); }

 protected:
  DetectorReply predict_impl(const CodeSample& sample) override;

 private:
  DetectorBackend& inner_;
  ResponseCache& cache_;
};

}  // namespace covuln
