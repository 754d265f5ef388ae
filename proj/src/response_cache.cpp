#include "covuln/response_cache.hpp"

#include <spdlog/spdlog.h>

#include "covuln/digest.hpp"

namespace covuln {

ResponseCache::ResponseCache(const std::filesystem::path& file) {
  if (std::ifstream in(file, std::ios::binary); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        entries_[j.at("key").get<std::string>()] = j.at("value").get<std::string>();
      } catch (const std::exception&) {
        spdlog::warn("response cache '{}': skipping unreadable line", file.string());
      }
    }
  }
  out_.open(file, std::ios::binary | std::ios::app);
  if (!out_) throw DataError("cannot open response cache '" + file.string() + "'");
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void ResponseCache::put(const std::string& key, const std::string& value) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, value).second) return;
  if (out_.is_open()) {
    out_ << canonical_json({{"key", key}, {"value", value}}) << '\n';
    out_.flush();
  }
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string CachingLlm::chat_impl(const Transcript& transcript, const CallContext& ctx) {
  const auto key = sha256_hex("llm\n" + inner_.identity() + "\n" + transcript_digest(transcript) +
                              "\n" + std::to_string(ctx.attempt));
  if (auto hit = cache_.get(key)) return *hit;
  auto reply = inner_.chat(transcript, ctx);
  cache_.put(key, reply);
  return reply;
}

DetectorReply CachingDetector::predict_impl(const CodeSample& sample) {
  const auto key = sha256_hex("detector\n" + inner_.identity() + "\n" + std::to_string(sample.id) +
                              "\n" + sha256_hex(sample.code));
  if (auto hit = cache_.get(key)) {
    const auto j = nlohmann::json::parse(*hit);
    return {j.at("verdict").get<std::string>() == "vulnerable" ? Verdict::Vulnerable
                                                               : Verdict::Clean,
            j.at("score").get<double>()};
  }
  const auto reply = inner_.predict(sample);
  cache_.put(key, canonical_json({{"verdict", to_string(reply.verdict)}, {"score", reply.score}}));
  return reply;
}

}  // namespace covuln
