#include "covuln/mock_backends.hpp"

#include <fstream>
#include <random>

#include "covuln/digest.hpp"
#include "covuln/synthesis.hpp"

namespace covuln {
namespace {

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

nlohmann::json parse_line(const std::string& line, const std::filesystem::path& path,
                          std::size_t lineno) {
  try {
    auto j = nlohmann::json::parse(line);
    if (!j.is_object()) throw DataError("not an object");
    return j;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open script '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(parse_line(line, path, lineno));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void ScriptedDetector::add(SampleId id, DetectorReply reply) {
  std::lock_guard lock(mu_);
  script_[id].push_back(reply);
}

std::unique_ptr<ScriptedDetector> ScriptedDetector::load(const std::filesystem::path& path,
                                                         double threshold) {
  auto mock = std::make_unique<ScriptedDetector>();
  for_each_record(path, [&](const nlohmann::json& rec) {
    mock->add(rec.at("idx").get<SampleId>(),
              make_detector_reply(rec.at("score").get<double>(), threshold));
  });
  mock->set_identity("scripted:" + sha256_file(path));
  return mock;
}

DetectorReply ScriptedDetector::predict_impl(const CodeSample& sample) {
  ++calls_;
  std::lock_guard lock(mu_);
  auto it = script_.find(sample.id);
  if (it == script_.end() || it->second.empty()) {
    throw ScriptExhausted("detector script has no reply left for sample " +
                          std::to_string(sample.id));
  }
  const auto reply = it->second.front();
  it->second.pop_front();
  return reply;
}

StatisticalDetector::StatisticalDetector(DetectorRates rates, std::uint64_t seed,
                                         std::unordered_map<SampleId, Verdict> truths)
    : rates_(rates), seed_(seed), truths_(std::move(truths)) {
  for (double r : {rates_.true_positive_rate, rates_.false_positive_rate}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ContractError("mock detector rates must lie in [0, 1]");
  }
}

std::string StatisticalDetector::identity() const {
  return "statistical:tpr=" + std::to_string(rates_.true_positive_rate) +
         ",fpr=" + std::to_string(rates_.false_positive_rate) + ",seed=" + std::to_string(seed_);
}

DetectorReply StatisticalDetector::predict_impl(const CodeSample& sample) {
  ++calls_;
  const auto truth = truths_.find(sample.id);
  if (truth == truths_.end()) {
    throw ContractError("statistical mock has no truth for sample " + std::to_string(sample.id));
  }
  std::mt19937_64 rng(seed_ ^ (static_cast<std::uint64_t>(sample.id) * 0x9E3779B97F4A7C15ULL));
  const double u = unit_draw(rng);
  const double v = unit_draw(rng);
  const double p_vulnerable = truth->second == Verdict::Vulnerable ? rates_.true_positive_rate
                                                                   : rates_.false_positive_rate;
  const bool vulnerable = u < p_vulnerable;
  return make_detector_reply(vulnerable ? 0.5 + 0.5 * v : 0.5 * v);
}

DetectorReply MarkerValidator::predict_impl(const CodeSample& sample) {
  ++calls_;
  const std::string_view text = sample.code;
  std::size_t pos = text.rfind(std::string("\n") + std::string(kMarkerPrefix));
  pos = pos == std::string_view::npos ? (text.starts_with(kMarkerPrefix) ? 0 : pos) : pos + 1;
  if (pos == std::string_view::npos) return make_detector_reply(0.0);
  auto rest = text.substr(pos + kMarkerPrefix.size());
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  if (rest.starts_with(kMarkerYes)) return make_detector_reply(1.0);
  if (rest.starts_with(kMarkerNo) || rest.empty()) return make_detector_reply(0.0);
  return make_detector_reply(1.0);
}

std::unique_ptr<DetectorBackend> make_mock_detector(const MockSpec& spec,
                                                    std::unordered_map<SampleId, Verdict> truths) {
  if (spec.mode == MockMode::Statistical) {
    return std::make_unique<StatisticalDetector>(spec.rates, spec.seed, std::move(truths));
  }
  auto mock = std::make_unique<ScriptedDetector>();
  for (const auto& [id, replies] : spec.script) {
    for (const auto& r : replies) mock->add(id, r);
  }
  return mock;
}

void ScriptedLlm::add_for_sample(SampleId id, std::vector<std::string> replies) {
  std::lock_guard lock(mu_);
  auto& q = by_sample_[id];
  for (auto& r : replies) q.push_back(std::move(r));
}

void ScriptedLlm::add_for_transcript(std::string digest, std::string reply) {
  std::lock_guard lock(mu_);
  by_transcript_[std::move(digest)] = std::move(reply);
}

std::unique_ptr<ScriptedLlm> ScriptedLlm::load(const std::filesystem::path& path) {
  auto mock = std::make_unique<ScriptedLlm>();
  for_each_record(path, [&](const nlohmann::json& rec) {
    if (rec.contains("transcript_sha256")) {
      mock->add_for_transcript(rec.at("transcript_sha256").get<std::string>(),
                               rec.at("reply").get<std::string>());
    } else {
      mock->add_for_sample(rec.at("idx").get<SampleId>(),
                           rec.at("replies").get<std::vector<std::string>>());
    }
  });
  mock->set_identity("scripted:" + sha256_file(path));
  return mock;
}

std::vector<ScriptedLlm::Received> ScriptedLlm::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

std::string ScriptedLlm::chat_impl(const Transcript& transcript, const CallContext& ctx) {
  ++calls_;
  std::lock_guard lock(mu_);
  received_.push_back({ctx.sample, ctx.attempt, transcript});
  if (!by_transcript_.empty()) {
    if (auto it = by_transcript_.find(transcript_digest(transcript)); it != by_transcript_.end()) {
      return it->second;
    }
  }
  auto it = by_sample_.find(ctx.sample);
  if (it == by_sample_.end() || it->second.empty()) {
    throw ScriptExhausted("llm script has no reply left for sample " + std::to_string(ctx.sample));
  }
  auto reply = std::move(it->second.front());
  it->second.pop_front();
  return reply;
}

}  // namespace covuln
