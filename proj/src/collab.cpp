#include "covuln/collab.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "covuln/parallel.hpp"

namespace covuln {
namespace {

class Session {
 public:
  Session(Backends backends, const PipelineOptions& options)
      : backends_(backends),
        options_(options),
        limiter_(options.llm_requests_per_second, options.llm_burst) {}

  Assessment phase1(const CodeSample& sample, std::span<const CodeSample> pool) {
    Transcript transcript;
    const bool cot = options_.prompting == PromptingVariant::Cot;
    if (options_.prompting == PromptingVariant::FewShot) {
      transcript = build_fewshot_prompt(sample, pool, options_.seed, options_.fewshot,
                                        options_.templates, cot);
    } else {
      transcript = build_phase1_prompt(sample, options_.templates, cot);
    }

    // Detector and LLM are independent; run them side by side.
    auto detector = std::async(std::launch::async, [&] {
      ++detector_calls;
      return backends_.detector.predict(sample);
    });
    std::optional<std::pair<std::string, ParsedReply>> answer;
    std::exception_ptr llm_error;
    try {
      answer = ask(transcript, sample.id);
    } catch (...) {
      llm_error = std::current_exception();
    }
    const DetectorReply z = detector.get();
    if (llm_error) std::rethrow_exception(llm_error);

    Assessment a;
    a.id = sample.id;
    a.detector = z;
    a.llm_initial = answer->second;
    a.llm_final = answer->second;
    a.hint_mode = options_.hint_mode;
    a.prompt_hash = transcript_digest(transcript);
    a.phase1 = Phase1Exchange{std::move(transcript), std::move(answer->first)};
    return a;
  }

  Assessment refine(Assessment a) {
    if (a.status != AssessmentStatus::Complete || !a.phase1) {
      throw ContractError("refine: sample " + std::to_string(a.id) + " has no Phase I exchange");
    }
    a.hint_mode = options_.hint_mode;
    a.llm_final = a.llm_initial;
    a.refined = false;

    std::optional<Verdict> hint;
    switch (options_.hint_mode) {
      case HintMode::Detector:
        if (a.disagrees()) hint = a.detector.verdict;
        break;
      case HintMode::None: break;
      case HintMode::AlwaysYes: hint = Verdict::Vulnerable; break;
      case HintMode::AlwaysNo: hint = Verdict::Clean; break;
    }
    if (!hint) return a;

    const auto transcript =
        build_phase2_prompt(a.phase1->transcript, a.phase1->reply, *hint, options_.templates);
    try {
      auto [text, parsed] = ask(transcript, a.id);
      a.llm_final = std::move(parsed);
      a.refined = true;
      a.prompt_hash = transcript_digest(transcript);
    } catch (const Error& e) {
      spdlog::error("sample {}: refinement failed, keeping initial reply: {}", a.id, e.what());
      a.status = AssessmentStatus::RefinementFailed;
      a.error = e.what();
    }
    return a;
  }

  std::atomic<std::size_t> detector_calls{0};
  std::atomic<std::size_t> llm_calls{0};

 private:
  std::pair<std::string, ParsedReply> ask(const Transcript& transcript, SampleId id) {
    std::string text;
    ParsedReply parsed;
    for (int attempt = 0; attempt <= std::max(0, options_.unknown_reasks); ++attempt) {
      limiter_.acquire();
      ++llm_calls;
      text = backends_.llm.chat(transcript, {id, attempt});
      parsed = parse_reply(text);
      if (!parsed.unknown()) break;
      spdlog::info("sample {}: unparseable reply (attempt {})", id, attempt + 1);
    }
    return {std::move(text), std::move(parsed)};
  }

  Backends backends_;
  const PipelineOptions& options_;
  RateLimiter limiter_;
};

Assessment failed(SampleId id, const std::exception& e) {
  Assessment a;
  a.id = id;
  a.status = AssessmentStatus::Failed;
  a.error = e.what();
  return a;
}

void tally(PartStats& s, const Assessment& a) {
  if (a.llm_initial.unknown()) {
    ++s.unknown;
  } else if (a.disagrees()) {
    ++s.disagreements;
  } else {
    ++s.agreements;
  }
  if (a.refined) ++s.refinements;
}

}  // namespace

PartStats& PartStats::operator+=(const PartStats& o) {
  total += o.total;
  cached += o.cached;
  assessed += o.assessed;
  failed += o.failed;
  agreements += o.agreements;
  disagreements += o.disagreements;
  refinements += o.refinements;
  unknown += o.unknown;
  return *this;
}

PartStats PipelineReport::totals() const {
  PartStats t;
  for (const auto& p : parts) t += p;
  return t;
}

RateLimiter::RateLimiter(double per_second, double burst)
    : rate_(per_second),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0.0) return;
  for (;;) {
    std::chrono::duration<double> wait{};
    {
      std::lock_guard lock(mu_);
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    }
    std::this_thread::sleep_for(wait);
  }
}

std::vector<Assessment> run_phase1(const Corpus& corpus, Backends backends,
                                   const AssessmentStore& store, const PipelineOptions& options,
                                   std::span<const CodeSample> exemplar_pool) {
  std::vector<const CodeSample*> pending;
  for (const auto& s : corpus) {
    if (!store.contains(s.id)) pending.push_back(&s);
  }
  Session session(backends, options);
  std::vector<Assessment> out(pending.size());
  for_each_index(pending.size(), options.concurrency, [&](std::size_t i) {
    try {
      out[i] = session.phase1(*pending[i], exemplar_pool);
    } catch (const std::exception& e) {
      spdlog::error("sample {}: phase I failed: {}", pending[i]->id, e.what());
      out[i] = failed(pending[i]->id, e);
    }
  });
  return out;
}

Assessment refine(Assessment assessment, LlmBackend& llm, const PipelineOptions& options) {
  struct NoDetector final : DetectorBackend {
    std::string identity() const override { return "none"; }
    DetectorReply predict_impl(const CodeSample&) override {
      throw ContractError("refine does not call the detector");
    }
  } none;
  Session session({none, llm}, options);
  return session.refine(std::move(assessment));
}

Assessment assess_one(const CodeSample& sample, Backends backends, const PipelineOptions& options,
                      std::span<const CodeSample> exemplar_pool) {
  Session session(backends, options);
  try {
    return session.refine(session.phase1(sample, exemplar_pool));
  } catch (const std::exception& e) {
    return failed(sample.id, e);
  }
}

PipelineReport run_pipeline(const SplitCorpus& split, Backends backends, AssessmentStore& store,
                            const PipelineOptions& options, std::span<const SplitPart> parts) {
  const std::set<SplitPart> requested(parts.begin(), parts.end());
  if (requested.size() != kAllParts.size()) {
    throw ContractError(
        "assessment must cover train, valid and test together; enriching a subset would let "
        "training text come from a different process than evaluation text");
  }

  struct Item {
    std::size_t part;
    const CodeSample* sample;
  };
  std::vector<Item> pending;
  PipelineReport report;
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    for (const auto& s : split.part(kAllParts[p])) {
      ++report.parts[p].total;
      if (store.contains(s.id)) {
        ++report.parts[p].cached;
      } else {
        pending.push_back({p, &s});
      }
    }
  }

  const std::size_t total = split.total();
  const auto max_failures = static_cast<std::size_t>(
      std::floor(std::max(0.0, options.failure_threshold) * static_cast<double>(total)));
  const auto exemplar_pool = split.train.samples();

  Session session(backends, options);
  std::vector<std::optional<Assessment>> results(pending.size());
  std::atomic<std::size_t> failures{0};
  std::atomic<bool> abort{false};

  for_each_index(pending.size(), options.concurrency, [&](std::size_t i) {
    if (abort.load()) return;
    const auto& sample = *pending[i].sample;
    Assessment a;
    try {
      a = session.refine(session.phase1(sample, exemplar_pool));
    } catch (const std::exception& e) {
      spdlog::error("sample {}: assessment failed: {}", sample.id, e.what());
      a = failed(sample.id, e);
    }
    if (a.status == AssessmentStatus::Complete) {
      store.append(a);
    } else if (failures.fetch_add(1) + 1 > max_failures) {
      abort.store(true);
    }
    results[i] = std::move(a);
  });

  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (!results[i]) continue;
    auto& stats = report.parts[pending[i].part];
    if (results[i]->status == AssessmentStatus::Complete) {
      ++stats.assessed;
    } else {
      ++stats.failed;
      report.failed.push_back(results[i]->id);
    }
  }
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    for (const auto& s : split.part(kAllParts[p])) {
      if (auto a = store.find(s.id)) tally(report.parts[p], *a);
    }
  }
  std::sort(report.failed.begin(), report.failed.end());
  report.detector_calls = session.detector_calls.load();
  report.llm_calls = session.llm_calls.load();
  report.aborted = abort.load();

  store.compact();
  if (report.aborted) {
    throw RunAborted("aborting: " + std::to_string(failures.load()) + " failed samples exceed " +
                         std::to_string(options.failure_threshold * 100.0) + "% of " +
                         std::to_string(total),
                     std::move(report));
  }
  return report;
}

}  // namespace covuln
