#include <doctest.h>

#include <set>

#include "covuln/ablation.hpp"
#include "covuln/mock_backends.hpp"
#include "support.hpp"

namespace covuln {
namespace {

std::string answer(Verdict v) { return v == Verdict::Vulnerable ? "Yes, tainted length" : "No"; }

/// z is always right; c is right except on `wrong`; rechecks adopt the hint.
struct Fixture {
  SplitCorpus split = split_stratified(test::synthetic_corpus(200, 80), {}, 42);
  std::map<SampleId, Verdict> truth;
  std::set<SampleId> wrong;
  test::FnDetector detector{[this](const CodeSample& s) {
    return make_detector_reply(truth.at(s.id) == Verdict::Vulnerable ? 0.9 : 0.1);
  }};
  test::FnLlm llm{[this](const Transcript& t, const CallContext& ctx) {
    if (test::is_recheck(t)) return answer(test::recheck_hint(t));
    const auto v = truth.at(ctx.sample);
    if (!wrong.contains(ctx.sample)) return answer(v);
    return answer(v == Verdict::Vulnerable ? Verdict::Clean : Verdict::Vulnerable);
  }};

  Fixture() {
    for (auto part : kAllParts) {
      for (const auto& s : split.part(part)) truth[s.id] = s.label;
    }
    for (const auto& s : split.test) {
      if (wrong.size() < 10) wrong.insert(s.id);
    }
  }

  AblationRow row(std::string name, HintMode mode, Scorer scorer = Scorer::LlmFinal) {
    AblationRow r;
    r.name = std::move(name);
    r.options.hint_mode = mode;
    r.options.concurrency = 4;
    r.detector = &detector;
    r.llm = &llm;
    r.scorer = scorer;
    return r;
  }
};

}  // namespace

TEST_CASE("ablation: detector feedback fixes exactly the flipped samples") {
  Fixture f;
  ResponseCache cache;
  const std::vector<AblationRow> rows{f.row("detector", HintMode::Detector),
                                      f.row("none", HintMode::None)};
  const auto results = run_ablation(rows, f.split, cache);
  REQUIRE(results.size() == 2);
  const auto& with = results[0].row.metrics;
  const auto& without = results[1].row.metrics;
  CHECK(with.accuracy == 1.0);
  CHECK(with.counts.total() == f.split.test.size());
  CHECK(without.counts.fp + without.counts.fn == 10);
  CHECK(results[0].pipeline.totals().refinements == 10);
  CHECK(results[1].pipeline.totals().refinements == 0);
  CHECK(results[0].row.note == "llm_final");

  // Phase I is shared through the cache: one call per sample plus rechecks.
  CHECK(f.llm.calls() == 200 + 10);
  CHECK(f.detector.calls() == 200);
}

TEST_CASE("ablation: scorers read different columns of the same run") {
  Fixture f;
  ResponseCache cache;
  MarkerValidator validator;
  auto v = f.row("validator", HintMode::Detector, Scorer::Validator);
  v.validator = &validator;
  const std::vector<AblationRow> rows{f.row("initial", HintMode::Detector, Scorer::LlmInitial),
                                      f.row("z", HintMode::Detector, Scorer::Detector), v};
  const auto r = run_ablation(rows, f.split, cache);
  CHECK(r[0].row.metrics.counts.fp + r[0].row.metrics.counts.fn == 10);
  CHECK(r[1].row.metrics.accuracy == 1.0);
  CHECK(r[2].row.metrics.accuracy == 1.0);
  CHECK(validator.calls() == f.split.test.size());
}

TEST_CASE("ablation: single row, oracle llm, skipped rows, name clashes") {
  Fixture f;
  f.wrong.clear();
  ResponseCache cache;
  const std::vector<AblationRow> one{f.row("oracle", HintMode::None)};
  const auto r = run_ablation(one, f.split, cache);
  REQUIRE(r.size() == 1);
  CHECK(r[0].row.metrics.accuracy == 1.0);
  CHECK(r[0].row.metrics.recall == 1.0);

  auto no_llm = f.row("no-llm", HintMode::Detector);
  no_llm.llm = nullptr;
  auto no_validator = f.row("no-validator", HintMode::Detector, Scorer::Validator);
  const std::vector<AblationRow> rows{no_llm, no_validator, f.row("ok", HintMode::AlwaysNo)};
  const auto s = run_ablation(rows, f.split, cache);
  CHECK(s[0].row.skipped);
  CHECK(s[1].row.skipped);
  CHECK_FALSE(s[2].row.skipped);
  CHECK(s[2].row.metrics.recall == 0.0);

  const std::vector<AblationRow> clash{f.row("a", HintMode::None), f.row("a", HintMode::Detector)};
  CHECK_THROWS_AS(run_ablation(clash, f.split, cache), ContractError);
}

TEST_CASE("ablation: an aborting row is skipped, the rest still run") {
  Fixture f;
  ResponseCache cache;
  test::FnLlm down([](const Transcript&, const CallContext&) -> std::string {
    throw ProtocolError("quota exceeded");
  });
  auto bad = f.row("down", HintMode::Detector);
  bad.llm = &down;
  const std::vector<AblationRow> rows{bad, f.row("up", HintMode::Detector)};
  const auto r = run_ablation(rows, f.split, cache);
  CHECK(r[0].row.skipped);
  CHECK(r[0].pipeline.aborted);
  CHECK_FALSE(r[1].row.skipped);
}

TEST_CASE("predictions from a store") {
  Fixture f;
  AssessmentStore store(StoreManifest{});
  run_pipeline(f.split, {f.detector, f.llm}, store, {});
  const auto final_preds = predictions_from_store(f.split.test, store, Scorer::LlmFinal);
  CHECK(final_preds == truths_of(f.split.test));
  CHECK_THROWS_AS(predictions_from_store(f.split.test, store, Scorer::Validator), ContractError);
  AssessmentStore empty(StoreManifest{});
  CHECK_THROWS(predictions_from_store(f.split.test, empty, Scorer::Detector));
  CHECK(parse_scorer("llm_initial") == Scorer::LlmInitial);
  CHECK_THROWS_AS(parse_scorer("oracle"), ContractError);
}

}  // namespace covuln
