#include <doctest.h>

#include "covuln/digest.hpp"
#include "covuln/synthesis.hpp"
#include "support.hpp"

namespace covuln {
namespace {

Assessment assessed(SampleId id, std::optional<Verdict> final_verdict,
                    std::optional<std::string> description = std::nullopt) {
  Assessment a;
  a.id = id;
  a.detector = make_detector_reply(0.3);
  a.llm_initial = {final_verdict, description};
  a.llm_final = {final_verdict, description};
  a.prompt_hash = "p" + std::to_string(id);
  return a;
}

}  // namespace

TEST_CASE("marker lines") {
  CHECK(marker_line({Verdict::Vulnerable, "off-by-one in loop"}) == "ANALYST: YES - off-by-one in loop");
  CHECK(marker_line({Verdict::Vulnerable, ""}) == "ANALYST: YES");
  CHECK(marker_line({Verdict::Vulnerable, std::nullopt}) == "ANALYST: YES");
  CHECK(marker_line({Verdict::Clean, std::nullopt}) == "ANALYST: NO");
  CHECK(marker_line({std::nullopt, std::nullopt}) == "ANALYST: NO");
  CHECK(marker_line({Verdict::Vulnerable, "a\r\nb\nc"}) == "ANALYST: YES - a b c");

  const MarkerOptions bare{false};
  CHECK(marker_line({Verdict::Vulnerable, "overflow"}, bare) == "ANALYST: overflow");
  CHECK(marker_line({Verdict::Clean, std::nullopt}, bare) == "ANALYST:");
}

TEST_CASE("enrich appends one line and never the label") {
  const CodeSample s{4, "int f() {\n  return 0;\n}", Verdict::Vulnerable};
  const auto a = assessed(4, Verdict::Vulnerable, "returns stale pointer");
  const auto e = enrich(s, a);
  CHECK(e.text == s.code + "\nANALYST: YES - returns stale pointer");
  CHECK(e.label == Verdict::Vulnerable);
  CHECK(e.provenance == sha256_hex(canonical_json(to_json(a))));
  CHECK_FALSE(e.unknown_verdict);

  const auto u = enrich(s, assessed(4, std::nullopt));
  CHECK(u.unknown_verdict);
  CHECK(u.text == s.code + "\nANALYST: NO");

  // Same text whatever the true label is.
  const CodeSample flipped{4, s.code, Verdict::Clean};
  CHECK(enrich(flipped, a).text == e.text);

  AssessmentStore store(StoreManifest{});
  CHECK_THROWS_AS(enrich(s, store), CoverageError);
  store.append(a);
  CHECK(enrich(s, store).text == e.text);
}

TEST_CASE("export refuses partial coverage and lists every missing id") {
  test::TempDir dir;
  const auto split = split_stratified(test::synthetic_corpus(40, 16), {}, 42);
  AssessmentStore store(StoreManifest{});
  std::vector<SampleId> missing;
  for (auto part : kAllParts) {
    for (const auto& s : split.part(part)) {
      if (s.id % 7 == 0) {
        missing.push_back(s.id);
        continue;
      }
      store.append(assessed(s.id, Verdict::Clean));
    }
  }
  std::sort(missing.begin(), missing.end());
  CHECK(missing_assessments(split, store) == missing);
  try {
    export_training_set(split, store, dir.path() / "out");
    FAIL("expected CoverageError");
  } catch (const CoverageError& e) {
    CHECK(e.missing() == missing);
    const std::string what = e.what();
    for (auto id : missing) CHECK(what.find(std::to_string(id)) != std::string::npos);
  }
  CHECK_FALSE(std::filesystem::exists(dir.path() / "out" / "train.jsonl"));
}

TEST_CASE("export writes the three parts and reads back") {
  test::TempDir dir;
  const auto split = split_stratified(test::synthetic_corpus(50, 20), {}, 42);
  AssessmentStore store(StoreManifest{});
  for (auto part : kAllParts) {
    for (const auto& s : split.part(part)) {
      store.append(s.id % 2 ? assessed(s.id, Verdict::Vulnerable, "line\nbreak")
                            : assessed(s.id, Verdict::Clean));
    }
  }
  const auto summary = export_training_set(split, store, dir.path() / "out");
  for (std::size_t p = 0; p < 3; ++p) {
    const auto& part = split.part(kAllParts[p]);
    CHECK(summary.records[p] == part.size());
    const auto back = read_enriched(summary.files[p]);
    REQUIRE(back.size() == part.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      const auto& s = part.samples()[i];
      CHECK(back[i].id == s.id);
      CHECK(back[i].label == s.label);
      CHECK(back[i].text == enrich(s, store).text);
    }
  }
  const auto first = test::slurp(summary.files[0]);
  const auto line = nlohmann::json::parse(first.substr(0, first.find('\n')));
  CHECK(line.size() == 3);
  CHECK(line.contains("idx"));
  CHECK(line.contains("text"));
  CHECK(line["target"].is_number_integer());
}

}  // namespace covuln
