#include <doctest.h>

#include <random>

#include "covuln/eval.hpp"
#include "support.hpp"

namespace covuln {
namespace {

constexpr Verdict V = Verdict::Vulnerable;
constexpr Verdict C = Verdict::Clean;

PredictionMap random_map(std::mt19937_64& rng, std::size_t n, double p_vulnerable) {
  std::bernoulli_distribution coin(p_vulnerable);
  PredictionMap m;
  for (std::size_t i = 1; i <= n; ++i) m[static_cast<SampleId>(i)] = coin(rng) ? V : C;
  return m;
}

std::vector<int> as_ints(const PredictionMap& m) {
  std::vector<int> out;
  for (const auto& [_, v] : m) out.push_back(v == V);
  return out;
}

}  // namespace

TEST_CASE("metrics: all-vulnerable predictions on 10 samples with 4 vulnerable") {
  PredictionMap truth, pred;
  for (SampleId i = 1; i <= 10; ++i) {
    truth[i] = i <= 4 ? V : C;
    pred[i] = V;
  }
  const auto m = metrics(confusion(pred, truth));
  CHECK(m.counts == ConfusionCounts{4, 6, 0, 0});
  CHECK(m.precision == doctest::Approx(0.4));
  CHECK(m.recall == 1.0);
  CHECK(m.accuracy == doctest::Approx(0.4));
  CHECK_FALSE(m.precision_degenerate);
}

TEST_CASE("metrics: accuracy, degenerate denominators and the harmonic mean") {
  CHECK(metrics({2, 3, 3, 2}).accuracy == 0.5);
  const auto none = metrics({0, 0, 7, 3});
  CHECK(none.precision == 0.0);
  CHECK(none.precision_degenerate);
  CHECK(none.f1 == 0.0);
  CHECK(none.f1_degenerate);
  CHECK_FALSE(none.recall_degenerate);
  const auto no_pos = metrics({0, 2, 8, 0});
  CHECK(no_pos.recall_degenerate);
  CHECK_THROWS_AS(metrics({}), ContractError);

  CHECK(f1_score(0.6839, 0.5776) == doctest::Approx(0.6263).epsilon(1e-4));
  CHECK(f1_score(0.0, 0.0) == 0.0);
  CHECK(f1_score(1.0, 1.0) == 1.0);
}

TEST_CASE("confusion: random maps against the per-sample oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 500;
    const auto truth = random_map(rng, n, 0.4);
    const auto pred = random_map(rng, n, 0.5);
    const auto got = confusion(pred, truth);
    CHECK(got == test::brute_confusion(as_ints(pred), as_ints(truth)));
    const auto m = metrics(got);
    const auto b = test::brute_metrics(got.tp, got.fp, got.tn, got.fn);
    CHECK(m.precision == doctest::Approx(b.precision));
    CHECK(m.recall == doctest::Approx(b.recall));
    CHECK(m.f1 == doctest::Approx(b.f1));
    CHECK(m.accuracy == doctest::Approx(b.accuracy));
  }
}

TEST_CASE("parallel and serial kernels agree") {
  std::mt19937_64 rng(8);
  for (std::size_t n : {0u, 1u, 17u, 4096u, 100003u}) {
    std::vector<Verdict> p(n), t(n);
    std::vector<std::uint8_t> masks(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 2 ? V : C;
      t[i] = rng() % 3 ? V : C;
      masks[i] = static_cast<std::uint8_t>(rng() % 8);
    }
    CHECK(tally(p, t) == tally_serial(p, t));
    CHECK(region_histogram(masks, 3) == region_histogram_serial(masks, 3));
  }
}

TEST_CASE("metric identities") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const ConfusionCounts c{rng() % 50, rng() % 50, rng() % 50, rng() % 50};
    if (c.total() == 0) continue;
    const auto m = metrics(c);
    // Conservation of the four cells.
    CHECK(c.tp + c.fn + c.fp + c.tn == c.total());
    // Class-flip duality: swapping labels swaps TP<->TN and FP<->FN.
    const auto flipped = metrics({c.tn, c.fn, c.tp, c.fp});
    CHECK(flipped.accuracy == doctest::Approx(m.accuracy));
    if (c.tn + c.fp) {
      CHECK(flipped.recall == doctest::Approx(static_cast<double>(c.tn) / (c.tn + c.fp)));
    }
    CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
    CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
  }
}

TEST_CASE("confusion is invariant under id relabelling") {
  std::mt19937_64 rng(4);
  const auto truth = random_map(rng, 300, 0.3);
  const auto pred = random_map(rng, 300, 0.6);
  std::vector<SampleId> perm;
  for (const auto& [id, _] : truth) perm.push_back(id + 1000);
  std::shuffle(perm.begin(), perm.end(), rng);
  PredictionMap t2, p2;
  std::size_t i = 0;
  for (const auto& [id, v] : truth) {
    t2[perm[i]] = v;
    p2[perm[i]] = pred.at(id);
    ++i;
  }
  CHECK(confusion(p2, t2) == confusion(pred, truth));
}

TEST_CASE("key mismatch lists the symmetric difference") {
  const PredictionMap truth{{1, V}, {2, C}, {3, C}};
  const PredictionMap pred{{1, V}, {2, C}, {4, V}};
  try {
    confusion(pred, truth);
    FAIL("expected KeyMismatch");
  } catch (const KeyMismatch& e) {
    CHECK(e.ids() == std::vector<SampleId>{3, 4});
  }
}

TEST_CASE("compare_models: two models, small example") {
  PredictionMap truth;
  for (SampleId i = 1; i <= 5; ++i) truth[i] = i <= 3 ? V : C;
  // A finds {1,2}, B finds {2,3} among the vulnerable ids.
  const PredictionMap a{{1, V}, {2, V}, {3, C}, {4, V}, {5, C}};
  const PredictionMap b{{1, C}, {2, V}, {3, V}, {4, C}, {5, C}};
  const auto r = compare_models({{"A", a}, {"B", b}}, truth);
  CHECK(r.correct_regions == std::vector<std::uint64_t>{0, 1, 1, 1});
  CHECK(r.correct_union() == 3);
  CHECK(r.fn_regions == std::vector<std::uint64_t>{1, 1, 1, 0});
  CHECK(r.fn_union() == 2);

  const auto same = compare_models({{"A", a}, {"A2", a}}, truth);
  CHECK(same.correct_regions == std::vector<std::uint64_t>{1, 0, 0, 2});

  CHECK_THROWS_AS(compare_models({{"A", a}}, truth), ContractError);
  CHECK_THROWS_AS(compare_models({{"A", a}, {"B", b}, {"C", a}, {"D", b}}, truth), ContractError);
  PredictionMap short_b = b;
  short_b.erase(5);
  CHECK_THROWS_AS(compare_models({{"A", a}, {"B", short_b}}, truth), KeyMismatch);
}

TEST_CASE("compare_models: three random models against explicit enumeration") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto truth = random_map(rng, 200, 0.5);
    std::vector<NamedPredictions> models;
    for (int m = 0; m < 3; ++m) models.push_back({"m" + std::to_string(m), random_map(rng, 200, 0.5)});
    const auto r = compare_models(models, truth);

    std::set<SampleId> universe;
    for (const auto& [id, v] : truth) {
      if (v == V) universe.insert(id);
    }
    std::vector<std::set<SampleId>> correct(3), missed(3);
    for (int m = 0; m < 3; ++m) {
      for (auto id : universe) (models[m].predictions.at(id) == V ? correct : missed)[m].insert(id);
    }
    CHECK(r.correct_regions == test::brute_regions(correct, universe));
    CHECK(r.fn_regions == test::brute_regions(missed, universe));
    std::uint64_t sum = 0;
    for (auto x : r.correct_regions) sum += x;
    CHECK(sum == universe.size());
    for (int m = 0; m < 3; ++m) {
      CHECK(r.correct[m].size() + r.false_negatives[m].size() == universe.size());
    }
  }
}

TEST_CASE("report formatting") {
  ReportRow a{"detector", metrics({4, 6, 0, 0}), false, ""};
  ReportRow b{"always_yes", {}, true, "no llm"};
  const auto table = format_table({a, b});
  CHECK(table.find("detector") != std::string::npos);
  CHECK(table.find("0.4000") != std::string::npos);
  CHECK(table.find("skipped") != std::string::npos);
  const auto jsonl = format_jsonl({a, b});
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 2);
  const auto j = to_json(a);
  CHECK(j["name"] == "detector");
  CHECK(j["tp"] == 4);
}

}  // namespace covuln
