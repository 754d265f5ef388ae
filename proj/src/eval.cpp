#include "covuln/eval.hpp"

#include <algorithm>
#include <array>
#include <iomanip>
#include <sstream>

#include "covuln/digest.hpp"

namespace covuln {
namespace {

constexpr std::size_t kMaxModels = 3;

std::string mismatch_message(const std::vector<SampleId>& ids) {
  std::string msg = "prediction and truth ids differ (" + std::to_string(ids.size()) + " id(s)):";
  const std::size_t shown = std::min<std::size_t>(ids.size(), 50);
  for (std::size_t i = 0; i < shown; ++i) msg += " " + std::to_string(ids[i]);
  if (shown < ids.size()) msg += " ...";
  return msg;
}

void require_same_keys(const PredictionMap& a, const PredictionMap& b) {
  std::vector<SampleId> diff;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      diff.push_back((ia++)->first);
    } else if (ia == a.end() || ib->first < ia->first) {
      diff.push_back((ib++)->first);
    } else {
      ++ia;
      ++ib;
    }
  }
  if (!diff.empty()) throw KeyMismatch(std::move(diff));
}

void check_spans(std::span<const Verdict> p, std::span<const Verdict> t) {
  if (p.size() != t.size()) throw ContractError("tally: prediction and truth lengths differ");
}

double ratio(std::uint64_t num, std::uint64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

KeyMismatch::KeyMismatch(std::vector<SampleId> symmetric_difference)
    : Error(mismatch_message(symmetric_difference)), ids_(std::move(symmetric_difference)) {}

ConfusionCounts tally_serial(std::span<const Verdict> predictions, std::span<const Verdict> truths) {
  check_spans(predictions, truths);
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == Verdict::Vulnerable;
    const bool truth = truths[i] == Verdict::Vulnerable;
    if (pred && truth) {
      ++c.tp;
    } else if (pred) {
      ++c.fp;
    } else if (truth) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

ConfusionCounts tally(std::span<const Verdict> predictions, std::span<const Verdict> truths) {
  check_spans(predictions, truths);
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  const auto n = static_cast<std::int64_t>(predictions.size());
  const Verdict* pred = predictions.data();
  const Verdict* truth = truths.data();
#pragma omp parallel for reduction(+ : tp, fp, tn, fn) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const int p = pred[i] == Verdict::Vulnerable;
    const int t = truth[i] == Verdict::Vulnerable;
    tp += p & t;
    fp += p & (1 - t);
    fn += (1 - p) & t;
    tn += (1 - p) & (1 - t);
  }
  return {tp, fp, tn, fn};
}

ConfusionCounts confusion(const PredictionMap& predictions, const PredictionMap& truths) {
  require_same_keys(predictions, truths);
  std::vector<Verdict> p;
  std::vector<Verdict> t;
  p.reserve(predictions.size());
  t.reserve(truths.size());
  for (const auto& [id, v] : predictions) p.push_back(v);
  for (const auto& [id, v] : truths) t.push_back(v);
  return tally(p, t);
}

double f1_score(double precision, double recall) noexcept {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

MetricsReport metrics(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw ContractError("metrics: no evaluated samples");
  MetricsReport r;
  r.counts = counts;
  r.precision = ratio(counts.tp, counts.tp + counts.fp, r.precision_degenerate);
  r.recall = ratio(counts.tp, counts.tp + counts.fn, r.recall_degenerate);
  r.f1_degenerate = r.precision + r.recall == 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  r.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
  return r;
}

std::uint64_t OverlapReport::correct_union() const noexcept {
  std::uint64_t sum = 0;
  for (std::size_t m = 1; m < correct_regions.size(); ++m) sum += correct_regions[m];
  return sum;
}

std::uint64_t OverlapReport::fn_union() const noexcept {
  std::uint64_t sum = 0;
  for (std::size_t m = 1; m < fn_regions.size(); ++m) sum += fn_regions[m];
  return sum;
}

std::vector<std::uint64_t> region_histogram_serial(std::span<const std::uint8_t> masks,
                                                   std::size_t models) {
  std::vector<std::uint64_t> h(std::size_t{1} << models, 0);
  for (auto m : masks) ++h.at(m);
  return h;
}

std::vector<std::uint64_t> region_histogram(std::span<const std::uint8_t> masks,
                                            std::size_t models) {
  if (models > kMaxModels) throw ContractError("region_histogram supports at most 3 models");
  std::uint64_t h[1 << kMaxModels] = {};
  const auto n = static_cast<std::int64_t>(masks.size());
  const std::uint8_t* data = masks.data();
  const std::uint8_t limit = static_cast<std::uint8_t>(1u << models);
  std::uint64_t out_of_range = 0;
#pragma omp parallel for reduction(+ : h[:1 << kMaxModels], out_of_range) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto m = data[i];
    if (m < limit) {
      ++h[m];
    } else {
      ++out_of_range;
    }
  }
  if (out_of_range) throw ContractError("region_histogram: mask out of range");
  return {h, h + (std::size_t{1} << models)};
}

OverlapReport compare_models(const std::vector<NamedPredictions>& results,
                             const PredictionMap& truths) {
  if (results.size() < 2 || results.size() > kMaxModels) {
    throw ContractError("compare_models needs 2 or 3 models, got " +
                        std::to_string(results.size()));
  }
  for (const auto& r : results) require_same_keys(r.predictions, truths);

  std::vector<SampleId> positives;
  for (const auto& [id, v] : truths) {
    if (v == Verdict::Vulnerable) positives.push_back(id);
  }

  OverlapReport report;
  report.correct.resize(results.size());
  report.false_negatives.resize(results.size());
  std::vector<std::uint8_t> correct_masks(positives.size(), 0);
  std::vector<std::uint8_t> fn_masks(positives.size(), 0);
  for (std::size_t m = 0; m < results.size(); ++m) {
    report.models.push_back(results[m].name);
    const auto& preds = results[m].predictions;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      const auto bit = static_cast<std::uint8_t>(1u << m);
      if (preds.at(positives[i]) == Verdict::Vulnerable) {
        correct_masks[i] |= bit;
        report.correct[m].insert(positives[i]);
      } else {
        fn_masks[i] |= bit;
        report.false_negatives[m].insert(positives[i]);
      }
    }
  }
  report.correct_regions = region_histogram(correct_masks, results.size());
  report.fn_regions = region_histogram(fn_masks, results.size());
  return report;
}

std::string format_table(const std::vector<ReportRow>& rows) {
  std::size_t width = 13;
  for (const auto& r : rows) width = std::max(width, r.name.size() + 2);
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "configuration" << std::right
      << std::setw(9) << "accuracy" << std::setw(10) << "precision" << std::setw(9) << "recall"
      << std::setw(9) << "f1" << std::setw(8) << "tp" << std::setw(8) << "fp" << std::setw(8)
      << "tn" << std::setw(8) << "fn" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << std::right;
    if (r.skipped) {
      out << "  skipped: " << r.note << '\n';
      continue;
    }
    const auto& m = r.metrics;
    auto cell = [&](double v, bool degenerate, int w) {
      std::ostringstream c;
      c << std::fixed << std::setprecision(4) << v << (degenerate ? "*" : "");
      out << std::setw(w) << c.str();
    };
    cell(m.accuracy, false, 9);
    cell(m.precision, m.precision_degenerate, 10);
    cell(m.recall, m.recall_degenerate, 9);
    cell(m.f1, m.f1_degenerate, 9);
    out << std::setw(8) << m.counts.tp << std::setw(8) << m.counts.fp << std::setw(8)
        << m.counts.tn << std::setw(8) << m.counts.fn << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const ReportRow& row) {
  nlohmann::json j{{"name", row.name}, {"skipped", row.skipped}};
  if (!row.note.empty()) j["note"] = row.note;
  if (row.skipped) return j;
  const auto& m = row.metrics;
  auto degenerate = nlohmann::json::array();
  if (m.precision_degenerate) degenerate.push_back("precision");
  if (m.recall_degenerate) degenerate.push_back("recall");
  if (m.f1_degenerate) degenerate.push_back("f1");
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["tn"] = m.counts.tn;
  j["fn"] = m.counts.fn;
  j["degenerate"] = degenerate;
  return j;
}

std::string format_jsonl(const std::vector<ReportRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += canonical_json(to_json(r)) + "\n";
  return out;
}

namespace {

std::string region_name(const std::vector<std::string>& models, std::size_t mask) {
  std::string name;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (mask & (std::size_t{1} << i)) name += (name.empty() ? "" : "&") + models[i];
  }
  return name.empty() ? "(none)" : name;
}

nlohmann::json regions_json(const std::vector<std::string>& models,
                            const std::vector<std::uint64_t>& regions) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t m = 1; m < regions.size(); ++m) j[region_name(models, m)] = regions[m];
  return j;
}

}  // namespace

nlohmann::json to_json(const OverlapReport& report) {
  nlohmann::json per_model = nlohmann::json::object();
  for (std::size_t i = 0; i < report.models.size(); ++i) {
    per_model[report.models[i]] = {{"correct", report.correct[i].size()},
                                   {"false_negatives", report.false_negatives[i].size()}};
  }
  return {{"models", report.models},
          {"per_model", per_model},
          {"correct_regions", regions_json(report.models, report.correct_regions)},
          {"correct_union", report.correct_union()},
          {"fn_regions", regions_json(report.models, report.fn_regions)},
          {"fn_union", report.fn_union()}};
}

std::string format_overlap(const OverlapReport& report) {
  std::ostringstream out;
  std::size_t width = 8;
  for (std::size_t m = 1; m < report.correct_regions.size(); ++m) {
    width = std::max(width, region_name(report.models, m).size() + 2);
  }
  out << std::left << std::setw(static_cast<int>(width)) << "region" << std::right
      << std::setw(10) << "detected" << std::setw(10) << "missed" << '\n';
  for (std::size_t m = 1; m < report.correct_regions.size(); ++m) {
    out << std::left << std::setw(static_cast<int>(width)) << region_name(report.models, m)
        << std::right << std::setw(10) << report.correct_regions[m] << std::setw(10)
        << report.fn_regions[m] << '\n';
  }
  out << std::left << std::setw(static_cast<int>(width)) << "union" << std::right
      << std::setw(10) << report.correct_union() << std::setw(10) << report.fn_union() << '\n';
  return out.str();
}

}  // namespace covuln
