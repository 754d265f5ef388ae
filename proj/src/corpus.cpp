#include "covuln/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "covuln/digest.hpp"

namespace covuln {
namespace {

constexpr double kRatioTolerance = 1e-9;
constexpr std::string_view kManifestFormat = "covuln-split/1";

// Unbiased draw in [0, bound) from the raw 64-bit engine output; the
// standard distributions are implementation-defined and would make splits
// toolchain-dependent.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

void fisher_yates(std::vector<SampleId>& ids, std::mt19937_64& rng) {
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(ids[i - 1], ids[j]);
  }
}

void validate_ratios(const SplitRatios& r) {
  double sum = 0.0;
  for (double x : r.as_array()) {
    if (!std::isfinite(x) || x < 0.0) throw ContractError("split ratios must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kRatioTolerance) {
    std::ostringstream msg;
    msg << "split ratios must sum to 1 (got " << sum << ")";
    throw ContractError(msg.str());
  }
}

// Largest-remainder rounding of `total` over three parts. `deficit` (may be
// null) orders equal remainders: larger deficit first, then part order.
std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitRatios& ratios,
                                             const std::array<long long, 3>* deficit) {
  const auto r = ratios.as_array();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t floors = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double q = r[j] * static_cast<double>(total);
    const double fl = std::floor(q + kRatioTolerance);
    counts[j] = static_cast<std::size_t>(fl);
    rem[j] = std::max(0.0, q - fl);
    floors += counts[j];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  auto deficit_of = [&](std::size_t j) -> long long {
    return deficit ? (*deficit)[j] - static_cast<long long>(counts[j]) : 0;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(rem[a] - rem[b]) > kRatioTolerance) return rem[a] > rem[b];
    return deficit_of(a) > deficit_of(b);
  });
  // Ratios summing to 1 +- tolerance can push the floors one over.
  while (floors > total) {
    for (auto it = order.rbegin(); it != order.rend() && floors > total; ++it) {
      if (counts[*it] > 0) {
        --counts[*it];
        --floors;
      }
    }
  }
  for (std::size_t k = 0; floors < total; k = (k + 1) % 3, ++floors) ++counts[order[k]];
  return counts;
}

std::int64_t require_integer(const nlohmann::json& rec, const char* field, std::size_t line) {
  const auto it = rec.find(field);
  if (it == rec.end()) {
    throw DataError("line " + std::to_string(line) + ": missing field '" + field + "'");
  }
  if (!it->is_number_integer()) {
    throw DataError("line " + std::to_string(line) + ": field '" + field +
                    "' must be an integer");
  }
  return it->get<std::int64_t>();
}

std::vector<SampleId> ids_json(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw DataError(std::string("split manifest: missing id list '") + key + "'");
  }
  return it->get<std::vector<SampleId>>();
}

}  // namespace

Corpus::Corpus(std::vector<CodeSample> samples, std::string source_name)
    : samples_(std::move(samples)), source_name_(std::move(source_name)) {
  std::sort(samples_.begin(), samples_.end(),
            [](const CodeSample& a, const CodeSample& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].code.empty()) {
      throw DataError("sample " + std::to_string(samples_[i].id) + " has empty code");
    }
    if (i > 0 && samples_[i - 1].id == samples_[i].id) {
      throw DataError("duplicate sample id " + std::to_string(samples_[i].id));
    }
  }
}

const CodeSample* Corpus::find(SampleId id) const noexcept {
  const auto it = std::lower_bound(samples_.begin(), samples_.end(), id,
                                   [](const CodeSample& s, SampleId v) { return s.id < v; });
  return it != samples_.end() && it->id == id ? &*it : nullptr;
}

std::vector<SampleId> Corpus::ids() const {
  std::vector<SampleId> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.id);
  return out;
}

std::size_t Corpus::count(Verdict label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      samples_.begin(), samples_.end(), [label](const CodeSample& s) { return s.label == label; }));
}

Polarity parse_polarity(std::string_view text) {
  if (text == "1-is-vulnerable") return Polarity::OneIsVulnerable;
  if (text == "1-is-clean") return Polarity::OneIsClean;
  throw ContractError("unknown polarity '" + std::string(text) +
                      "' (expected 1-is-vulnerable or 1-is-clean)");
}

std::string_view to_string(Polarity p) noexcept {
  return p == Polarity::OneIsVulnerable ? "1-is-vulnerable" : "1-is-clean";
}

Corpus parse_corpus(std::istream& in, Polarity polarity, std::string source_name) {
  std::vector<CodeSample> samples;
  std::set<SampleId> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(lineno) + ": invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError("line " + std::to_string(lineno) + ": not an object");

    const SampleId id = require_integer(rec, "idx", lineno);
    const auto func = rec.find("func");
    if (func == rec.end()) throw DataError("line " + std::to_string(lineno) + ": missing field 'func'");
    if (!func->is_string() || func->get_ref<const std::string&>().empty()) {
      throw DataError("line " + std::to_string(lineno) + ": field 'func' must be a non-empty string");
    }
    const auto raw = require_integer(rec, "target", lineno);
    auto label = from_canonical(raw);
    if (!label) {
      throw DataError("line " + std::to_string(lineno) + ": non-binary target " +
                      std::to_string(raw));
    }
    if (polarity == Polarity::OneIsClean) label = flip(*label);
    if (!seen.insert(id).second) {
      throw DataError("line " + std::to_string(lineno) + ": duplicate idx " + std::to_string(id));
    }
    samples.push_back({id, func->get<std::string>(), *label});
  }
  if (samples.empty()) throw DataError("dataset '" + source_name + "' contains no records");
  return Corpus(std::move(samples), std::move(source_name));
}

Corpus load_corpus(const std::filesystem::path& path, Polarity polarity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return parse_corpus(in, polarity, path.filename().string());
}

void write_corpus(std::ostream& out, const Corpus& corpus, Polarity polarity) {
  for (const auto& s : corpus) {
    const Verdict stored = polarity == Polarity::OneIsClean ? flip(s.label) : s.label;
    nlohmann::json rec{{"idx", s.id}, {"func", s.code}, {"target", to_canonical(stored)}};
    out << canonical_json(rec) << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus, Polarity polarity) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_corpus(out, corpus, polarity);
}

double class_ratio(const Corpus& corpus) {
  if (corpus.empty()) throw ContractError("class_ratio of an empty corpus");
  return static_cast<double>(corpus.count(Verdict::Vulnerable)) /
         static_cast<double>(corpus.size());
}

std::string_view to_string(SplitPart part) noexcept {
  switch (part) {
    case SplitPart::Train: return "train";
    case SplitPart::Valid: return "valid";
    case SplitPart::Test: return "test";
  }
  return "?";
}

SplitRatios parse_ratios(std::string_view text) {
  std::array<double, 3> v{};
  std::size_t n = 0;
  std::string buf(text);
  std::istringstream in(buf);
  std::string field;
  while (std::getline(in, field, ',')) {
    if (n == 3) throw ContractError("expected three ratios, got more: '" + buf + "'");
    try {
      std::size_t used = 0;
      v[n] = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ContractError("invalid ratio '" + field + "'");
    }
    ++n;
  }
  if (n != 3) throw ContractError("expected three comma-separated ratios: '" + buf + "'");
  SplitRatios r{v[0], v[1], v[2]};
  validate_ratios(r);
  return r;
}

const Corpus& SplitCorpus::part(SplitPart p) const noexcept {
  switch (p) {
    case SplitPart::Train: return train;
    case SplitPart::Valid: return valid;
    case SplitPart::Test: break;
  }
  return test;
}

const CodeSample* SplitCorpus::find(SampleId id) const noexcept {
  for (auto p : kAllParts) {
    if (const auto* s = part(p).find(id)) return s;
  }
  return nullptr;
}

std::array<std::array<std::size_t, 3>, 2> stratified_allocation(std::size_t vulnerable,
                                                                std::size_t clean,
                                                                SplitRatios ratios) {
  validate_ratios(ratios);
  const auto overall = largest_remainder(vulnerable + clean, ratios, nullptr);
  std::array<long long, 3> deficit{};
  for (std::size_t j = 0; j < 3; ++j) deficit[j] = static_cast<long long>(overall[j]);

  std::array<std::array<std::size_t, 3>, 2> alloc{};
  const std::array<std::size_t, 2> totals{vulnerable, clean};
  for (std::size_t c = 0; c < 2; ++c) {
    alloc[c] = largest_remainder(totals[c], ratios, &deficit);
    for (std::size_t j = 0; j < 3; ++j) deficit[j] -= static_cast<long long>(alloc[c][j]);
  }
  return alloc;
}

SplitCorpus split_stratified(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed) {
  validate_ratios(ratios);
  const std::array<Verdict, 2> classes{Verdict::Vulnerable, Verdict::Clean};
  std::array<std::vector<SampleId>, 2> by_class;
  for (const auto& s : corpus) by_class[s.label == Verdict::Vulnerable ? 0 : 1].push_back(s.id);
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].empty()) {
      spdlog::warn("split: corpus '{}' has no {} samples", corpus.source_name(),
                   to_string(classes[c]));
    }
  }

  const auto alloc = stratified_allocation(by_class[0].size(), by_class[1].size(), ratios);
  std::mt19937_64 rng(seed);
  std::array<std::vector<CodeSample>, 3> parts;
  for (std::size_t c = 0; c < 2; ++c) {
    auto& ids = by_class[c];
    fisher_yates(ids, rng);
    std::size_t pos = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < alloc[c][j]; ++k) parts[j].push_back(*corpus.find(ids[pos++]));
    }
  }

  SplitCorpus out;
  out.train = Corpus(std::move(parts[0]), corpus.source_name());
  out.valid = Corpus(std::move(parts[1]), corpus.source_name());
  out.test = Corpus(std::move(parts[2]), corpus.source_name());
  out.seed = seed;
  out.ratios = ratios;
  return out;
}

SplitManifest make_manifest(const SplitCorpus& split, std::string dataset_digest) {
  SplitManifest m;
  m.source_name = split.train.source_name();
  m.dataset_digest = std::move(dataset_digest);
  m.seed = split.seed;
  m.ratios = split.ratios;
  m.train = split.train.ids();
  m.valid = split.valid.ids();
  m.test = split.test.ids();
  return m;
}

nlohmann::json to_json(const SplitManifest& m) {
  return {{"format", kManifestFormat},
          {"source", m.source_name},
          {"dataset_sha256", m.dataset_digest},
          {"seed", m.seed},
          {"ratios", {m.ratios.train, m.ratios.valid, m.ratios.test}},
          {"train", m.train},
          {"valid", m.valid},
          {"test", m.test}};
}

SplitManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kManifestFormat) {
    throw DataError("not a split manifest (format tag missing)");
  }
  SplitManifest m;
  try {
    m.source_name = j.at("source").get<std::string>();
    m.dataset_digest = j.at("dataset_sha256").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto r = j.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw DataError("split manifest: ratios must have three entries");
    m.ratios = {r[0], r[1], r[2]};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("split manifest: ") + e.what());
  }
  m.train = ids_json(j, "train");
  m.valid = ids_json(j, "valid");
  m.test = ids_json(j, "test");
  return m;
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << canonical_json(to_json(manifest)) << '\n';
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open split manifest '" + path.string() + "'");
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("split manifest '" + path.string() + "': " + e.what());
  }
}

SplitCorpus apply_manifest(const Corpus& corpus, const SplitManifest& manifest) {
  std::set<SampleId> used;
  auto build = [&](const std::vector<SampleId>& ids) {
    std::vector<CodeSample> out;
    out.reserve(ids.size());
    for (SampleId id : ids) {
      const auto* s = corpus.find(id);
      if (!s) throw DataError("split manifest references unknown id " + std::to_string(id));
      if (!used.insert(id).second) {
        throw DataError("split manifest lists id " + std::to_string(id) + " twice");
      }
      out.push_back(*s);
    }
    return Corpus(std::move(out), corpus.source_name());
  };
  SplitCorpus split;
  split.train = build(manifest.train);
  split.valid = build(manifest.valid);
  split.test = build(manifest.test);
  if (used.size() != corpus.size()) {
    throw DataError("split manifest covers " + std::to_string(used.size()) + " of " +
                    std::to_string(corpus.size()) + " samples");
  }
  split.seed = manifest.seed;
  split.ratios = manifest.ratios;
  return split;
}

}  // namespace covuln
