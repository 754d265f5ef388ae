#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "covuln/types.hpp"

namespace covuln {

/// One function-level code fragment with its ground-truth label.
struct CodeSample {
  SampleId id = 0;
  std::string code;
  Verdict label = Verdict::Clean;

  friend bool operator==(const CodeSample&, const CodeSample&) = default;
};

/// Ordered, id-unique collection of samples. Iteration order is ascending id.
/// A loaded dataset is never empty; split parts may be.
class Corpus {
 public:
  Corpus() = default;
  /// Sorts by id. Throws DataError on duplicate ids or empty code.
  Corpus(std::vector<CodeSample> samples, std::string source_name);

  [[nodiscard]] std::span<const CodeSample> samples() const noexcept { return samples_; }
  [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples_.empty(); }
  [[nodiscard]] const std::string& source_name() const noexcept { return source_name_; }
  [[nodiscard]] const CodeSample* find(SampleId id) const noexcept;
  [[nodiscard]] std::vector<SampleId> ids() const;
  [[nodiscard]] std::size_t count(Verdict label) const noexcept;

  [[nodiscard]] auto begin() const noexcept { return samples_.cbegin(); }
  [[nodiscard]] auto end() const noexcept { return samples_.cend(); }

 private:
  std::vector<CodeSample> samples_;
  std::string source_name_;
};

/// What a raw `target` value of 1 means in a dataset file.
enum class Polarity { OneIsVulnerable, OneIsClean };

Polarity parse_polarity(std::string_view text);
std::string_view to_string(Polarity p) noexcept;

/// Reads line-delimited records {"idx": int, "func": string, "target": 0|1}.
/// Errors name the 1-based line number. Blank lines are skipped.
Corpus load_corpus(const std::filesystem::path& path, Polarity polarity);
Corpus parse_corpus(std::istream& in, Polarity polarity, std::string source_name);

/// Inverse of load_corpus for the same polarity; records in id order.
void write_corpus(std::ostream& out, const Corpus& corpus, Polarity polarity);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus, Polarity polarity);

/// |Vulnerable| / M. Throws ContractError on an empty corpus.
double class_ratio(const Corpus& corpus);

enum class SplitPart { Train, Valid, Test };
inline constexpr std::array<SplitPart, 3> kAllParts{SplitPart::Train, SplitPart::Valid,
                                                    SplitPart::Test};
std::string_view to_string(SplitPart part) noexcept;

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;

  [[nodiscard]] std::array<double, 3> as_array() const noexcept { return {train, valid, test}; }
};

/// Parses "0.8,0.1,0.1".
SplitRatios parse_ratios(std::string_view text);

struct SplitCorpus {
  Corpus train;
  Corpus valid;
  Corpus test;
  std::uint64_t seed = 42;
  SplitRatios ratios;

  [[nodiscard]] const Corpus& part(SplitPart p) const noexcept;
  [[nodiscard]] std::size_t total() const noexcept {
    return train.size() + valid.size() + test.size();
  }
  /// The sample with `id` in whichever part holds it, or nullptr.
  [[nodiscard]] const CodeSample* find(SampleId id) const noexcept;
};

/// Stratified split: per class (Vulnerable first) a largest-remainder
/// allocation of the class total over the three parts, then membership by a
/// seeded Fisher-Yates shuffle of the class's ids. Deterministic in
/// (corpus, ratios, seed) on every platform.
///
/// Remainder ties go to the part furthest below its overall target size
/// (largest-remainder over the whole corpus), then to the earlier part.
SplitCorpus split_stratified(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed = 42);

/// Per-class part sizes chosen by split_stratified, indexed [class][part]
/// with class 0 = Vulnerable.
std::array<std::array<std::size_t, 3>, 2> stratified_allocation(std::size_t vulnerable,
                                                                std::size_t clean,
                                                                SplitRatios ratios);

/// Re-loadable record of a split.
struct SplitManifest {
  std::string source_name;
  std::string dataset_digest;
  std::uint64_t seed = 42;
  SplitRatios ratios;
  std::vector<SampleId> train;
  std::vector<SampleId> valid;
  std::vector<SampleId> test;
};

SplitManifest make_manifest(const SplitCorpus& split, std::string dataset_digest);
nlohmann::json to_json(const SplitManifest& manifest);
SplitManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::filesystem::path& path);

/// Rebuilds the split recorded in `manifest`. Throws DataError unless the
/// manifest ids partition the corpus exactly.
SplitCorpus apply_manifest(const Corpus& corpus, const SplitManifest& manifest);

}  // namespace covuln
