#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "covuln/backends.hpp"
#include "covuln/corpus.hpp"
#include "covuln/eval.hpp"

namespace covuln::test {

namespace fs = std::filesystem;

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const fs::path& path() const noexcept { return path_; }
  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the command-line tool in-process.
CliResult cli(const std::vector<std::string>& args);

std::string slurp(const fs::path& path);
void spit(const fs::path& path, const std::string& text);

/// `n` samples with ids 1..n, the first `vulnerable` of a seeded shuffle
/// labelled Vulnerable. Code text never mentions labels.
Corpus synthetic_corpus(std::size_t n, std::size_t vulnerable, std::uint64_t seed = 7);

/// LLM double driven by a callback; counts calls.
class FnLlm final : public LlmBackend {
 public:
  using Fn = std::function<std::string(const Transcript&, const CallContext&)>;
  explicit FnLlm(Fn fn, std::string identity = "fn-llm")
      : fn_(std::move(fn)), identity_(std::move(identity)) {}
  [[nodiscard]] std::string identity() const override { return identity_; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  std::string chat_impl(const Transcript& t, const CallContext& ctx) override {
    ++calls_;
    return fn_(t, ctx);
  }

 private:
  Fn fn_;
  std::string identity_;
  std::atomic<std::size_t> calls_{0};
};

/// Detector double driven by a callback; counts calls.
class FnDetector final : public DetectorBackend {
 public:
  using Fn = std::function<DetectorReply(const CodeSample&)>;
  explicit FnDetector(Fn fn, std::string identity = "fn-detector")
      : fn_(std::move(fn)), identity_(std::move(identity)) {}
  [[nodiscard]] std::string identity() const override { return identity_; }
  [[nodiscard]] std::size_t calls() const noexcept { return calls_.load(); }

 protected:
  DetectorReply predict_impl(const CodeSample& s) override {
    ++calls_;
    return fn_(s);
  }

 private:
  Fn fn_;
  std::string identity_;
  std::atomic<std::size_t> calls_{0};
};

/// Sample id parsed back out of a synthetic_corpus code text ("fn_ID").
SampleId id_in_code(const std::string& text);

/// True when the last user turn is a recheck request.
bool is_recheck(const Transcript& t);

/// Verdict the last recheck request asserts.
Verdict recheck_hint(const Transcript& t);

// ---- brute-force oracles --------------------------------------------------

/// Per-sample tally straight from the definitions.
ConfusionCounts brute_confusion(const std::vector<int>& pred, const std::vector<int>& truth);

struct BruteMetrics {
  double precision, recall, f1, accuracy;
};
BruteMetrics brute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);

/// Region sizes by explicit enumeration of every membership combination:
/// out[mask] = #{id : the set of models containing id is exactly mask}.
std::vector<std::uint64_t> brute_regions(const std::vector<std::set<SampleId>>& sets,
                                         const std::set<SampleId>& universe);

}  // namespace covuln::test
