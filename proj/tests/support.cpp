#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "covuln/cli.hpp"

namespace covuln::test {

TempDir::TempDir() {
  static int counter = 0;
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("covuln-test-" + std::to_string(::getpid()) + "-" + std::to_string(++counter) + "-" +
           std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CliResult cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"covuln"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

Corpus synthetic_corpus(std::size_t n, std::size_t vulnerable, std::uint64_t seed) {
  std::vector<SampleId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<SampleId>(i + 1);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<CodeSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = ids[i];
    samples.push_back({id,
                       "int fn_" + std::to_string(id) + "(int *p, int n) {\n  return p[n + " +
                           std::to_string(id % 7) + "];\n}",
                       i < vulnerable ? Verdict::Vulnerable : Verdict::Clean});
  }
  return Corpus(std::move(samples), "synthetic");
}

ConfusionCounts brute_confusion(const std::vector<int>& pred, const std::vector<int>& truth) {
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++c.tp;
    if (pred[i] == 1 && truth[i] == 0) ++c.fp;
    if (pred[i] == 0 && truth[i] == 0) ++c.tn;
    if (pred[i] == 0 && truth[i] == 1) ++c.fn;
  }
  return c;
}

BruteMetrics brute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
  const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
  const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  const double a = double(tp + tn) / double(tp + fp + tn + fn);
  return {p, r, f, a};
}

std::vector<std::uint64_t> brute_regions(const std::vector<std::set<SampleId>>& sets,
                                         const std::set<SampleId>& universe) {
  std::vector<std::uint64_t> out(std::size_t{1} << sets.size(), 0);
  for (std::size_t mask = 0; mask < out.size(); ++mask) {
    for (auto id : universe) {
      bool exact = true;
      for (std::size_t m = 0; m < sets.size(); ++m) {
        const bool in_mask = (mask >> m) & 1;
        if (in_mask != (sets[m].count(id) > 0)) exact = false;
      }
      if (exact) ++out[mask];
    }
  }
  return out;
}

}  // namespace covuln::test

namespace covuln::test {

SampleId id_in_code(const std::string& text) {
  const auto pos = text.find("fn_");
  if (pos == std::string::npos) return 0;
  return std::stoll(text.substr(pos + 3));
}

bool is_recheck(const Transcript& t) {
  return t.size() >= 3 && t.back().role == "user" &&
         t.back().content.rfind("Another expert has found", 0) == 0;
}

Verdict recheck_hint(const Transcript& t) {
  return t.back().content.find("does not have vulnerabilities") != std::string::npos
             ? Verdict::Clean
             : Verdict::Vulnerable;
}

}  // namespace covuln::test
