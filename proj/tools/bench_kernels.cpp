// Serial reference vs OpenMP kernels, and pipeline throughput against a
// latency-bound mock backend.

#include <benchmark/benchmark.h>

#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "covuln/collab.hpp"
#include "covuln/eval.hpp"

namespace covuln {
namespace {

std::vector<Verdict> random_verdicts(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Verdict> v(n);
  for (auto& x : v) x = rng() % 2 ? Verdict::Vulnerable : Verdict::Clean;
  return v;
}

std::vector<std::uint8_t> random_masks(std::size_t n) {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> m(n);
  for (auto& x : m) x = static_cast<std::uint8_t>(rng() % 8);
  return m;
}

void BM_TallySerial(benchmark::State& state) {
  const auto p = random_verdicts(static_cast<std::size_t>(state.range(0)), 1);
  const auto t = random_verdicts(p.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(tally_serial(p, t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TallyParallel(benchmark::State& state) {
  const auto p = random_verdicts(static_cast<std::size_t>(state.range(0)), 1);
  const auto t = random_verdicts(p.size(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(tally(p, t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegionsSerial(benchmark::State& state) {
  const auto m = random_masks(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(region_histogram_serial(m, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegionsParallel(benchmark::State& state) {
  const auto m = random_masks(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(region_histogram(m, 3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

/// Each call sleeps, standing in for a remote endpoint.
class SlowDetector final : public DetectorBackend {
 public:
  std::string identity() const override { return "slow"; }

 protected:
  DetectorReply predict_impl(const CodeSample& s) override {
    std::this_thread::sleep_for(std::chrono::microseconds(500));
    return make_detector_reply(s.id % 3 ? 0.2 : 0.8);
  }
};

class SlowLlm final : public LlmBackend {
 public:
  std::string identity() const override { return "slow"; }

 protected:
  std::string chat_impl(const Transcript& t, const CallContext& ctx) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    if (t.size() > 1) return "No";
    return ctx.sample % 2 ? "Yes, unchecked copy" : "No";
  }
};

void BM_Pipeline(benchmark::State& state) {
  std::vector<CodeSample> samples;
  for (SampleId id = 1; id <= 200; ++id) {
    samples.push_back({id, "int f" + std::to_string(id) + "(void);",
                       id % 2 ? Verdict::Vulnerable : Verdict::Clean});
  }
  const auto split = split_stratified(Corpus(samples, "bench"), {}, 42);
  SlowDetector detector;
  SlowLlm llm;
  PipelineOptions o;
  o.concurrency = static_cast<int>(state.range(0));
  for (auto _ : state) {
    AssessmentStore store(StoreManifest{});
    run_pipeline(split, {detector, llm}, store, o);
  }
  state.SetItemsProcessed(state.iterations() * 200);
}

BENCHMARK(BM_TallySerial)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_TallyParallel)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_RegionsSerial)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_RegionsParallel)->Arg(1 << 16)->Arg(1 << 22);
BENCHMARK(BM_Pipeline)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace
}  // namespace covuln

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::off);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
