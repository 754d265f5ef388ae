#include "covuln/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "covuln/ablation.hpp"
#include "covuln/config.hpp"
#include "covuln/digest.hpp"
#include "covuln/http_backends.hpp"
#include "covuln/response_cache.hpp"

namespace covuln {
namespace {

namespace fs = std::filesystem;

/// Bad flags, bad config values: exit 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// An input file or upstream artifact is absent: exit 2.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

/// Completed, but an acceptance or conformance check failed: exit 1.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

void require_input(const std::string& path, std::string_view what) {
  if (path.empty()) throw UsageError(std::string(what) + " not given");
  if (!fs::exists(path)) throw MissingArtifact(std::string(what) + " '" + path + "' not found");
}

void require_artifact(const std::string& path, std::string_view what, std::string_view producer) {
  if (!fs::exists(path)) {
    throw MissingArtifact(std::string(what) + " '" + path + "' not found; produce it with `covuln " +
                          std::string(producer) + "`");
  }
}

// ---- flags ------------------------------------------------------------------

enum class Kind { Str, Int, UInt, Real };

struct FlagSpec {
  const char* key;
  const char* flag;
  Kind kind;
  const char* help;
};

// Config-file keys that may be overridden on the command line.
const FlagSpec kFlags[] = {
    {"data", "--data", Kind::Str, "Dataset JSONL with records {idx, func, target}"},
    {"polarity", "--polarity", Kind::Str, "Meaning of target=1: 1-is-vulnerable or 1-is-clean"},
    {"ratios", "--ratios", Kind::Str, "Split ratios train,valid,test (default 0.8,0.1,0.1)"},
    {"seed", "--seed", Kind::UInt, "Seed for the split and few-shot selection (default 42)"},
    {"manifest", "--manifest", Kind::Str, "Split manifest path (default split.json)"},
    {"detector", "--detector", Kind::Str,
     "Detection backend: http(s)://..., scripted:<file> or statistical:tpr=..,fpr=..,seed=.."},
    {"llm", "--llm", Kind::Str, "LLM backend: http(s)://.../chat/completions or scripted:<file>"},
    {"validator", "--validator", Kind::Str,
     "Validation backend: http(s)://..., scripted:<file> or marker"},
    {"llm_model", "--llm-model", Kind::Str, "Model name sent to the LLM endpoint"},
    {"temperature", "--temperature", Kind::Real, "LLM sampling temperature (default 0)"},
    {"max_tokens", "--max-tokens", Kind::Int, "LLM reply token limit (default 512)"},
    {"threshold", "--threshold", Kind::Real, "Detector decision threshold on the score (default 0.5)"},
    {"timeout_ms", "--timeout-ms", Kind::Int, "Per-request timeout in milliseconds"},
    {"hint_mode", "--hint-mode", Kind::Str, "Refinement hint: detector, none, always_yes, always_no"},
    {"prompting", "--prompting", Kind::Str, "Prompting variant: plain, cot or fewshot"},
    {"fewshot_pos", "--fewshot-pos", Kind::UInt, "Vulnerable exemplars in few-shot prompts"},
    {"fewshot_neg", "--fewshot-neg", Kind::UInt, "Clean exemplars in few-shot prompts"},
    {"concurrency", "--concurrency", Kind::Int, "Samples in flight at once (1 = serial)"},
    {"retries", "--retries", Kind::Int, "Attempts per backend request, including the first"},
    {"backoff_ms", "--backoff-ms", Kind::Int, "Initial retry backoff; doubles per retry"},
    {"failure_threshold", "--failure-threshold", Kind::Real,
     "Abort when failed samples exceed this fraction (default 0.05)"},
    {"unknown_reasks", "--unknown-reasks", Kind::Int,
     "Re-asks of an unparseable LLM reply before recording Unknown"},
    {"llm_rps", "--llm-rps", Kind::Real, "LLM request rate limit per second (0 = unlimited)"},
    {"store", "--store", Kind::Str, "Assessment store JSONL (default assessments.jsonl)"},
    {"templates", "--templates", Kind::Str, "Prompt template JSON (default: built-in v1)"},
    {"cache", "--cache", Kind::Str, "Response cache JSONL shared between runs"},
    {"export_dir", "--export-dir", Kind::Str, "Directory of train/valid/test.jsonl exports"},
    {"tail_budget", "--tail-budget", Kind::Int, "Tokens the trainer reserves for the marker line"},
    {"trainer_command", "--trainer", Kind::Str, "Trainer command prefix"},
    {"encoder", "--encoder", Kind::Str, "Pre-trained encoder the trainer fine-tunes"},
    {"checkpoint", "--checkpoint", Kind::Str, "Trainer output directory"},
    {"epochs", "--epochs", Kind::Int, "Training epochs (default 4)"},
    {"lr", "--lr", Kind::Real, "Learning rate (default 2e-5)"},
    {"batch_size", "--batch-size", Kind::Int, "Batch size (default 12)"},
    {"max_length", "--max-length", Kind::Int, "Maximum sequence length (default 1024)"},
    {"run_manifest", "--run-manifest", Kind::Str, "Append a digest record of each run here"},
    {"acceptance.min_accuracy", "--min-accuracy", Kind::Real, "Exit 1 if accuracy is lower"},
    {"acceptance.min_precision", "--min-precision", Kind::Real, "Exit 1 if precision is lower"},
    {"acceptance.min_recall", "--min-recall", Kind::Real, "Exit 1 if recall is lower"},
    {"acceptance.min_f1", "--min-f1", Kind::Real, "Exit 1 if F1 is lower"},
};

nlohmann::json convert(const FlagSpec& spec, const std::string& text) {
  auto fail = [&] { return UsageError(std::string(spec.flag) + ": bad value '" + text + "'"); };
  const char* begin = text.data();
  const char* end = begin + text.size();
  switch (spec.kind) {
    case Kind::Str: return text;
    case Kind::Int: {
      long long v = 0;
      const auto [p, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || p != end) throw fail();
      return v;
    }
    case Kind::UInt: {
      unsigned long long v = 0;
      const auto [p, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || p != end) throw fail();
      return v;
    }
    case Kind::Real: {
      double v = 0.0;
      const auto [p, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || p != end) throw fail();
      return v;
    }
  }
  throw fail();
}

/// Collects config overrides from one subcommand's flags.
struct Overrides {
  std::vector<std::pair<const FlagSpec*, std::shared_ptr<std::string>>> values;
  std::vector<std::pair<const FlagSpec*, CLI::Option*>> options;
  bool no_verdict_token = false;
  CLI::Option* no_verdict_option = nullptr;

  void add(CLI::App* app, std::initializer_list<std::string_view> keys) {
    for (auto key : keys) {
      const FlagSpec* spec = nullptr;
      for (const auto& f : kFlags) {
        if (key == f.key) spec = &f;
      }
      if (!spec) throw std::logic_error("no flag for key " + std::string(key));
      auto holder = std::make_shared<std::string>();
      options.emplace_back(spec, app->add_option(spec->flag, *holder, spec->help));
      values.emplace_back(spec, holder);
    }
  }

  void add_no_verdict_token(CLI::App* app) {
    no_verdict_option = app->add_flag(
        "--no-verdict-token", no_verdict_token,
        "Marker line carries only the description, without YES/NO");
  }

  void apply(nlohmann::json& j) const {
    for (std::size_t i = 0; i < options.size(); ++i) {
      if (options[i].second->count() == 0) continue;
      const auto* spec = options[i].first;
      const std::string key = spec->key;
      const auto value = convert(*spec, *values[i].second);
      if (key.rfind("acceptance.", 0) == 0) {
        if (!j.contains("acceptance")) j["acceptance"] = nlohmann::json::object();
        j["acceptance"][key.substr(11)] = value;
      } else {
        j[key] = value;
      }
    }
    if (no_verdict_option && no_verdict_option->count() > 0) j["marker_verdict_token"] = false;
  }
};

// ---- shared plumbing --------------------------------------------------------

struct Env {
  std::ostream& out;
  std::ostream& err;
  RunConfig config;
};

struct LoadedSplit {
  Corpus corpus;
  SplitCorpus split;
  std::string dataset_digest;
};

LoadedSplit load_split(const RunConfig& c) {
  require_input(c.data, "dataset");
  require_artifact(c.manifest, "split manifest", "ingest");
  LoadedSplit s;
  s.corpus = load_corpus(c.data, c.polarity);
  s.dataset_digest = sha256_file(c.data);
  const auto manifest = read_manifest(c.manifest);
  if (manifest.dataset_digest != s.dataset_digest) {
    throw DataError("split manifest '" + c.manifest +
                    "' was built from a different dataset; rerun `covuln ingest`");
  }
  s.split = apply_manifest(s.corpus, manifest);
  return s;
}

std::unordered_map<SampleId, Verdict> truth_table(const Corpus& corpus) {
  std::unordered_map<SampleId, Verdict> out;
  for (const auto& s : corpus) out.emplace(s.id, s.label);
  return out;
}

const Corpus& select_part(const LoadedSplit& s, const std::string& part) {
  if (part == "train") return s.split.train;
  if (part == "valid") return s.split.valid;
  if (part == "test") return s.split.test;
  if (part == "all") return s.corpus;
  throw UsageError("--part must be train, valid, test or all");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void record_run(const Env& env, std::string_view command, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs) {
  if (env.config.run_manifest.empty()) return;
  auto digests = [](const std::vector<std::string>& paths) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& p : paths) {
      if (fs::is_regular_file(p)) j[p] = sha256_file(p);
    }
    return j;
  };
  std::ofstream log(env.config.run_manifest, std::ios::app | std::ios::binary);
  log << canonical_json({{"command", command},
                         {"config_sha256", config_digest(env.config)},
                         {"inputs", digests(inputs)},
                         {"outputs", digests(outputs)}})
      << '\n';
}

std::string fixed(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

void print_stats(std::ostream& out, const PipelineReport& r) {
  out << std::left << std::setw(7) << "part" << std::right << std::setw(9) << "samples"
      << std::setw(8) << "cached" << std::setw(10) << "assessed" << std::setw(8) << "failed"
      << std::setw(8) << "agree" << std::setw(10) << "disagree" << std::setw(9) << "refined"
      << std::setw(9) << "unknown" << '\n';
  auto row = [&](std::string_view name, const PartStats& p) {
    out << std::left << std::setw(7) << name << std::right << std::setw(9) << p.total
        << std::setw(8) << p.cached << std::setw(10) << p.assessed << std::setw(8) << p.failed
        << std::setw(8) << p.agreements << std::setw(10) << p.disagreements << std::setw(9)
        << p.refinements << std::setw(9) << p.unknown << '\n';
  };
  for (auto part : kAllParts) row(to_string(part), r.part(part));
  row("total", r.totals());
  out << (r.detector_calls + r.llm_calls) << " calls issued (" << r.detector_calls
      << " detector, " << r.llm_calls << " llm)\n";
}

void check_acceptance(const AcceptanceThresholds& a, const MetricsReport& m) {
  std::vector<std::string> missed;
  auto check = [&](const std::optional<double>& min, double value, std::string_view name) {
    if (min && value < *min) {
      missed.push_back(std::string(name) + " " + fixed(value) + " < " + fixed(*min));
    }
  };
  check(a.accuracy, m.accuracy, "accuracy");
  check(a.precision, m.precision, "precision");
  check(a.recall, m.recall, "recall");
  check(a.f1, m.f1, "f1");
  if (missed.empty()) return;
  std::string msg = "acceptance threshold missed:";
  for (const auto& s : missed) msg += " " + s + ";";
  msg.pop_back();
  throw CheckFailed(msg);
}

PredictionMap read_predictions(const std::string& path) {
  require_input(path, "predictions file");
  std::ifstream in(path, std::ios::binary);
  PredictionMap out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("idx").get<SampleId>();
      std::optional<Verdict> v;
      if (j.contains("verdict")) {
        v = parse_verdict_word(j.at("verdict").get<std::string>());
      } else {
        v = from_canonical(j.at("target").get<std::int64_t>());
      }
      if (!v) throw DataError("verdict must be vulnerable/clean or target 0/1");
      if (!out.emplace(id, *v).second) throw DataError("duplicate idx " + std::to_string(id));
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_predictions(const std::string& path, const PredictionMap& preds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  for (const auto& [id, v] : preds) {
    out << canonical_json({{"idx", id}, {"verdict", to_string(v)}}) << '\n';
  }
}

void emit_rows(const Env& env, const std::vector<ReportRow>& rows, const std::string& format,
               const std::string& report) {
  if (format == "jsonl") {
    env.out << format_jsonl(rows);
  } else if (format == "table") {
    env.out << format_table(rows);
  } else {
    throw UsageError("--format must be table or jsonl");
  }
  if (!report.empty()) {
    std::ofstream f(report, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + report + "'");
    f << format_jsonl(rows);
  }
}

/// Optional response cache wrapping both backends.
struct CachedBackends {
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<CachingDetector> detector;
  std::unique_ptr<CachingLlm> llm;
};

// ---- commands ---------------------------------------------------------------

int cmd_ingest(Env& env) {
  const auto& c = env.config;
  require_input(c.data, "dataset");
  const auto corpus = load_corpus(c.data, c.polarity);
  const auto split = split_stratified(corpus, c.ratios, c.seed);
  const auto manifest = make_manifest(split, sha256_file(c.data));
  write_manifest(c.manifest, manifest);
  env.out << "ingested " << corpus.size() << " samples from " << c.data << " ("
          << corpus.count(Verdict::Vulnerable) << " vulnerable, ratio "
          << fixed(class_ratio(corpus)) << ")\n";
  for (auto part : kAllParts) {
    const auto& p = split.part(part);
    env.out << "  " << std::left << std::setw(6) << to_string(part) << std::right
            << std::setw(7) << p.size() << " samples, " << p.count(Verdict::Vulnerable)
            << " vulnerable\n";
  }
  env.out << "manifest " << c.manifest << " sha256 " << sha256_file(c.manifest) << '\n';
  record_run(env, "ingest", {c.data}, {c.manifest});
  return 0;
}

int cmd_assess(Env& env) {
  const auto& c = env.config;
  const auto loaded = load_split(c);
  auto detector = make_detector(c.detector, c, truth_table(loaded.corpus));
  auto llm = make_llm(c.llm, c);
  const auto options = pipeline_options(c);

  CachedBackends cached;
  DetectorBackend* d = detector.get();
  LlmBackend* l = llm.get();
  if (!c.cache.empty()) {
    cached.cache = std::make_unique<ResponseCache>(c.cache);
    cached.detector = std::make_unique<CachingDetector>(*detector, *cached.cache);
    cached.llm = std::make_unique<CachingLlm>(*llm, *cached.cache);
    d = cached.detector.get();
    l = cached.llm.get();
  }

  auto store = AssessmentStore::open(
      c.store, StoreManifest{assessment_config(c, *detector, *llm, loaded.dataset_digest),
                             options.templates.version});
  try {
    const auto report = run_pipeline(loaded.split, {*d, *l}, store, options);
    print_stats(env.out, report);
  } catch (const RunAborted& e) {
    print_stats(env.out, e.report());
    env.err << "assess aborted: " << e.what() << "; completed assessments kept in " << c.store
            << '\n';
    return 1;
  }
  env.out << "store " << c.store << " sha256 " << sha256_file(c.store) << '\n';
  record_run(env, "assess", {c.data, c.manifest}, {c.store});
  return 0;
}

int cmd_synthesize(Env& env) {
  const auto& c = env.config;
  const auto loaded = load_split(c);
  require_artifact(c.store, "assessment store", "assess");
  const auto store = AssessmentStore::load(c.store);
  const auto summary = export_training_set(loaded.split, store, c.export_dir, marker_options(c));
  std::size_t unknown = 0;
  for (const auto& id : store.ids()) {
    if (loaded.split.find(id) && store.find(id)->llm_final.unknown()) ++unknown;
  }
  std::vector<std::string> outputs;
  for (std::size_t p = 0; p < kAllParts.size(); ++p) {
    env.out << summary.files[p].string() << ": " << summary.records[p] << " records\n";
    outputs.push_back(summary.files[p].string());
  }
  if (unknown > 0) env.out << unknown << " sample(s) without an LLM verdict rendered as NO\n";
  record_run(env, "synthesize", {c.data, c.manifest, c.store}, outputs);
  return 0;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') {
      out += "'\\''";
    } else {
      out += ch;
    }
  }
  return out + "'";
}

int cmd_train(Env& env) {
  const auto& c = env.config;
  const auto train = (fs::path(c.export_dir) / "train.jsonl").string();
  const auto valid = (fs::path(c.export_dir) / "valid.jsonl").string();
  require_artifact(train, "training export", "synthesize");
  require_artifact(valid, "validation export", "synthesize");
  std::ostringstream cmd;
  cmd << c.trainer_command << " --train " << shell_quote(train) << " --valid "
      << shell_quote(valid) << " --output " << shell_quote(c.checkpoint) << " --encoder "
      << shell_quote(c.encoder) << " --epochs " << c.epochs << " --lr " << c.lr
      << " --batch-size " << c.batch_size << " --max-length " << c.max_length
      << " --tail-budget " << c.tail_budget << " --seed " << c.seed;
  env.out << "running: " << cmd.str() << '\n';
  env.out.flush();
  const int status = std::system(cmd.str().c_str());
  if (status != 0) {
    env.err << "trainer failed (status " << status << ")\n";
    return 1;
  }
  record_run(env, "train", {train, valid}, {});
  return 0;
}

int cmd_predict(Env& env, const std::string& code_path, SampleId id) {
  const auto& c = env.config;
  require_input(code_path, "code file");
  std::ifstream in(code_path, std::ios::binary);
  CodeSample sample{id, std::string(std::istreambuf_iterator<char>(in), {}), Verdict::Clean};
  if (sample.code.empty()) throw DataError("code file '" + code_path + "' is empty");

  std::vector<CodeSample> pool;
  if (c.prompting == PromptingVariant::FewShot) {
    const auto loaded = load_split(c);
    pool.assign(loaded.split.train.begin(), loaded.split.train.end());
  }
  auto detector = make_detector(c.detector, c);
  auto llm = make_llm(c.llm, c);
  if (c.validator.empty()) throw UsageError("predict needs --validator");
  auto validator = make_detector(c.validator, c);

  const auto assessment = assess_one(sample, {*detector, *llm}, pipeline_options(c), pool);
  if (assessment.status != AssessmentStatus::Complete) {
    env.err << "assessment failed: " << assessment.error << '\n';
    return 1;
  }
  const auto enriched = enrich(sample, assessment, marker_options(c));
  const auto reply = validator->predict({sample.id, enriched.text, Verdict::Clean});

  const auto& final = assessment.llm_final;
  nlohmann::json description = nullptr;
  if (final.verdict == Verdict::Vulnerable && final.description) description = *final.description;
  auto verdict_or_null = [](const std::optional<Verdict>& v) -> nlohmann::json {
    if (!v) return nullptr;
    return std::string(to_string(*v));
  };
  env.out << canonical_json(
                 {{"id", sample.id},
                  {"verdict", to_string(reply.verdict)},
                  {"score", reply.score},
                  {"description", description},
                  {"detector_verdict", to_string(assessment.detector.verdict)},
                  {"llm_verdict", verdict_or_null(final.verdict)},
                  {"refined", assessment.refined},
                  {"provenance",
                   {{"assessment_sha256", enriched.provenance},
                    {"code_sha256", sha256_hex(sample.code)},
                    {"config_sha256", config_digest(c)},
                    {"detector", detector->identity()},
                    {"llm", llm->identity()},
                    {"validator", validator->identity()}}}})
          << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string predictions;
  std::string field;
  std::string part = "test";
  std::string format = "table";
  std::string report;
  std::string write_predictions;
  std::string name;
};

int cmd_evaluate(Env& env, const EvaluateArgs& a) {
  const auto& c = env.config;
  const auto loaded = load_split(c);
  const auto& samples = select_part(loaded, a.part);
  PredictionMap preds;
  std::string name = a.name;
  if (!a.predictions.empty()) {
    preds = read_predictions(a.predictions);
    if (name.empty()) name = fs::path(a.predictions).filename().string();
  } else if (!a.field.empty()) {
    require_artifact(c.store, "assessment store", "assess");
    preds = predictions_from_store(samples, AssessmentStore::load(c.store), parse_scorer(a.field));
    if (name.empty()) name = a.field;
  } else if (!c.validator.empty()) {
    require_artifact(c.store, "assessment store", "assess");
    auto validator = make_detector(c.validator, c);
    preds = validator_predictions(samples, AssessmentStore::load(c.store), *validator,
                                  marker_options(c), c.concurrency);
    if (name.empty()) name = "validator";
  } else {
    throw UsageError("evaluate needs --predictions, --field or --validator");
  }
  if (!a.write_predictions.empty()) write_predictions(a.write_predictions, preds);

  ReportRow row;
  row.name = name;
  row.metrics = metrics(confusion(preds, truths_of(samples)));
  emit_rows(env, {row}, a.format, a.report);
  record_run(env, "evaluate", {c.data, c.manifest, c.store, a.predictions},
             {a.report, a.write_predictions});
  check_acceptance(c.acceptance, row.metrics);
  return 0;
}

int cmd_compare(Env& env, const std::vector<std::string>& models, const std::string& part,
                const std::string& format) {
  if (models.size() < 2 || models.size() > 3) throw UsageError("compare needs 2 or 3 --model");
  const auto loaded = load_split(env.config);
  std::vector<NamedPredictions> results;
  for (const auto& m : models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) throw UsageError("--model expects NAME=FILE, got '" + m + "'");
    results.push_back({m.substr(0, eq), read_predictions(m.substr(eq + 1))});
  }
  const auto report = compare_models(results, truths_of(select_part(loaded, part)));
  if (format == "json") {
    env.out << to_json(report).dump(2) << '\n';
  } else if (format == "table") {
    env.out << format_overlap(report);
  } else {
    throw UsageError("--format must be table or json");
  }
  return 0;
}

struct AblateArgs {
  std::string modes;
  std::string promptings;
  std::string scorers;
  std::string format = "table";
  std::string report;
};

int cmd_ablate(Env& env, const AblateArgs& a) {
  const auto& c = env.config;
  const auto loaded = load_split(c);
  std::unique_ptr<DetectorBackend> detector;
  std::unique_ptr<LlmBackend> llm;
  std::unique_ptr<DetectorBackend> validator;
  if (!c.detector.empty()) detector = make_detector(c.detector, c, truth_table(loaded.corpus));
  if (!c.llm.empty()) llm = make_llm(c.llm, c);
  if (!c.validator.empty()) validator = make_detector(c.validator, c);

  const auto modes = a.modes.empty() ? std::vector<std::string>{std::string(to_string(c.hint_mode))}
                                     : split_list(a.modes);
  const auto promptings = a.promptings.empty()
                              ? std::vector<std::string>{std::string(to_string(c.prompting))}
                              : split_list(a.promptings);
  const auto scorers =
      a.scorers.empty() ? std::vector<std::string>{validator ? "validator" : "llm_final"}
                        : split_list(a.scorers);
  const auto base = pipeline_options(c);
  std::vector<AblationRow> rows;
  for (const auto& mode : modes) {
    for (const auto& prompting : promptings) {
      for (const auto& scorer : scorers) {
        AblationRow row;
        row.options = base;
        try {
          row.options.hint_mode = parse_hint_mode(mode);
          row.options.prompting = parse_prompting_variant(prompting);
          row.scorer = parse_scorer(scorer);
        } catch (const ContractError& e) {
          throw UsageError(e.what());
        }
        row.name = mode;
        if (promptings.size() > 1) row.name += "/" + prompting;
        if (scorers.size() > 1) row.name += "/" + scorer;
        row.detector = detector.get();
        row.llm = llm.get();
        row.validator = validator.get();
        row.marker = marker_options(c);
        rows.push_back(std::move(row));
      }
    }
  }
  auto cache = c.cache.empty() ? std::make_unique<ResponseCache>()
                               : std::make_unique<ResponseCache>(c.cache);
  const auto results = run_ablation(rows, loaded.split, *cache);
  std::vector<ReportRow> table;
  for (const auto& r : results) table.push_back(r.row);
  emit_rows(env, table, a.format, a.report);
  return 0;
}

int cmd_conform(Env& env, std::string url) {
  if (url.empty()) url = env.config.detector;
  if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) {
    throw UsageError("conform needs an http(s) detector URL (--url)");
  }
  const auto checks =
      check_detector_contract(url, std::chrono::milliseconds(env.config.timeout_ms));
  bool ok = true;
  for (const auto& ch : checks) {
    env.out << (ch.passed ? "PASS " : "FAIL ") << ch.name;
    if (!ch.detail.empty()) env.out << ": " << ch.detail;
    env.out << '\n';
    ok = ok && ch.passed;
  }
  if (!ok) throw CheckFailed("detector at " + url + " violates the wire contract");
  return 0;
}

/// Routes spdlog output to `err` for the duration of a command.
class LogScope {
 public:
  LogScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("covuln", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collaborative vulnerability detection: a detection model and an LLM assess code "
               "together; the fused text trains a validation model.",
               "covuln"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, "JSON run configuration; flags override its values");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::map<CLI::App*, Overrides> overrides;
  auto sub = [&](const char* name, const char* help,
                 std::initializer_list<std::string_view> keys) {
    auto* s = app.add_subcommand(name, help);
    overrides[s].add(s, keys);
    return s;
  };

  auto* ingest = sub("ingest", "Load a dataset and write its stratified split manifest",
                     {"data", "polarity", "ratios", "seed", "manifest", "run_manifest"});
  auto* assess = sub("assess", "Run Phase I and Phase II over all three split parts",
                     {"data", "polarity", "manifest", "detector", "llm", "llm_model",
                      "temperature", "max_tokens", "threshold", "timeout_ms", "hint_mode",
                      "prompting", "fewshot_pos", "fewshot_neg", "seed", "concurrency",
                      "retries", "backoff_ms", "failure_threshold", "unknown_reasks", "llm_rps",
                      "store", "templates", "cache", "run_manifest"});
  auto* synthesize = sub("synthesize", "Fuse code with the final LLM verdict and export the splits",
                         {"data", "polarity", "manifest", "store", "export_dir", "run_manifest"});
  overrides[synthesize].add_no_verdict_token(synthesize);
  auto* train = sub("train", "Fine-tune the validation model on the exports (external trainer)",
                    {"export_dir", "trainer_command", "encoder", "checkpoint", "epochs", "lr",
                     "batch_size", "max_length", "tail_budget", "seed", "run_manifest"});
  auto* predict = sub("predict", "Assess one code file and ask the validation model for a verdict",
                      {"detector", "llm", "validator", "llm_model", "temperature", "max_tokens",
                       "threshold", "timeout_ms", "hint_mode", "prompting", "fewshot_pos",
                       "fewshot_neg", "seed", "retries", "backoff_ms", "unknown_reasks",
                       "templates", "data", "polarity", "manifest"});
  overrides[predict].add_no_verdict_token(predict);
  auto* evaluate = sub("evaluate", "Score predictions against the split's ground truth",
                       {"data", "polarity", "manifest", "store", "validator", "threshold",
                        "timeout_ms", "retries", "backoff_ms", "concurrency", "run_manifest",
                        "acceptance.min_accuracy", "acceptance.min_precision",
                        "acceptance.min_recall", "acceptance.min_f1"});
  overrides[evaluate].add_no_verdict_token(evaluate);
  auto* compare = sub("compare", "Overlap of correct detections and misses across 2-3 models",
                      {"data", "polarity", "manifest"});
  auto* ablate = sub("ablate", "Run a matrix of configurations and tabulate their metrics",
                     {"data", "polarity", "manifest", "detector", "llm", "validator", "llm_model",
                      "temperature", "max_tokens", "threshold", "timeout_ms", "hint_mode",
                      "prompting", "fewshot_pos", "fewshot_neg", "seed", "concurrency",
                      "retries", "backoff_ms", "failure_threshold", "unknown_reasks", "llm_rps",
                      "templates", "cache"});
  overrides[ablate].add_no_verdict_token(ablate);
  auto* conform = sub("conform", "Check a detector server against the wire contract",
                      {"detector", "timeout_ms"});

  std::string code_path;
  SampleId code_id = 0;
  predict->add_option("--code", code_path, "Source file holding one function")->required();
  predict->add_option("--id", code_id, "Sample id sent to the backends (default 0)");

  EvaluateArgs ev;
  evaluate->add_option("--predictions", ev.predictions,
                       "JSONL predictions {idx, verdict} to score");
  evaluate->add_option("--field", ev.field,
                       "Score a stored verdict: llm_initial, llm_final or detector");
  evaluate->add_option("--part", ev.part, "Split part to score: train, valid, test or all");
  evaluate->add_option("--format", ev.format, "Output format: table or jsonl");
  evaluate->add_option("--report", ev.report, "Also write the JSONL report here");
  evaluate->add_option("--write-predictions", ev.write_predictions,
                       "Write the scored predictions as JSONL");
  evaluate->add_option("--name", ev.name, "Row name in the report");

  std::vector<std::string> models;
  std::string compare_part = "test";
  std::string compare_format = "table";
  compare->add_option("--model", models, "NAME=FILE predictions; give 2 or 3")->required();
  compare->add_option("--part", compare_part, "Split part: train, valid, test or all");
  compare->add_option("--format", compare_format, "Output format: table or json");

  AblateArgs ab;
  ablate->add_option("--modes", ab.modes, "Comma-separated hint modes");
  ablate->add_option("--promptings", ab.promptings, "Comma-separated prompting variants");
  ablate->add_option("--scorers", ab.scorers,
                     "Comma-separated scorers: llm_initial, llm_final, detector, validator");
  ablate->add_option("--format", ab.format, "Output format: table or jsonl");
  ablate->add_option("--report", ab.report, "Also write the JSONL report here");

  std::string url;
  conform->add_option("--url", url, "Detector endpoint, e.g. http://localhost:8000/predict");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  LogScope log_scope(err, log_level);
  try {
    CLI::App* chosen = app.get_subcommands().front();
    Env env{out, err, {}};
    try {
      nlohmann::json j = nlohmann::json::object();
      if (!config_path.empty()) {
        require_input(config_path, "config file");
        std::ifstream in(config_path, std::ios::binary);
        j = nlohmann::json::parse(in);
      }
      overrides.at(chosen).apply(j);
      env.config = config_from_json(j);
    } catch (const nlohmann::json::parse_error& e) {
      throw UsageError("config '" + config_path + "': " + e.what());
    } catch (const ContractError& e) {
      throw UsageError(e.what());
    }

    if (chosen == ingest) return cmd_ingest(env);
    if (chosen == assess) return cmd_assess(env);
    if (chosen == synthesize) return cmd_synthesize(env);
    if (chosen == train) return cmd_train(env);
    if (chosen == predict) return cmd_predict(env, code_path, code_id);
    if (chosen == evaluate) return cmd_evaluate(env, ev);
    if (chosen == compare) return cmd_compare(env, models, compare_part, compare_format);
    if (chosen == ablate) return cmd_ablate(env, ab);
    if (chosen == conform) return cmd_conform(env, url);
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const CheckFailed& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace covuln
