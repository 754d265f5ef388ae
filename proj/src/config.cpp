#include "covuln/config.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include "covuln/digest.hpp"
#include "covuln/http_backends.hpp"
#include "covuln/mock_backends.hpp"

namespace covuln {
namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ContractError("bad number for '" + std::string(key) + "': '" + std::string(text) + "'");
  }
  return v;
}

/// "tpr=0.55,fpr=0.25,seed=7" -> key/value pairs.
std::map<std::string, std::string> parse_params(std::string_view text) {
  std::map<std::string, std::string> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ContractError("expected key=value in backend spec, got '" + std::string(item) + "'");
    }
    out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

SplitRatios ratios_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_ratios(j.get<std::string>());
  if (!j.is_array() || j.size() != 3) throw ContractError("ratios must be three numbers");
  SplitRatios r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  return parse_ratios(std::to_string(r.train) + "," + std::to_string(r.valid) + "," +
                      std::to_string(r.test));
}

nlohmann::json acceptance_json(const AcceptanceThresholds& a) {
  nlohmann::json j = nlohmann::json::object();
  if (a.accuracy) j["min_accuracy"] = *a.accuracy;
  if (a.precision) j["min_precision"] = *a.precision;
  if (a.recall) j["min_recall"] = *a.recall;
  if (a.f1) j["min_f1"] = *a.f1;
  return j;
}

AcceptanceThresholds acceptance_from_json(const nlohmann::json& j) {
  AcceptanceThresholds a;
  for (const auto& [key, value] : j.items()) {
    if (key == "min_accuracy") {
      a.accuracy = value.get<double>();
    } else if (key == "min_precision") {
      a.precision = value.get<double>();
    } else if (key == "min_recall") {
      a.recall = value.get<double>();
    } else if (key == "min_f1") {
      a.f1 = value.get<double>();
    } else {
      throw ContractError("unknown acceptance key '" + key + "'");
    }
  }
  return a;
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  return {
      {"data", c.data},
      {"polarity", to_string(c.polarity)},
      {"ratios", {c.ratios.train, c.ratios.valid, c.ratios.test}},
      {"seed", c.seed},
      {"manifest", c.manifest},
      {"detector", c.detector},
      {"llm", c.llm},
      {"validator", c.validator},
      {"llm_model", c.llm_model},
      {"temperature", c.temperature},
      {"max_tokens", c.max_tokens},
      {"threshold", c.threshold},
      {"timeout_ms", c.timeout_ms},
      {"hint_mode", to_string(c.hint_mode)},
      {"prompting", to_string(c.prompting)},
      {"fewshot_pos", c.fewshot.vulnerable},
      {"fewshot_neg", c.fewshot.clean},
      {"concurrency", c.concurrency},
      {"retries", c.retries},
      {"backoff_ms", c.backoff_ms},
      {"failure_threshold", c.failure_threshold},
      {"unknown_reasks", c.unknown_reasks},
      {"llm_rps", c.llm_rps},
      {"store", c.store},
      {"templates", c.templates},
      {"cache", c.cache},
      {"export_dir", c.export_dir},
      {"marker_verdict_token", c.marker_verdict_token},
      {"tail_budget", c.tail_budget},
      {"trainer_command", c.trainer_command},
      {"encoder", c.encoder},
      {"checkpoint", c.checkpoint},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"max_length", c.max_length},
      {"acceptance", acceptance_json(c.acceptance)},
      {"run_manifest", c.run_manifest},
  };
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  static const std::set<std::string> secrets{"api_key", "token", "llm_api_key", "authorization"};
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (secrets.count(key)) {
        throw ContractError("secrets are read from the environment only, not from config");
      } else if (key == "data") {
        c.data = v.get<std::string>();
      } else if (key == "polarity") {
        c.polarity = parse_polarity(v.get<std::string>());
      } else if (key == "ratios") {
        c.ratios = ratios_from_json(v);
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "manifest") {
        c.manifest = v.get<std::string>();
      } else if (key == "detector") {
        c.detector = v.get<std::string>();
      } else if (key == "llm") {
        c.llm = v.get<std::string>();
      } else if (key == "validator") {
        c.validator = v.get<std::string>();
      } else if (key == "llm_model") {
        c.llm_model = v.get<std::string>();
      } else if (key == "temperature") {
        c.temperature = v.get<double>();
      } else if (key == "max_tokens") {
        c.max_tokens = v.get<int>();
      } else if (key == "threshold") {
        c.threshold = v.get<double>();
      } else if (key == "timeout_ms") {
        c.timeout_ms = v.get<int>();
      } else if (key == "hint_mode") {
        c.hint_mode = parse_hint_mode(v.get<std::string>());
      } else if (key == "prompting") {
        c.prompting = parse_prompting_variant(v.get<std::string>());
      } else if (key == "fewshot_pos") {
        c.fewshot.vulnerable = v.get<std::size_t>();
      } else if (key == "fewshot_neg") {
        c.fewshot.clean = v.get<std::size_t>();
      } else if (key == "concurrency") {
        c.concurrency = v.get<int>();
      } else if (key == "retries") {
        c.retries = v.get<int>();
      } else if (key == "backoff_ms") {
        c.backoff_ms = v.get<int>();
      } else if (key == "failure_threshold") {
        c.failure_threshold = v.get<double>();
      } else if (key == "unknown_reasks") {
        c.unknown_reasks = v.get<int>();
      } else if (key == "llm_rps") {
        c.llm_rps = v.get<double>();
      } else if (key == "store") {
        c.store = v.get<std::string>();
      } else if (key == "templates") {
        c.templates = v.get<std::string>();
      } else if (key == "cache") {
        c.cache = v.get<std::string>();
      } else if (key == "export_dir") {
        c.export_dir = v.get<std::string>();
      } else if (key == "marker_verdict_token") {
        c.marker_verdict_token = v.get<bool>();
      } else if (key == "tail_budget") {
        c.tail_budget = v.get<int>();
      } else if (key == "trainer_command") {
        c.trainer_command = v.get<std::string>();
      } else if (key == "encoder") {
        c.encoder = v.get<std::string>();
      } else if (key == "checkpoint") {
        c.checkpoint = v.get<std::string>();
      } else if (key == "epochs") {
        c.epochs = v.get<int>();
      } else if (key == "lr") {
        c.lr = v.get<double>();
      } else if (key == "batch_size") {
        c.batch_size = v.get<int>();
      } else if (key == "max_length") {
        c.max_length = v.get<int>();
      } else if (key == "acceptance") {
        c.acceptance = acceptance_from_json(v);
      } else if (key == "run_manifest") {
        c.run_manifest = v.get<std::string>();
      } else {
        throw ContractError("unknown config key");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ContractError("config key '" + key + "': " + e.what());
    } catch (const Error& e) {
      throw ContractError("config key '" + key + "': " + e.what());
    }
  }
  if (c.concurrency < 1) throw ContractError("concurrency must be >= 1");
  if (c.retries < 1) throw ContractError("retries must be >= 1");
  if (c.failure_threshold < 0.0 || c.failure_threshold > 1.0) {
    throw ContractError("failure_threshold must lie in [0, 1]");
  }
  if (c.threshold < 0.0 || c.threshold > 1.0) throw ContractError("threshold must lie in [0, 1]");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string config_digest(const RunConfig& config) { return json_digest(to_json(config)); }

RetryPolicy retry_policy(const RunConfig& config) {
  RetryPolicy p;
  p.max_attempts = config.retries;
  p.initial_backoff = std::chrono::milliseconds(config.backoff_ms);
  return p;
}

PipelineOptions pipeline_options(const RunConfig& config) {
  PipelineOptions o;
  o.hint_mode = config.hint_mode;
  o.prompting = config.prompting;
  o.fewshot = config.fewshot;
  o.seed = config.seed;
  o.concurrency = config.concurrency;
  o.failure_threshold = config.failure_threshold;
  o.unknown_reasks = config.unknown_reasks;
  o.llm_requests_per_second = config.llm_rps;
  o.templates = config.templates.empty() ? PromptTemplates::defaults()
                                         : PromptTemplates::load(config.templates);
  return o;
}

MarkerOptions marker_options(const RunConfig& config) {
  return MarkerOptions{config.marker_verdict_token};
}

nlohmann::json assessment_config(const RunConfig& config, const DetectorBackend& detector,
                                 const LlmBackend& llm, const std::string& dataset_digest) {
  nlohmann::json j{
      {"dataset_sha256", dataset_digest},
      {"detector", detector.identity()},
      {"llm", llm.identity()},
      {"hint_mode", to_string(config.hint_mode)},
      {"prompting", to_string(config.prompting)},
      {"temperature", config.temperature},
      {"max_tokens", config.max_tokens},
      {"threshold", config.threshold},
      {"unknown_reasks", config.unknown_reasks},
  };
  if (config.prompting == PromptingVariant::FewShot) {
    j["fewshot"] = {config.fewshot.vulnerable, config.fewshot.clean};
    j["seed"] = config.seed;
  }
  return j;
}

std::unique_ptr<DetectorBackend> make_detector(
    const std::string& spec, const RunConfig& config,
    const std::unordered_map<SampleId, Verdict>& truths) {
  if (starts_with(spec, "http://") || starts_with(spec, "https://")) {
    HttpDetectorOptions o;
    o.url = spec;
    o.timeout = std::chrono::milliseconds(config.timeout_ms);
    o.retry = retry_policy(config);
    o.threshold = config.threshold;
    return std::make_unique<HttpDetector>(std::move(o));
  }
  if (starts_with(spec, "scripted:")) {
    return ScriptedDetector::load(spec.substr(9), config.threshold);
  }
  if (starts_with(spec, "statistical:") || spec == "statistical") {
    DetectorRates rates;
    std::uint64_t seed = config.seed;
    const auto params = parse_params(spec == "statistical" ? "" : std::string_view(spec).substr(12));
    for (const auto& [k, v] : params) {
      if (k == "tpr") {
        rates.true_positive_rate = parse_double(k, v);
      } else if (k == "fpr") {
        rates.false_positive_rate = parse_double(k, v);
      } else if (k == "seed") {
        seed = static_cast<std::uint64_t>(parse_double(k, v));
      } else {
        throw ContractError("unknown statistical detector parameter '" + k + "'");
      }
    }
    return std::make_unique<StatisticalDetector>(rates, seed, truths);
  }
  if (spec == "marker") return std::make_unique<MarkerValidator>();
  if (spec.empty()) throw ContractError("no detector backend configured");
  throw ContractError("unrecognized detector spec '" + spec +
                      "' (expected http(s)://..., scripted:<file>, statistical:... or marker)");
}

std::unique_ptr<LlmBackend> make_llm(const std::string& spec, const RunConfig& config) {
  if (starts_with(spec, "http://") || starts_with(spec, "https://")) {
    HttpLlmOptions o;
    o.url = spec;
    o.model = config.llm_model;
    o.temperature = config.temperature;
    o.max_tokens = config.max_tokens;
    o.timeout = std::chrono::milliseconds(config.timeout_ms);
    o.retry = retry_policy(config);
    return std::make_unique<HttpLlm>(std::move(o));
  }
  if (starts_with(spec, "scripted:")) return ScriptedLlm::load(spec.substr(9));
  if (spec.empty()) throw ContractError("no llm backend configured");
  throw ContractError("unrecognized llm spec '" + spec +
                      "' (expected http(s)://... or scripted:<file>)");
}

}  // namespace covuln
