#include "covuln/http_backends.hpp"

#include <cstdlib>

#include <httplib.h>

#include "covuln/digest.hpp"

namespace covuln {
namespace {

httplib::Client make_client(const Url& url, std::chrono::milliseconds timeout) {
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

std::string post_json(const Url& url, std::chrono::milliseconds timeout,
                      const httplib::Headers& headers, const nlohmann::json& body) {
  auto client = make_client(url, timeout);
  auto res = client.Post(url.path, headers, canonical_json(body), "application/json");
  if (!res) {
    throw TransientError("POST " + url.origin + url.path + ": " + httplib::to_string(res.error()));
  }
  check_http_status(res->status, res->body);
  return res->body;
}

nlohmann::json parse_body(std::string_view body, const char* what) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError(std::string(what) + ": reply is not JSON");
  }
}

}  // namespace

Url parse_url(std::string_view url) {
  const auto scheme = url.find("://");
  const auto name = url.substr(0, scheme == std::string_view::npos ? 0 : scheme);
  if ((name != "http" && name != "https") || url.size() == scheme + 3) {
    throw ContractError("endpoint '" + std::string(url) + "' must be an http(s) URL");
  }
  const auto path = url.find('/', scheme + 3);
  if (path == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path)), std::string(url.substr(path))};
}

nlohmann::json detector_request(const CodeSample& sample) {
  return {{"id", sample.id}, {"code", sample.code}};
}

DetectorReply parse_detector_reply(std::string_view body, double threshold) {
  const auto j = parse_body(body, "detector");
  if (!j.is_object()) throw ProtocolError("detector: reply is not an object");
  const auto verdict = j.find("verdict");
  const auto score = j.find("score");
  if (verdict == j.end() || !verdict->is_string() ||
      !parse_verdict_word(verdict->get_ref<const std::string&>())) {
    throw ProtocolError("detector: 'verdict' must be \"vulnerable\" or \"clean\"");
  }
  if (score == j.end() || !score->is_number()) {
    throw ProtocolError("detector: 'score' must be a number");
  }
  const double s = score->get<double>();
  if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("detector: 'score' outside [0, 1]");
  return make_detector_reply(s, threshold);
}

nlohmann::json chat_request(const std::string& model, const Transcript& transcript,
                            double temperature, int max_tokens) {
  return {{"model", model},
          {"messages", to_json(transcript)},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"n", 1},
          {"stream", false}};
}

std::string parse_chat_reply(std::string_view body) {
  const auto j = parse_body(body, "llm");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("llm: message content is not a string");
    auto text = content.get<std::string>();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ProtocolError("llm: empty completion");
    }
    return text;
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("llm: reply lacks choices[0].message.content");
  }
}

void check_http_status(int status, std::string_view body) {
  if (status >= 200 && status < 300) return;
  std::string msg = "HTTP " + std::to_string(status);
  if (!body.empty()) msg += ": " + std::string(body.substr(0, 200));
  if (status == 408 || status == 429 || status >= 500) throw TransientError(msg);
  throw ProtocolError(msg);
}

HttpDetector::HttpDetector(HttpDetectorOptions options)
    : options_(std::move(options)), url_(parse_url(options_.url)) {}

std::string HttpDetector::identity() const { return "http:" + options_.url; }

DetectorReply HttpDetector::predict_impl(const CodeSample& sample) {
  return call_with_retry(
      options_.retry, sample.id,
      [&] {
        const auto body = post_json(url_, options_.timeout, {}, detector_request(sample));
        return parse_detector_reply(body, options_.threshold);
      },
      options_.on_retry);
}

HttpLlm::HttpLlm(HttpLlmOptions options)
    : options_(std::move(options)), url_(parse_url(options_.url)) {}

std::string HttpLlm::identity() const { return "http:" + options_.url + "#" + options_.model; }

std::string HttpLlm::chat_impl(const Transcript& transcript, const CallContext& ctx) {
  httplib::Headers headers;
  if (!options_.api_key_env.empty()) {
    if (const char* token = std::getenv(options_.api_key_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const auto request =
      chat_request(options_.model, transcript, options_.temperature, options_.max_tokens);
  return call_with_retry(
      options_.retry, ctx.sample,
      [&] { return parse_chat_reply(post_json(url_, options_.timeout, headers, request)); },
      options_.on_retry);
}

std::vector<ConformanceCheck> check_detector_contract(const std::string& url,
                                                      std::chrono::milliseconds timeout) {
  std::vector<ConformanceCheck> checks;
  const Url target = parse_url(url);
  auto post = [&](const std::string& body) {
    auto client = make_client(target, timeout);
    return client.Post(target.path, body, "application/json");
  };
  const CodeSample probe{1, "int add(int a, int b) { return a + b; }", Verdict::Clean};
  const auto probe_body = canonical_json(detector_request(probe));

  std::optional<DetectorReply> first;
  {
    ConformanceCheck c{"well-formed reply", false, ""};
    if (auto res = post(probe_body); !res) {
      c.detail = httplib::to_string(res.error());
    } else if (res->status != 200) {
      c.detail = "HTTP " + std::to_string(res->status);
    } else {
      try {
        const auto j = nlohmann::json::parse(res->body);
        const auto reply = parse_detector_reply(res->body);
        const auto word = parse_verdict_word(j.at("verdict").get<std::string>());
        if (word != reply.verdict) {
          c.detail = "verdict disagrees with score at threshold 0.5";
        } else {
          c.passed = true;
          first = reply;
        }
      } catch (const std::exception& e) {
        c.detail = e.what();
      }
    }
    checks.push_back(std::move(c));
  }
  {
    ConformanceCheck c{"deterministic repeat", false, ""};
    if (!first) {
      c.detail = "no baseline reply";
    } else if (auto res = post(probe_body); res && res->status == 200) {
      try {
        c.passed = parse_detector_reply(res->body) == *first;
        if (!c.passed) c.detail = "second reply differs";
      } catch (const std::exception& e) {
        c.detail = e.what();
      }
    } else {
      c.detail = "second request failed";
    }
    checks.push_back(std::move(c));
  }
  auto expect_rejected = [&](std::string name, const std::string& body) {
    ConformanceCheck c{std::move(name), false, ""};
    if (auto res = post(body); !res) {
      c.detail = httplib::to_string(res.error());
    } else {
      c.passed = res->status >= 400 && res->status < 500;
      if (!c.passed) c.detail = "expected 4xx, got HTTP " + std::to_string(res->status);
    }
    checks.push_back(std::move(c));
  };
  expect_rejected("empty code rejected", R"({"code":"","id":2})");
  expect_rejected("malformed body rejected", "this is not json");
  {
    ConformanceCheck c{"alive after bad requests", false, ""};
    auto res = post(probe_body);
    c.passed = res && res->status == 200;
    if (!c.passed) c.detail = res ? "HTTP " + std::to_string(res->status) : "no reply";
    checks.push_back(std::move(c));
  }
  return checks;
}

}  // namespace covuln
