#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

namespace covuln::test {

/// In-process HTTP server on an ephemeral localhost port.
class FakeServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit FakeServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
      }
      ++hits_;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  FakeServer(const FakeServer&) = delete;
  FakeServer& operator=(const FakeServer&) = delete;

  [[nodiscard]] std::string url(const std::string& path = "/predict") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  [[nodiscard]] int hits() const noexcept { return hits_.load(); }
  [[nodiscard]] std::vector<httplib::Request> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
  mutable std::mutex mu_;
  std::vector<httplib::Request> requests_;
};

/// A detector that honours the wire contract: the score is a hash of the
/// code, so replies are deterministic.
inline void contract_detector(const httplib::Request& req, httplib::Response& res) {
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(req.body);
  } catch (const std::exception&) {
    res.status = 400;
    res.set_content(R"({"error":"malformed body"})", "application/json");
    return;
  }
  if (!body.contains("code") || !body["code"].is_string() || body["code"].get<std::string>().empty()) {
    res.status = 422;
    res.set_content(R"({"error":"empty code"})", "application/json");
    return;
  }
  const auto code = body["code"].get<std::string>();
  const double score = static_cast<double>(std::hash<std::string>{}(code) % 1000) / 1000.0;
  res.set_content(nlohmann::json{{"verdict", score >= 0.5 ? "vulnerable" : "clean"},
                                 {"score", score}}
                      .dump(),
                  "application/json");
}

}  // namespace covuln::test
