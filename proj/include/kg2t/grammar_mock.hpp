#pragma once

// Stand-in grammar checker that replays recorded responses. Texts without a
// recording get an empty match list.

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>

#include <json.hpp>

#include "kg2t/error.hpp"

namespace kg2t {

// Recordings file: [{"text": "...", "response": {"matches": [...]}}, ...]
inline std::map<std::string, std::string> read_recordings(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("IoError", "cannot open recordings " + p.string());
  std::map<std::string, std::string> out;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& r : j) out[r.at("text").get<std::string>()] = r.at("response").dump();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse(std::string("recordings: ") + e.what());
  }
  return out;
}

class MockChecker {
 public:
  explicit MockChecker(std::map<std::string, std::string> recordings)
      : recordings_(std::move(recordings)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (unavailable_) {
        res.status = 503;
        res.set_content(R"({"error":"unavailable"})", "application/json");
        return;
      }
      auto text = req.get_param_value("text");
      auto it = recordings_.find(text);
      res.set_content(it == recordings_.end() ? std::string(R"({"matches":[]})") : it->second,
                      "application/json");
    };
    server_.Post("/v2/check", handler);
    server_.Post("/check", handler);
  }

  ~MockChecker() { stop(); }
  MockChecker(const MockChecker&) = delete;
  MockChecker& operator=(const MockChecker&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw ServiceUnavailable("cannot bind mock checker");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Blocks serving on the calling thread.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw ServiceUnavailable("cannot bind mock checker");
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v2/check"; }
  void set_unavailable(bool v) { unavailable_ = v; }
  std::size_t requests() const { return requests_; }

 private:
  std::map<std::string, std::string> recordings_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<bool> unavailable_{false};
  std::atomic<std::size_t> requests_{0};
};

}  // namespace kg2t
