#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "twinbridge/error.hpp"

namespace twinbridge {

/// Owns an httplib::Server and its listener thread.
class HttpService {
 public:
  explicit HttpService(std::string name, std::size_t worker_threads = 64);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  httplib::Server& server() { return server_; }

  /// Binds and starts serving. Port 0 picks an ephemeral port.
  /// Throws Error(PortInUse, "host:port") when the address cannot be bound.
  void start(const std::string& host, int port);
  /// Idempotent.
  void stop();

  bool running() const { return running_.load(); }
  /// Set once stop() begins; long-lived handlers poll it.
  bool stopping() const { return stopping_.load(); }
  int port() const { return port_; }
  const std::string& host() const { return host_; }
  std::string base_url() const;
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  httplib::Server server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<bool> stopping_{false};
};

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200);
/// `{"status": <status_word>, "reason": "<CODE>", "detail": "..."}` with the
/// HTTP status mapped from the code.
void send_error(httplib::Response& res, ErrorCode code, const std::string& detail = {},
                const char* status_word = "error");
void send_error(httplib::Response& res, const Error& err, const char* status_word = "error");

struct HttpJsonResult {
  int status = 0;
  nlohmann::json body;
};

/// GET returning the parsed body, or nullopt on transport failure
/// (connection refused, timeout).
std::optional<HttpJsonResult> http_get_json(const std::string& base_url, const std::string& path,
                                            std::chrono::milliseconds timeout);
std::optional<HttpJsonResult> http_post_json(const std::string& base_url, const std::string& path,
                                             const nlohmann::json& body, std::chrono::milliseconds timeout);

/// Reason code carried in an error body, if any.
std::optional<ErrorCode> reason_of(const nlohmann::json& body);

/// Polls `base_url + path` until it answers 200 or the deadline passes.
bool wait_until_healthy(const std::string& base_url, const std::string& path,
                        std::chrono::milliseconds deadline);

}  // namespace twinbridge
