#include "twinbridge/http_service.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace twinbridge {

HttpService::HttpService(std::string name, std::size_t worker_threads) : name_(std::move(name)) {
  server_.new_task_queue = [worker_threads] { return new httplib::ThreadPool(worker_threads); };
  server_.set_keep_alive_max_count(1000);
  server_.set_keep_alive_timeout(2);
  // httplib's default also sets SO_REUSEPORT, which lets a second service
  // bind an address that is already listening.
  server_.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
}

HttpService::~HttpService() { stop(); }

void HttpService::start(const std::string& host, int port) {
  if (running_) return;
  host_ = host;
  bool bound = false;
  if (port == 0) {
    int p = server_.bind_to_any_port(host);
    bound = p > 0;
    port_ = p;
  } else {
    bound = server_.bind_to_port(host, port);
    port_ = port;
  }
  if (!bound) throw Error(ErrorCode::PortInUse, fmt::format("{}:{}", host, port));
  running_ = true;
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  spdlog::debug("{} listening on {}", name_, base_url());
}

void HttpService::stop() {
  if (!running_.exchange(false)) return;
  stopping_ = true;
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::string HttpService::base_url() const { return fmt::format("http://{}:{}", host_, port_); }

void send_json(httplib::Response& res, const nlohmann::json& body, int status) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& detail, const char* status_word) {
  nlohmann::json body{{"status", status_word}, {"reason", std::string(to_string(code))}};
  if (!detail.empty()) body["detail"] = detail;
  send_json(res, body, http_status_for(code));
}

void send_error(httplib::Response& res, const Error& err, const char* status_word) {
  send_error(res, err.code(), err.detail(), status_word);
}

namespace {

void configure(httplib::Client& cli, std::chrono::milliseconds timeout) {
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
}

std::optional<HttpJsonResult> to_result(const httplib::Result& res) {
  if (!res) return std::nullopt;
  HttpJsonResult out;
  out.status = res->status;
  out.body = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  return out;
}

}  // namespace

std::optional<HttpJsonResult> http_get_json(const std::string& base_url, const std::string& path,
                                            std::chrono::milliseconds timeout) {
  httplib::Client cli(base_url);
  configure(cli, timeout);
  return to_result(cli.Get(path));
}

std::optional<HttpJsonResult> http_post_json(const std::string& base_url, const std::string& path,
                                             const nlohmann::json& body, std::chrono::milliseconds timeout) {
  httplib::Client cli(base_url);
  configure(cli, timeout);
  return to_result(cli.Post(path, body.dump(), "application/json"));
}

std::optional<ErrorCode> reason_of(const nlohmann::json& body) {
  if (!body.is_object()) return std::nullopt;
  auto it = body.find("reason");
  if (it == body.end() || !it->is_string()) return std::nullopt;
  return error_code_from_string(it->get<std::string>());
}

bool wait_until_healthy(const std::string& base_url, const std::string& path,
                        std::chrono::milliseconds deadline) {
  auto until = std::chrono::steady_clock::now() + deadline;
  while (std::chrono::steady_clock::now() < until) {
    auto res = http_get_json(base_url, path, std::chrono::milliseconds(500));
    if (res && res->status == 200) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return false;
}

}  // namespace twinbridge
