#pragma once

// Shared fixtures for the unit and acceptance suites: reading builders,
// free loopback ports and a minimal child-process wrapper.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "twinbridge/model.hpp"

extern char** environ;

namespace tbtest {

using namespace twinbridge;

inline SensorReading iaq(std::string id, TimestampMs ts, double temp = 30.2, double pm25 = 12.0,
                         double co2 = 650.0) {
  return {std::move(id), ts, IaqPayload{temp, pm25, co2}};
}

inline SensorReading fan(std::string id, TimestampMs ts, double rpm = 120.0) {
  return {std::move(id), ts, FanPayload{rpm}};
}

inline SensorReading weather(std::string id, TimestampMs ts, double wind = 3.4, double humidity = 78.0) {
  return {std::move(id), ts, WeatherPayload{wind, humidity}};
}

/// Asks the kernel for an unused loopback port. The port is released before
/// returning, so a later bind can still race with other processes.
inline int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw std::runtime_error("bind");
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

inline std::string temp_path(const std::string& stem) {
  return "/tmp/" + stem + "-" + std::to_string(::getpid()) + "-" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count());
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Child process with stdout/stderr redirected to a file.
class Child {
 public:
  Child(const std::vector<std::string>& argv, std::string log_path) : log_path_(std::move(log_path)) {
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 1, log_path_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&actions, 1, 2);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    int rc = posix_spawn(&pid_, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw std::runtime_error("posix_spawn failed for " + argv[0]);
  }

  ~Child() {
    if (!exited_) {
      ::kill(pid_, SIGKILL);
      wait();
    }
  }

  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  /// Polls the log until `needle` appears or the deadline passes.
  bool wait_for_output(const std::string& needle, std::chrono::milliseconds deadline) const {
    auto until = std::chrono::steady_clock::now() + deadline;
    while (std::chrono::steady_clock::now() < until) {
      if (output().find(needle) != std::string::npos) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return false;
  }

  std::string output() const { return read_file(log_path_); }
  void signal(int sig) const { ::kill(pid_, sig); }

  /// Exit status, or -1 when the child was killed by a signal.
  int wait() {
    if (exited_) return status_;
    int st = 0;
    ::waitpid(pid_, &st, 0);
    exited_ = true;
    status_ = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return status_;
  }

  /// As wait(), but gives up after the deadline.
  std::optional<int> wait_for(std::chrono::milliseconds deadline) {
    auto until = std::chrono::steady_clock::now() + deadline;
    while (std::chrono::steady_clock::now() < until) {
      int st = 0;
      pid_t r = ::waitpid(pid_, &st, WNOHANG);
      if (r == pid_) {
        exited_ = true;
        status_ = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
        return status_;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return std::nullopt;
  }

 private:
  std::string log_path_;
  pid_t pid_ = -1;
  bool exited_ = false;
  int status_ = 0;
};

/// Runs a command to completion and returns its exit status; output goes to `log_path`.
inline int run_command(const std::vector<std::string>& argv, const std::string& log_path) {
  Child c(argv, log_path);
  return c.wait();
}

}  // namespace tbtest
