#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include "twinbridge/clock.hpp"

namespace twinbridge {

template <class V>
struct CacheHit {
  V value;
  TimestampMs fetched_at;
};

/// Keyed TTL cache. An entry is served only while now - fetched_at <= ttl;
/// ttl == 0 disables caching entirely.
template <class V>
class TtlCache {
 public:
  TtlCache(TimestampMs ttl_ms, std::shared_ptr<Clock> clock) : ttl_ms_(ttl_ms), clock_(std::move(clock)) {}

  std::optional<CacheHit<V>> get(const std::string& key) const {
    if (ttl_ms_ <= 0) return std::nullopt;
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    if (clock_->now_ms() - it->second.fetched_at > ttl_ms_) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, V value, TimestampMs fetched_at) {
    if (ttl_ms_ <= 0) return;
    std::lock_guard lock(mu_);
    entries_.insert_or_assign(key, CacheHit<V>{std::move(value), fetched_at});
  }

  TimestampMs ttl_ms() const { return ttl_ms_; }

 private:
  TimestampMs ttl_ms_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, CacheHit<V>> entries_;
};

/// Collapses concurrent calls for the same key into one execution; every
/// caller gets the leader's result (or exception).
template <class V>
class SingleFlight {
 public:
  /// Returns the value and whether this caller executed `fn`.
  std::pair<V, bool> run(const std::string& key, const std::function<V()>& fn) {
    std::shared_ptr<Call> call;
    bool leader = false;
    {
      std::lock_guard lock(mu_);
      auto it = calls_.find(key);
      if (it == calls_.end()) {
        call = std::make_shared<Call>();
        calls_.emplace(key, call);
        leader = true;
      } else {
        call = it->second;
      }
    }
    if (leader) {
      try {
        call->value = fn();
      } catch (...) {
        call->error = std::current_exception();
      }
      {
        std::lock_guard lock(mu_);
        calls_.erase(key);
      }
      {
        std::lock_guard lock(call->mu);
        call->done = true;
      }
      call->cv.notify_all();
    } else {
      std::unique_lock lock(call->mu);
      call->cv.wait(lock, [&] { return call->done; });
    }
    if (call->error) std::rethrow_exception(call->error);
    return {*call->value, leader};
  }

 private:
  struct Call {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    std::optional<V> value;
    std::exception_ptr error;
  };

  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Call>> calls_;
};

}  // namespace twinbridge
