#pragma once

#include <atomic>
#include <memory>

#include "twinbridge/model.hpp"

namespace twinbridge {

/// Wall-clock source. Services take one so tests can drive time by hand.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimestampMs now_ms() const = 0;
};

class SystemClock final : public Clock {
 public:
  TimestampMs now_ms() const override;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(TimestampMs start = 1'700'000'000'000) : now_(start) {}

  TimestampMs now_ms() const override { return now_.load(); }
  void set(TimestampMs t) { now_.store(t); }
  void advance(TimestampMs delta) { now_.fetch_add(delta); }

 private:
  std::atomic<TimestampMs> now_;
};

std::shared_ptr<Clock> system_clock();

}  // namespace twinbridge
