#pragma once

// Byte transports between controller and wrench, plus the PING/PONG
// liveness rule shared by both ends.

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

namespace torqueflow {

/// Reliable ordered byte stream, as seen from one end.
class ByteLink {
 public:
  virtual ~ByteLink() = default;
  /// Returns false when the link is down; the bytes are dropped.
  virtual bool send(std::string_view bytes) = 0;
  /// Everything that has arrived so far (possibly partial frames).
  virtual std::string receive() = 0;
  virtual bool connected() const = 0;
};

/// In-process duplex pipe with an optional one-way delivery latency. Both
/// ends share one simulated clock advanced by the owner through set_time().
class MemoryPipe {
 public:
  struct Core {
    std::deque<std::pair<std::uint64_t, std::string>> queues[2];
    std::uint64_t now_ms = 0;
    std::uint64_t latency_ms = 0;
    bool up = true;
  };

  explicit MemoryPipe(std::uint64_t latency_ms = 0) : core_(std::make_shared<Core>()) {
    core_->latency_ms = latency_ms;
  }

  class End : public ByteLink {
   public:
    End(std::shared_ptr<Core> core, int side) : core_(std::move(core)), side_(side) {}

    bool send(std::string_view bytes) override {
      if (!core_->up) return false;
      core_->queues[1 - side_].push_back({core_->now_ms + core_->latency_ms, std::string(bytes)});
      return true;
    }
    std::string receive() override {
      std::string out;
      auto& q = core_->queues[side_];
      while (!q.empty() && q.front().first <= core_->now_ms) {
        out += q.front().second;
        q.pop_front();
      }
      return out;
    }
    bool connected() const override { return core_->up; }

   private:
    std::shared_ptr<Core> core_;
    int side_;
  };

  End controller_end() { return End(core_, 0); }
  End device_end() { return End(core_, 1); }

  void set_time(std::uint64_t now_ms) { core_->now_ms = now_ms; }
  void disconnect() {
    core_->up = false;
    core_->queues[0].clear();
    core_->queues[1].clear();
  }
  bool connected() const { return core_->up; }

 private:
  std::shared_ptr<Core> core_;
};

/// PING every period; the link counts as lost once max_missed pings in a row
/// went unanswered and the next one falls due.
class Heartbeat {
 public:
  explicit Heartbeat(std::uint64_t period_ms = 2000, int max_missed = 3)
      : period_ms_(period_ms), max_missed_(max_missed) {}

  void start(std::uint64_t now_ms) {
    next_due_ms_ = now_ms + period_ms_;
    outstanding_ = 0;
    lost_ = false;
  }

  /// True when a PING should go out now. Flags loss instead when too many are
  /// outstanding.
  bool ping_due(std::uint64_t now_ms) {
    if (lost_ || now_ms < next_due_ms_) return false;
    next_due_ms_ += period_ms_;
    if (outstanding_ >= max_missed_) {
      lost_ = true;
      return false;
    }
    ++outstanding_;
    return true;
  }

  void pong() { outstanding_ = 0; }
  bool lost() const { return lost_; }
  int outstanding() const { return outstanding_; }

 private:
  std::uint64_t period_ms_;
  int max_missed_;
  std::uint64_t next_due_ms_ = 0;
  int outstanding_ = 0;
  bool lost_ = false;
};

}  // namespace torqueflow
