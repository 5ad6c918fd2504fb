#pragma once

// Simulated connected torque wrench: linear torque ramp with jitter, one
// TARGET_REACHED per tightening episode, peak-hold and a segmented LED bar.

#include <torqueflow/error.hpp>
#include <torqueflow/protocol.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace torqueflow {

inline constexpr int kLedSegments = 10;

enum class WrenchMode : std::uint8_t { kIdle, kArmed, kTightening, kReached };

inline std::string_view to_string(WrenchMode m) {
  switch (m) {
    case WrenchMode::kIdle: return "IDLE";
    case WrenchMode::kArmed: return "ARMED";
    case WrenchMode::kTightening: return "TIGHTENING";
    case WrenchMode::kReached: return "REACHED";
  }
  return "?";
}

struct LedState {
  int lit_segments = 0;
  bool red = false;
  friend bool operator==(const LedState&, const LedState&) = default;
};

inline LedState led_state(TorqueCnm applied_cnm, TorqueCnm target_cnm, bool reached) {
  LedState led;
  led.red = reached;
  if (target_cnm > 0 && applied_cnm > 0) {
    const std::int64_t lit = static_cast<std::int64_t>(applied_cnm) * kLedSegments / target_cnm;
    led.lit_segments = static_cast<int>(std::min<std::int64_t>(lit, kLedSegments));
  }
  return led;
}

struct WrenchState {
  WrenchMode mode = WrenchMode::kIdle;
  TorqueCnm target_cnm = 0;
  TorqueCnm applied_cnm = 0;
  TorqueCnm peak_cnm = 0;  // max over the current (or last) episode
  LedState led;
};

struct RampConfig {
  double ramp_rate = 600.0;          // cNm/s
  double noise_frac = 0.05;          // multiplicative jitter on the ramp rate
  double overshoot_max_frac = 0.03;  // peak may exceed target by this fraction
  std::uint32_t telemetry_period_ms = 50;

  void check() const {
    if (!(ramp_rate >= 0 && noise_frac >= 0 && overshoot_max_frac >= 0))
      throw ConfigError("ramp config values must be non-negative");
    if (telemetry_period_ms < 1) throw ConfigError("telemetry_period_ms must be >= 1");
  }
};

/// Full device-side state: the observable WrenchState plus bookkeeping.
struct DeviceState {
  WrenchState wrench;
  double applied_exact = 0;  // cNm, before flooring
  double clock_s = 0;
  double next_telemetry_s = 0;
  std::uint32_t next_seq = 1;
  std::uint32_t last_command_seq = 0;
  bool effort_prev = false;
  bool reach_sent = false;  // within the current episode
};

struct DeviceStep {
  DeviceState state;
  std::vector<WrenchMessage> messages;
};

namespace device_detail {

inline std::uint64_t clock_ms(const DeviceState& s) {
  return static_cast<std::uint64_t>(std::llround(s.clock_s * 1000.0));
}

inline TorqueCnm floor_cnm(double v) { return static_cast<TorqueCnm>(std::floor(v + 1e-9)); }

inline WrenchMessage make(DeviceState& s, MsgType type) {
  WrenchMessage m;
  m.type = type;
  m.seq = s.next_seq++;
  return m;
}

}  // namespace device_detail

/// Advances the device by dt seconds with the operator pulling (effort) or not.
template <class Rng>
DeviceStep device_step(DeviceState state, const RampConfig& cfg, bool operator_effort, double dt, Rng& rng) {
  using namespace device_detail;
  DeviceStep out;
  DeviceState& s = state;
  WrenchState& w = s.wrench;
  s.clock_s += dt;
  const bool rising = operator_effort && !s.effort_prev;

  if (w.mode == WrenchMode::kIdle && rising) {
    WrenchMessage nack = make(s, MsgType::kNack);
    // Unsolicited: references the last command the controller sent.
    nack.ref = s.last_command_seq;
    nack.err = NackReason::kNotArmed;
    out.messages.push_back(nack);
  }
  if (w.mode == WrenchMode::kArmed && operator_effort) {
    w.mode = WrenchMode::kTightening;
    w.peak_cnm = 0;
    s.applied_exact = 0;
    s.reach_sent = false;
  }
  if (w.mode == WrenchMode::kTightening || w.mode == WrenchMode::kReached) {
    if (!operator_effort) {
      s.applied_exact = 0;
      w.mode = WrenchMode::kArmed;
    } else if (w.mode == WrenchMode::kTightening) {
      double rate = cfg.ramp_rate;
      if (cfg.noise_frac > 0) {
        std::uniform_real_distribution<double> jitter(-cfg.noise_frac, cfg.noise_frac);
        rate *= 1.0 + jitter(rng);
      }
      s.applied_exact += std::max(rate, 0.0) * dt;
      if (s.applied_exact + 1e-9 >= w.target_cnm && !s.reach_sent) {
        const double target = w.target_cnm;
        double overshoot = 0;
        if (cfg.overshoot_max_frac > 0) {
          std::uniform_real_distribution<double> u(0.0, cfg.overshoot_max_frac);
          overshoot = u(rng);
        }
        s.applied_exact = std::clamp(std::max(s.applied_exact, target * (1.0 + overshoot)), target,
                                     target * (1.0 + cfg.overshoot_max_frac));
        w.mode = WrenchMode::kReached;
        s.reach_sent = true;
        w.applied_cnm = floor_cnm(s.applied_exact);
        w.peak_cnm = std::max(w.peak_cnm, w.applied_cnm);
        WrenchMessage reached = make(s, MsgType::kTargetReached);
        reached.target_cnm = w.target_cnm;
        reached.peak_cnm = w.peak_cnm;
        reached.ts_ms = clock_ms(s);
        out.messages.push_back(reached);
      }
    }
  }
  w.applied_cnm = floor_cnm(s.applied_exact);
  w.peak_cnm = std::max(w.peak_cnm, w.applied_cnm);
  w.led = led_state(w.applied_cnm, w.target_cnm, w.mode == WrenchMode::kReached);

  if (s.clock_s + 1e-9 >= s.next_telemetry_s) {
    WrenchMessage tel = make(s, MsgType::kTelemetry);
    tel.applied_cnm = w.applied_cnm;
    tel.peak_cnm = w.peak_cnm;
    if (w.target_cnm > 0) tel.target_cnm = w.target_cnm;
    tel.ts_ms = clock_ms(s);
    out.messages.push_back(tel);
    const double period = cfg.telemetry_period_ms / 1000.0;
    while (s.next_telemetry_s <= s.clock_s + 1e-9) s.next_telemetry_s += period;
  }
  s.effort_prev = operator_effort;
  out.state = std::move(state);
  return out;
}

/// Device reaction to one controller message.
inline std::vector<WrenchMessage> device_handle(DeviceState& s, const WrenchMessage& in) {
  using namespace device_detail;
  std::vector<WrenchMessage> out;
  WrenchState& w = s.wrench;
  switch (in.type) {
    case MsgType::kSetTarget: {
      s.last_command_seq = in.seq;
      if (w.mode == WrenchMode::kTightening || w.mode == WrenchMode::kReached) {
        WrenchMessage nack = make(s, MsgType::kNack);
        nack.ref = in.seq;
        nack.err = NackReason::kBusy;
        out.push_back(nack);
        break;
      }
      w.target_cnm = *in.target_cnm;
      w.mode = WrenchMode::kArmed;
      w.led = led_state(w.applied_cnm, w.target_cnm, false);
      WrenchMessage ack = make(s, MsgType::kAck);
      ack.ref = in.seq;
      ack.target_cnm = w.target_cnm;
      out.push_back(ack);
      break;
    }
    case MsgType::kPing: {
      WrenchMessage pong = make(s, MsgType::kPong);
      pong.ref = in.seq;
      pong.ts_ms = clock_ms(s);
      out.push_back(pong);
      break;
    }
    default: {
      s.last_command_seq = in.seq;
      WrenchMessage nack = make(s, MsgType::kNack);
      nack.ref = in.seq;
      nack.err = NackReason::kMalformed;
      out.push_back(nack);
      break;
    }
  }
  return out;
}

/// Byte-level wrench endpoint: feed controller bytes in, get device bytes out.
class SimulatedWrench {
 public:
  SimulatedWrench(RampConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) { cfg_.check(); }

  /// Consumes controller bytes; returns the encoded replies.
  std::string receive(std::string_view bytes) {
    reader_.feed(bytes);
    std::string out;
    for (;;) {
      try {
        auto msg = reader_.next();
        if (!msg) break;
        for (const auto& r : device_handle(state_, *msg)) out += encode(r);
      } catch (const ProtocolError& e) {
        WrenchMessage nack;
        nack.type = MsgType::kNack;
        nack.seq = state_.next_seq++;
        nack.ref = salvage_seq(reader_.last_rejected());
        nack.err = nack_reason_for(e);
        out += encode(nack);
      }
    }
    return out;
  }

  std::string step(bool operator_effort, double dt) {
    DeviceStep r = device_step(std::move(state_), cfg_, operator_effort, dt, rng_);
    state_ = std::move(r.state);
    std::string out;
    for (const auto& m : r.messages) out += encode(m);
    return out;
  }

  const WrenchState& state() const { return state_.wrench; }
  const DeviceState& device_state() const { return state_; }
  const RampConfig& config() const { return cfg_; }

 private:
  RampConfig cfg_;
  std::mt19937_64 rng_;
  DeviceState state_;
  FrameReader reader_;
};

}  // namespace torqueflow
