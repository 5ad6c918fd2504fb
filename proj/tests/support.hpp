#pragma once

// Generators and helpers shared by the unit and acceptance tests.

#include <torqueflow/geometry.hpp>
#include <torqueflow/protocol.hpp>
#include <torqueflow/scene.hpp>
#include <torqueflow/scene_io.hpp>

#include <random>
#include <string>

namespace torqueflow::testing {

inline std::string data_path(const std::string& rel) { return std::string(TORQUEFLOW_DATA_DIR) + "/" + rel; }

inline const Scene& bench_scene() {
  static const Scene scene = load_scene(data_path("bench.scene"));
  return scene;
}

inline Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Pose random_pose(std::mt19937_64& rng, double spread_mm = 1000.0) {
  std::uniform_real_distribution<double> u(-spread_mm, spread_mm);
  return Pose(Vec3(u(rng), u(rng), u(rng)), random_rotation(rng));
}

/// A message that satisfies every per-type invariant.
inline WrenchMessage random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> type(0, 6);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<std::uint64_t> u64;
  std::uniform_int_distribution<int> target(kMinTorqueCnm, kMaxTorqueCnm);
  std::uniform_int_distribution<int> reading(0, static_cast<int>(kMaxReadingCnm));
  std::uniform_int_distribution<int> reason(0, 4);
  std::bernoulli_distribution coin(0.5);
  WrenchMessage m;
  m.type = static_cast<MsgType>(type(rng));
  m.seq = u32(rng);
  switch (m.type) {
    case MsgType::kSetTarget:
      m.target_cnm = target(rng);
      break;
    case MsgType::kAck:
      m.ref = u32(rng);
      if (coin(rng)) m.target_cnm = target(rng);
      break;
    case MsgType::kNack:
      m.ref = u32(rng);
      m.err = static_cast<NackReason>(reason(rng));
      break;
    case MsgType::kTelemetry:
      m.applied_cnm = reading(rng);
      m.ts_ms = u64(rng);
      if (coin(rng)) m.peak_cnm = reading(rng);
      if (coin(rng)) m.target_cnm = target(rng);
      break;
    case MsgType::kTargetReached:
      m.peak_cnm = reading(rng);
      m.ts_ms = u64(rng);
      if (coin(rng)) m.target_cnm = target(rng);
      break;
    case MsgType::kPing:
      if (coin(rng)) m.ts_ms = u64(rng);
      break;
    case MsgType::kPong:
      if (coin(rng)) m.ref = u32(rng);
      if (coin(rng)) m.ts_ms = u64(rng);
      break;
  }
  return m;
}

}  // namespace torqueflow::testing
