#include "support.hpp"

#include <torqueflow/device.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;

namespace {

RampConfig quiet() {
  RampConfig cfg;
  cfg.noise_frac = 0;
  cfg.overshoot_max_frac = 0;
  return cfg;
}

WrenchMessage set_target(std::uint32_t seq, TorqueCnm cnm) {
  WrenchMessage m;
  m.type = MsgType::kSetTarget;
  m.seq = seq;
  m.target_cnm = cnm;
  return m;
}

std::vector<WrenchMessage> parse_all(const std::string& bytes) {
  FrameReader r;
  r.feed(bytes);
  std::vector<WrenchMessage> out;
  while (auto m = r.next()) out.push_back(*m);
  return out;
}

int count(const std::vector<WrenchMessage>& ms, MsgType t) {
  return static_cast<int>(std::count_if(ms.begin(), ms.end(), [t](const auto& m) { return m.type == t; }));
}

}  // namespace

TEST(Led, Segments) {
  EXPECT_EQ(led_state(0, 300, false), (LedState{0, false}));
  EXPECT_EQ(led_state(150, 300, false), (LedState{5, false}));
  EXPECT_EQ(led_state(310, 300, true), (LedState{10, true}));
  EXPECT_EQ(led_state(29, 300, false), (LedState{0, false}));
  EXPECT_EQ(led_state(30, 300, false), (LedState{1, false}));
  EXPECT_EQ(led_state(100, 0, false), (LedState{0, false}));
}

TEST(Device, ReachesTargetAtRampTime) {
  SimulatedWrench w(quiet(), 1);
  auto acks = parse_all(w.receive(encode(set_target(1, 300))));
  ASSERT_EQ(acks.size(), 1u);
  EXPECT_EQ(acks[0].type, MsgType::kAck);
  EXPECT_EQ(acks[0].ref, 1u);
  EXPECT_EQ(w.state().mode, WrenchMode::kArmed);

  std::vector<WrenchMessage> out;
  double reached_at = -1;
  for (int i = 1; i <= 100; ++i) {
    auto ms = parse_all(w.step(true, 0.01));
    if (count(ms, MsgType::kTargetReached) && reached_at < 0) reached_at = i * 0.01;
    out.insert(out.end(), ms.begin(), ms.end());
  }
  EXPECT_NEAR(reached_at, 0.5, 1e-9);
  EXPECT_EQ(count(out, MsgType::kTargetReached), 1);
  EXPECT_GE(w.state().peak_cnm, 300);
  EXPECT_EQ(w.state().mode, WrenchMode::kReached);
  EXPECT_EQ(w.state().led, (LedState{10, true}));
}

TEST(Device, NoEffortNoRise) {
  SimulatedWrench w(quiet(), 1);
  w.receive(encode(set_target(1, 300)));
  for (int i = 0; i < 200; ++i) w.step(false, 0.01);
  EXPECT_EQ(w.state().applied_cnm, 0);
  EXPECT_EQ(w.state().peak_cnm, 0);
  EXPECT_EQ(w.state().mode, WrenchMode::kArmed);
}

TEST(Device, EarlyReleaseKeepsPeakAndRearms) {
  SimulatedWrench w(quiet(), 1);
  w.receive(encode(set_target(1, 300)));
  std::vector<WrenchMessage> out;
  // 600 cNm/s for 1/3 s is 200 cNm.
  for (int i = 0; i < 100; ++i) {
    auto ms = parse_all(w.step(true, 1.0 / 300));
    out.insert(out.end(), ms.begin(), ms.end());
  }
  auto ms = parse_all(w.step(false, 0.01));
  out.insert(out.end(), ms.begin(), ms.end());
  EXPECT_EQ(w.state().peak_cnm, 200);
  EXPECT_EQ(w.state().applied_cnm, 0);
  EXPECT_EQ(w.state().mode, WrenchMode::kArmed);
  EXPECT_EQ(count(out, MsgType::kTargetReached), 0);
}

TEST(Device, PullWhileIdleIsNackedNotArmed) {
  SimulatedWrench w(quiet(), 1);
  auto ms = parse_all(w.step(true, 0.01));
  ASSERT_GE(ms.size(), 1u);
  EXPECT_EQ(ms[0].type, MsgType::kNack);
  EXPECT_EQ(ms[0].err, NackReason::kNotArmed);
  EXPECT_EQ(ms[0].ref, 0u);
  // Holding the trigger does not repeat the NACK.
  EXPECT_EQ(count(parse_all(w.step(true, 0.01)), MsgType::kNack), 0);
  EXPECT_EQ(w.state().applied_cnm, 0);
}

TEST(Device, SetTargetWhileTighteningIsBusy) {
  SimulatedWrench w(quiet(), 1);
  w.receive(encode(set_target(1, 500)));
  w.step(true, 0.1);
  auto ms = parse_all(w.receive(encode(set_target(2, 300))));
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].type, MsgType::kNack);
  EXPECT_EQ(ms[0].err, NackReason::kBusy);
  EXPECT_EQ(ms[0].ref, 2u);
  EXPECT_EQ(w.state().target_cnm, 500);
}

TEST(Device, OutOfRangeTargetIsNackedRange) {
  SimulatedWrench w(quiet(), 1);
  WrenchMessage m = set_target(5, 1200);
  auto ms = parse_all(w.receive(encode_unvalidated(m)));
  ASSERT_EQ(ms.size(), 1u);
  EXPECT_EQ(ms[0].type, MsgType::kNack);
  EXPECT_EQ(ms[0].err, NackReason::kRange);
  EXPECT_EQ(ms[0].ref, 5u);
  EXPECT_EQ(w.state().mode, WrenchMode::kIdle);
}

TEST(Device, GarbageIsNackedAndStreamContinues) {
  SimulatedWrench w(quiet(), 1);
  auto ms = parse_all(w.receive("hello\n{\"t\":\"PING\",\"seq\":4}\n"));
  ASSERT_EQ(ms.size(), 2u);
  EXPECT_EQ(ms[0].err, NackReason::kMalformed);
  EXPECT_EQ(ms[1].type, MsgType::kPong);
  EXPECT_EQ(ms[1].ref, 4u);
}

TEST(Device, ReachedExactlyOncePerEpisode) {
  std::mt19937_64 pick(3);
  for (int run = 0; run < 200; ++run) {
    SimulatedWrench w(RampConfig{}, 1000 + run);
    const TorqueCnm target = std::uniform_int_distribution<int>(100, 1000)(pick);
    w.receive(encode(set_target(1, target)));
    int episodes = 0, reached = 0;
    bool effort = false;
    std::bernoulli_distribution toggle(0.02);
    for (int i = 0; i < 3000; ++i) {
      const bool before = effort;
      if (toggle(pick)) effort = !effort;
      if (effort && !before) ++episodes;
      const auto ms = parse_all(w.step(effort, 0.01));
      for (const auto& m : ms) {
        if (m.type != MsgType::kTargetReached) continue;
        ++reached;
        EXPECT_GE(*m.peak_cnm, target);
        EXPECT_LE(*m.peak_cnm, target * 1.03 + 1);
      }
      EXPECT_LE(reached, episodes);
    }
  }
}

TEST(Device, TelemetryCadence) {
  SimulatedWrench w(quiet(), 1);
  int tel = 0;
  for (int i = 0; i < 100; ++i) tel += count(parse_all(w.step(false, 0.01)), MsgType::kTelemetry);
  // One frame on the first step, then one every 50 ms up to and including t = 1 s.
  EXPECT_EQ(tel, 21);
}

TEST(Device, SeedDeterminism) {
  SimulatedWrench a(RampConfig{}, 42), b(RampConfig{}, 42);
  a.receive(encode(set_target(1, 700)));
  b.receive(encode(set_target(1, 700)));
  for (int i = 0; i < 300; ++i) EXPECT_EQ(a.step(i % 97 < 80, 0.01), b.step(i % 97 < 80, 0.01));
}
