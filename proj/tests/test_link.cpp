#include <torqueflow/link.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;

TEST(MemoryPipe, LatencyDelaysDelivery) {
  MemoryPipe pipe(30);
  auto c = pipe.controller_end();
  auto d = pipe.device_end();
  pipe.set_time(100);
  c.send("abc");
  pipe.set_time(129);
  EXPECT_EQ(d.receive(), "");
  pipe.set_time(130);
  EXPECT_EQ(d.receive(), "abc");
  d.send("x");
  d.send("y");
  pipe.set_time(200);
  EXPECT_EQ(c.receive(), "xy");
}

TEST(MemoryPipe, DisconnectDropsEverything) {
  MemoryPipe pipe;
  auto c = pipe.controller_end();
  auto d = pipe.device_end();
  c.send("abc");
  pipe.disconnect();
  EXPECT_FALSE(c.connected());
  EXPECT_EQ(d.receive(), "");
  EXPECT_FALSE(c.send("z"));
}

TEST(Heartbeat, LostAfterThreeMissed) {
  Heartbeat hb(2000, 3);
  hb.start(0);
  EXPECT_FALSE(hb.ping_due(1999));
  EXPECT_TRUE(hb.ping_due(2000));
  EXPECT_TRUE(hb.ping_due(4000));
  EXPECT_TRUE(hb.ping_due(6000));
  EXPECT_EQ(hb.outstanding(), 3);
  EXPECT_FALSE(hb.lost());
  EXPECT_FALSE(hb.ping_due(8000));
  EXPECT_TRUE(hb.lost());
}

TEST(Heartbeat, PongResets) {
  Heartbeat hb(2000, 3);
  hb.start(0);
  for (std::uint64_t t = 2000; t <= 40000; t += 2000) {
    EXPECT_TRUE(hb.ping_due(t));
    if (t % 6000 == 0) hb.pong();
  }
  EXPECT_FALSE(hb.lost());
}
