#include "support.hpp"

#include <torqueflow/engagement.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;
using torqueflow::testing::bench_scene;
using torqueflow::testing::random_rotation;

namespace {

// Tool with the tip 100 mm along the wrench's +Z, so a wrench pose placing
// the tip at p is simply a translation to p - (0,0,100) with no rotation.
ToolModel straight_tool() {
  ToolModel tool;
  tool.bit_tip_offset = Pose::from_translation(Vec3(0, 0, 100));
  return tool;
}

Pose tip_at(const Vec3& p) { return Pose::from_translation(p - Vec3(0, 0, 100)); }

std::vector<Part> one_grid() { return {make_grid("g", 3, 3, 30)}; }

}  // namespace

TEST(Engagement, TipOnHeadEngagesThatSite) {
  const auto parts = one_grid();
  const auto e = classify_engagement(tip_at(Vec3(30, 30, 0)), straight_tool(), parts, TrackingConfig{}, true);
  ASSERT_TRUE(e.engaged_site);
  EXPECT_EQ(e.engaged_site->site_id, "r1c1");
  EXPECT_DOUBLE_EQ(e.tip_distance, 0.0);
}

TEST(Engagement, WithinThresholdEngages) {
  const auto parts = one_grid();
  const auto e = classify_engagement(tip_at(Vec3(0, 0, 14.9)), straight_tool(), parts, TrackingConfig{}, true);
  ASSERT_TRUE(e.engaged_site);
  EXPECT_EQ(e.engaged_site->site_id, "r0c0");
}

TEST(Engagement, BeyondThresholdIsNone) {
  const auto parts = one_grid();
  const auto e = classify_engagement(tip_at(Vec3(0, 0, 15.1)), straight_tool(), parts, TrackingConfig{}, true);
  EXPECT_FALSE(e.engaged_site);
  EXPECT_FALSE(e.ambiguous);
  EXPECT_NEAR(e.tip_distance, 15.1, 1e-9);
}

TEST(Engagement, MidpointBetweenNeighboursIsAmbiguous) {
  std::vector<Part> parts = {make_grid("g", 1, 2, 20)};
  const auto e = classify_engagement(tip_at(Vec3(10, 0, 0)), straight_tool(), parts, TrackingConfig{}, true);
  EXPECT_FALSE(e.engaged_site);
  EXPECT_TRUE(e.ambiguous);
  // 0.6 mm off the midpoint: the gap is 1.2 mm, above the 1 mm epsilon.
  const auto off = classify_engagement(tip_at(Vec3(9.4, 0, 0)), straight_tool(), parts, TrackingConfig{}, true);
  ASSERT_TRUE(off.engaged_site);
  EXPECT_EQ(off.engaged_site->site_id, "r0c0");
}

TEST(Engagement, TrackingLossMeansNoEngagement) {
  const auto parts = one_grid();
  const auto e = classify_engagement(tip_at(Vec3(30, 30, 0)), straight_tool(), parts, TrackingConfig{}, false);
  EXPECT_FALSE(e.engaged_site);
  EXPECT_FALSE(e.tracking_ok);
}

TEST(Engagement, AxisAngleGate) {
  const auto parts = one_grid();
  TrackingConfig cfg;
  cfg.max_axis_angle_deg = 20.0;
  const auto tool = straight_tool();
  // Bit pointing along -Z of the wrench after a half turn about X; the site axis is +Z.
  const Pose flipped = Pose::from_axis_angle(Vec3::UnitX(), std::numbers::pi, Vec3(0, 0, 100));
  EXPECT_FALSE(classify_engagement(flipped, tool, parts, cfg, true).engaged_site);
  cfg.max_axis_angle_deg.reset();
  EXPECT_TRUE(classify_engagement(flipped, tool, parts, cfg, true).engaged_site);
}

TEST(Engagement, NeverEngagedBeyondThresholdOnBench) {
  const Scene& s = bench_scene();
  const auto sites = world_sites(s.parts);
  const TrackingConfig cfg;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-300, 600);
  int engaged = 0;
  for (int i = 0; i < 20000; ++i) {
    const Pose pose(Vec3(u(rng), u(rng), u(rng) / 4), random_rotation(rng));
    const auto e = classify_engagement(pose, s.tool, std::span<const WorldSite>(sites), cfg, true);
    if (!e.engaged_site) continue;
    ++engaged;
    const Vec3 tip = tip_position(pose, s.tool);
    double best = 1e18;
    const WorldSite* hit = nullptr;
    for (const auto& w : sites) {
      if ((w.head - tip).norm() < best) best = (w.head - tip).norm();
      if (w.ref == *e.engaged_site) hit = &w;
    }
    ASSERT_NE(hit, nullptr);
    EXPECT_LE((hit->head - tip).norm(), cfg.engage_threshold);
    EXPECT_DOUBLE_EQ((hit->head - tip).norm(), best);
  }
  // Also sample right next to every head so the engaged branch is exercised.
  for (const auto& w : sites) {
    const Vec3 tip = w.head + Vec3(3, -2, 5);
    const Pose pose = compose(Pose::from_translation(tip), invert(s.tool.bit_tip_offset));
    const auto e = classify_engagement(pose, s.tool, std::span<const WorldSite>(sites), cfg, true);
    ASSERT_TRUE(e.engaged_site);
    EXPECT_EQ(*e.engaged_site, w.ref);
    ++engaged;
  }
  EXPECT_GT(engaged, 63);
}

TEST(Tracking, LossRateMatchesPoisson) {
  TrackingConfig cfg;
  cfg.loss_rate = 0.1;
  cfg.redetect_delay = 0;
  cfg.drift_rate = 0;
  TrackingSimulator sim(cfg, 5);
  for (int i = 0; i < 100000; ++i) sim.step(0.01);
  EXPECT_NEAR(static_cast<double>(sim.loss_count()), 100.0, 30.0);
}

TEST(Tracking, LossBlanksForRedetectDelay) {
  TrackingConfig cfg;
  cfg.loss_rate = 1e6;
  cfg.redetect_delay = 1.5;
  TrackingSimulator sim(cfg, 1);
  EXPECT_EQ(sim.step(0.1).kind, TrackingEventKind::kLoss);
  EXPECT_FALSE(sim.tracking_ok());
  int steps = 0;
  TrackingEvent ev;
  do {
    ev = sim.step(0.1);
    ++steps;
  } while (ev.kind != TrackingEventKind::kRedetect);
  EXPECT_EQ(steps, 15);
  EXPECT_TRUE(sim.tracking_ok());
  EXPECT_EQ(ev.drift, Vec3::Zero());
}

TEST(Tracking, ZeroNoiseReportsTruth) {
  TrackingConfig cfg;
  cfg.drift_rate = 0;
  cfg.loss_rate = 0;
  TrackingSimulator sim(cfg, 9);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    sim.step(0.01);
    const Pose truth = torqueflow::testing::random_pose(rng);
    const Pose r = sim.report(truth);
    EXPECT_EQ(r.translation, truth.translation);
    EXPECT_EQ(r.rotation.coeffs(), truth.rotation.coeffs());
    EXPECT_TRUE(sim.tracking_ok());
  }
}

TEST(Tracking, DriftIsSeeded) {
  TrackingSimulator a(TrackingConfig{}, 3), b(TrackingConfig{}, 3);
  for (int i = 0; i < 500; ++i) {
    const auto ea = a.step(0.01), eb = b.step(0.01);
    EXPECT_EQ(ea.kind, eb.kind);
    EXPECT_EQ(ea.drift, eb.drift);
  }
}

TEST(Tracking, RejectsBadConfig) {
  TrackingConfig cfg;
  cfg.engage_threshold = 0;
  EXPECT_THROW(TrackingSimulator(cfg, 1), ConfigError);
  cfg = {};
  cfg.loss_rate = -1;
  EXPECT_THROW(cfg.check(), ConfigError);
  TrackingSimulator ok(TrackingConfig{}, 1);
  EXPECT_THROW(ok.step(0), ConfigError);
}
