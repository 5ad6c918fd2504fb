#include "support.hpp"

#include <torqueflow/scene.hpp>
#include <torqueflow/scene_io.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace torqueflow;
using torqueflow::testing::bench_scene;
using torqueflow::testing::data_path;

TEST(MakeGrid, FiftyHoles) {
  const Part p = make_grid("grid", 5, 10, 30);
  EXPECT_EQ(p.sites.size(), 50u);
}

TEST(MakeGrid, SingleSiteAtOrigin) {
  const Part p = make_grid("g", 1, 1, 10);
  ASSERT_EQ(p.sites.size(), 1u);
  EXPECT_EQ(p.sites[0].site_id, "r0c0");
  EXPECT_EQ(p.sites[0].head_point, Vec3::Zero());
}

TEST(MakeGrid, RowMajorLattice) {
  const Part p = make_grid("g", 2, 3, 25);
  const BoltSite* s = p.find_site("r1c2");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->head_point, Vec3(50, 25, 0));
  EXPECT_EQ(p.sites[5].site_id, "r1c2");
}

TEST(MakeGrid, NearestNeighbourDistanceIsPitch) {
  const Part p = make_grid("g", 4, 6, 17.5);
  for (const auto& a : p.sites) {
    double best = 1e18;
    for (const auto& b : p.sites)
      if (&a != &b) best = std::min(best, (a.head_point - b.head_point).norm());
    EXPECT_NEAR(best, 17.5, 1e-9);
    EXPECT_NEAR(a.axis.norm(), 1.0, 1e-9);
  }
}

TEST(MakeGrid, RejectsBadDimensions) {
  EXPECT_THROW(make_grid("g", 0, 3, 10), SceneError);
  EXPECT_THROW(make_grid("g", 3, -1, 10), SceneError);
  EXPECT_THROW(make_grid("g", 3, 3, 0), SceneError);
}

TEST(MakeFlange, ThirteenHolesEvenlySpaced) {
  const Part p = make_flange("flange", 13, 60);
  ASSERT_EQ(p.sites.size(), 13u);
  for (std::size_t k = 0; k < 13; ++k) {
    EXPECT_NEAR(p.sites[k].head_point.norm(), 60.0, 1e-9);
    const auto& a = p.sites[k].head_point;
    const auto& b = p.sites[(k + 1) % 13].head_point;
    EXPECT_NEAR(std::acos(a.dot(b) / 3600.0), 2 * std::numbers::pi / 13, 1e-9);
  }
}

TEST(MakeFlange, SingleHoleAtAngleZero) {
  const Part p = make_flange("f", 1, 60);
  ASSERT_EQ(p.sites.size(), 1u);
  EXPECT_LE((p.sites[0].head_point - Vec3(60, 0, 0)).norm(), 1e-12);
}

TEST(MakeFlange, FourHolesOnAxes) {
  const Part p = make_flange("f", 4, 10);
  const Vec3 expected[] = {{10, 0, 0}, {0, 10, 0}, {-10, 0, 0}, {0, -10, 0}};
  for (int k = 0; k < 4; ++k) EXPECT_LE((p.sites[k].head_point - expected[k]).norm(), 1e-12) << k;
}

TEST(MakeFlange, RejectsZeroHoles) { EXPECT_THROW(make_flange("f", 0, 60), SceneError); }

TEST(LoadScene, BundledBench) {
  const Scene& s = bench_scene();
  ASSERT_EQ(s.parts.size(), 2u);
  EXPECT_EQ(s.parts[0].sites.size(), 50u);
  EXPECT_EQ(s.parts[1].sites.size(), 13u);
  ASSERT_EQ(s.scenarios.size(), 3u);
  for (const auto& sc : s.scenarios) {
    ASSERT_EQ(sc.steps.size(), 10u);
    int grid = 0, transitions = 0;
    for (std::size_t i = 0; i < sc.steps.size(); ++i) {
      grid += sc.steps[i].site.part_id == s.parts[0].part_id;
      EXPECT_TRUE(sc.steps[i].target_cnm == 300 || sc.steps[i].target_cnm == 500);
      if (i && sc.steps[i].target_cnm != sc.steps[i - 1].target_cnm) ++transitions;
    }
    EXPECT_EQ(grid, 5);
    EXPECT_GE(transitions, 1);
  }
}

namespace {

std::string scene_with_step(const std::string& site, int cnm) {
  return R"({"parts":[{"id":"grid","generator":{"kind":"grid","rows":5,"cols":10,"pitch_mm":30}}],
             "tool":{"bit_tip_offset":{"translation_mm":[0,0,-150]}},
             "scenarios":[{"id":"s","steps":[["grid",")" +
         site + R"(",)" + std::to_string(cnm) + "]]}]}";
}

std::string error_of(const std::string& text) {
  try {
    parse_scene(text);
  } catch (const SceneError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadScene, UnknownSite) {
  EXPECT_NE(error_of(scene_with_step("r9c9", 300)).find("unknown site"), std::string::npos);
  EXPECT_EQ(error_of(scene_with_step("r4c9", 300)), "");
}

TEST(LoadScene, TorqueOutOfRange) {
  EXPECT_NE(error_of(scene_with_step("r0c0", 1200)).find("torque out of range"), std::string::npos);
  EXPECT_NE(error_of(scene_with_step("r0c0", 99)).find("torque out of range"), std::string::npos);
  EXPECT_EQ(error_of(scene_with_step("r0c0", 100)), "");
  EXPECT_EQ(error_of(scene_with_step("r0c0", 1000)), "");
}

TEST(LoadScene, ErrorsCarryLocation) {
  const std::string e = error_of(scene_with_step("r9c9", 300));
  EXPECT_NE(e.find("scenarios[0]"), std::string::npos) << e;
}

TEST(LoadScene, RejectsDuplicateStepsAndUnknownKeys) {
  const std::string dup = R"({"parts":[{"id":"g","generator":{"kind":"grid","rows":1,"cols":2,"pitch_mm":30}}],
      "tool":{"bit_tip_offset":{"translation_mm":[0,0,0]}},
      "scenarios":[{"id":"s","steps":[["g","r0c0",300],["g","r0c0",500]]}]})";
  EXPECT_NE(error_of(dup).find("appears twice"), std::string::npos);
  const std::string extra = R"({"parts":[],"tool":{"bit_tip_offset":{"translation_mm":[0,0,0]}},"scenarios":[],"x":1})";
  EXPECT_THROW(parse_scene(extra), SceneError);
  EXPECT_THROW(parse_scene("{not json"), SceneError);
}

TEST(LoadScene, MissingFileNamesThePath) {
  try {
    load_scene("/nonexistent/x.scene");
    FAIL();
  } catch (const SceneError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.scene"), std::string::npos);
  }
}

TEST(SaveScene, RoundTrip) {
  const Scene& s = bench_scene();
  const auto path = std::filesystem::temp_directory_path() / "torqueflow_roundtrip.scene";
  save_scene(s, path);
  const Scene back = load_scene(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.parts.size(), s.parts.size());
  for (std::size_t i = 0; i < s.parts.size(); ++i) {
    EXPECT_EQ(back.parts[i].part_id, s.parts[i].part_id);
    ASSERT_EQ(back.parts[i].sites.size(), s.parts[i].sites.size());
    for (std::size_t k = 0; k < s.parts[i].sites.size(); ++k) {
      EXPECT_EQ(back.parts[i].sites[k].site_id, s.parts[i].sites[k].site_id);
      EXPECT_EQ(back.parts[i].sites[k].head_point, s.parts[i].sites[k].head_point);
      EXPECT_EQ(back.parts[i].sites[k].axis, s.parts[i].sites[k].axis);
    }
    EXPECT_LE(pose_distance(back.parts[i].mount_pose, s.parts[i].mount_pose), 0.0);
  }
  ASSERT_EQ(back.scenarios.size(), s.scenarios.size());
  for (std::size_t i = 0; i < s.scenarios.size(); ++i) {
    EXPECT_EQ(back.scenarios[i].scenario_id, s.scenarios[i].scenario_id);
    EXPECT_EQ(back.scenarios[i].steps, s.scenarios[i].steps);
  }
  EXPECT_LE(pose_distance(back.tool.bit_tip_offset, s.tool.bit_tip_offset), 0.0);
  EXPECT_EQ(dump_scene(back), dump_scene(s));
}

TEST(WorldSites, AppliesMountPose) {
  const Scene& s = bench_scene();
  const auto sites = world_sites(s.parts);
  EXPECT_EQ(sites.size(), 63u);
  for (const auto& w : sites) {
    const Part* p = s.find_part(w.ref.part_id);
    EXPECT_LE((w.head - p->mount_pose.apply(p->find_site(w.ref.site_id)->head_point)).norm(), 1e-12);
  }
}
