#include "support.hpp"

#include <torqueflow/bench.hpp>
#include <torqueflow/metrics.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;
using torqueflow::testing::bench_scene;

namespace {

RunSpec spec(Method m, const std::string& profile, std::uint64_t seed, const std::string& scenario = "seq1") {
  RunSpec s;
  s.method = m;
  s.scenario_id = scenario;
  s.seed = seed;
  s.profile_name = profile;
  s.profile = named_profile(profile);
  if (s.profile.adversarial) s.max_duration_ms = 60000;
  return s;
}

}  // namespace

TEST(ScriptedOperator, ZeroFaultConventionalIsErrorFree) {
  for (const char* sc : {"seq1", "seq2", "seq3"}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = run_session(bench_scene(), spec(Method::kConventional, "perfect", seed, sc));
      ASSERT_FALSE(r.aborted);
      EXPECT_FALSE(r.committed.any());
      EXPECT_FALSE(classify_errors(r.log.events(), r.manual_log, *bench_scene().find_scenario(sc)).any());
    }
  }
}

TEST(ScriptedOperator, SameSeedSameLog) {
  for (Method m : {Method::kArGuided, Method::kConventional}) {
    const auto a = run_session(bench_scene(), spec(m, "paper-rates", 99));
    const auto b = run_session(bench_scene(), spec(m, "paper-rates", 99));
    EXPECT_EQ(a.log.to_jsonl(), b.log.to_jsonl());
    EXPECT_EQ(a.report, b.report);
    const auto c = run_session(bench_scene(), spec(m, "paper-rates", 100));
    EXPECT_NE(a.log.to_jsonl(), c.log.to_jsonl());
  }
}

TEST(ScriptedOperator, ClassifierAgreesWithCommittedFaults) {
  int with_errors = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    const auto r = run_session(bench_scene(), spec(Method::kConventional, "paper-rates", seed, "seq2"));
    ASSERT_FALSE(r.aborted);
    const auto f = classify_errors(r.log.events(), r.manual_log, *bench_scene().find_scenario("seq2"));
    EXPECT_EQ(f.wrong_order, r.committed.wrong_order) << seed;
    EXPECT_EQ(f.wrong_screw, r.committed.wrong_screw) << seed;
    EXPECT_EQ(f.stale_torque, r.committed.stale_torque) << seed;
    with_errors += f.any();
  }
  EXPECT_GT(with_errors, 60);
  EXPECT_LT(with_errors, 135);
}

TEST(ScriptedOperator, ForcedFaultsAreCommitted) {
  for (int mask = 0; mask < 8; ++mask) {
    RunSpec s = spec(Method::kConventional, "perfect", 5);
    s.forced_faults = FaultSet{bool(mask & 1), bool(mask & 2), bool(mask & 4)};
    const auto r = run_session(bench_scene(), s);
    EXPECT_EQ(r.committed, *s.forced_faults) << mask;
    const auto f = classify_errors(r.log.events(), r.manual_log, *bench_scene().find_scenario("seq1"));
    EXPECT_EQ((FaultSet{f.wrong_order, f.wrong_screw, f.stale_torque}), *s.forced_faults) << mask;
  }
}

TEST(ScriptedOperator, ArSessionsFinishUnderNoise) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RunSpec s = spec(Method::kArGuided, "paper-rates", seed, "seq3");
    s.tracking.loss_rate = 0.05;
    s.profile.pull_style.release_early_prob = 0.3;
    const auto r = run_session(bench_scene(), s);
    ASSERT_FALSE(r.aborted) << seed;
    for (const auto& row : r.report.rows) EXPECT_TRUE(row.validated) << seed;
  }
}

TEST(AdversarialOperator, NeverGetsABadValidation) {
  const Scene& scene = bench_scene();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = run_session(scene, spec(Method::kArGuided, "adversarial", seed, "seq2"));
    const Scenario& sc = *scene.find_scenario("seq2");
    std::size_t expect = 0;
    for (const auto& e : r.log.events()) {
      if (e.kind != EventKind::kStepValidated) continue;
      ASSERT_EQ(static_cast<std::size_t>(*e.step), expect);
      EXPECT_EQ(*e.site_ref(), sc.steps[expect].site);
      EXPECT_EQ(*e.target_cnm, sc.steps[expect].target_cnm);
      EXPECT_GE(*e.peak_cnm, sc.steps[expect].target_cnm);
      ++expect;
    }
  }
}

TEST(Profiles, NamedAndJson) {
  EXPECT_EQ(named_profile("perfect"), OperatorProfile{});
  const auto p = named_profile("paper-rates");
  EXPECT_DOUBLE_EQ(p.p_wrong_order, 0.47);
  EXPECT_DOUBLE_EQ(p.p_wrong_screw, 0.29);
  EXPECT_DOUBLE_EQ(p.p_stale_torque, 0.09);
  EXPECT_THROW(named_profile("sloppy"), ConfigError);
  EXPECT_EQ(profile_from_json(to_json(named_profile("paper-rates-paced"))), named_profile("paper-rates-paced"));
  EXPECT_THROW(profile_from_json({{"p_wrong_order", 1.5}}), ConfigError);
  EXPECT_THROW(profile_from_json({{"speed", 1}}), ConfigError);
  EXPECT_THROW(profile_from_json({{"read_s", "slow"}}), ConfigError);
  EXPECT_DOUBLE_EQ(profile_from_json({{"pull_style", {{"release_early_prob", 0.5}}}}).pull_style.release_early_prob, 0.5);
}

TEST(RunSpec, JsonRoundTrip) {
  RunSpec s = spec(Method::kConventional, "paper-rates", 12345);
  s.latency_ms = 20;
  s.disconnect_at_ms = 9000;
  s.forced_faults = FaultSet{true, false, true};
  s.tracking.max_axis_angle_deg = 30;
  const RunSpec back = run_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_EQ(back.profile, s.profile);
  EXPECT_EQ(back.forced_faults, s.forced_faults);
}

TEST(SubSeed, StreamsDiffer) {
  EXPECT_NE(sub_seed(1, 1), sub_seed(1, 2));
  EXPECT_NE(sub_seed(1, 1), sub_seed(2, 1));
  EXPECT_EQ(sub_seed(7, 3), sub_seed(7, 3));
}
