#pragma once

// Headless session runner: engine, simulated wrench, in-memory link,
// tracking simulator and a scripted operator stepped on one simulated clock.
//
// Per tick: operator acts, the wrench consumes controller bytes and advances,
// tracking advances (AR only), then the engine ticks. Identical RunSpecs give
// byte-identical logs.

#include <torqueflow/device.hpp>
#include <torqueflow/engagement.hpp>
#include <torqueflow/link.hpp>
#include <torqueflow/operator_sim.hpp>
#include <torqueflow/orchestrator.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace torqueflow {

/// SplitMix64 finalizer; derives independent sub-seeds from a session seed.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct RunSpec {
  std::string session_id = "S000";
  Method method = Method::kArGuided;
  std::string scenario_id;
  std::string scene_path;  // informational; lets replay find the scene
  std::uint64_t seed = 1;
  std::string profile_name = "perfect";
  OperatorProfile profile;
  TrackingConfig tracking;
  RampConfig ramp;
  std::uint64_t tick_ms = 10;
  std::uint64_t max_duration_ms = 30 * 60 * 1000;
  std::uint64_t latency_ms = 0;
  std::optional<std::uint64_t> disconnect_at_ms;
  std::optional<FaultSet> forced_faults;

  void check() const {
    if (tick_ms == 0) throw ConfigError("tick_ms must be >= 1");
    if (max_duration_ms == 0) throw ConfigError("max_duration_ms must be >= 1");
    profile.check();
    tracking.check();
    ramp.check();
  }
};

inline nlohmann::json to_json(const TrackingConfig& t) {
  nlohmann::json j = {{"drift_rate", t.drift_rate},
                      {"loss_rate", t.loss_rate},
                      {"redetect_delay", t.redetect_delay},
                      {"engage_threshold", t.engage_threshold},
                      {"ambiguity_epsilon", t.ambiguity_epsilon}};
  if (t.max_axis_angle_deg) j["max_axis_angle_deg"] = *t.max_axis_angle_deg;
  return j;
}

inline nlohmann::json to_json(const RampConfig& r) {
  return {{"ramp_rate", r.ramp_rate},
          {"noise_frac", r.noise_frac},
          {"overshoot_max_frac", r.overshoot_max_frac},
          {"telemetry_period_ms", r.telemetry_period_ms}};
}

inline nlohmann::json to_json(const FaultSet& f) {
  return {{"wrong_order", f.wrong_order}, {"wrong_screw", f.wrong_screw}, {"stale_torque", f.stale_torque}};
}

/// The run configuration echoed in SESSION_START; enough to re-run the session.
inline nlohmann::json to_json(const RunSpec& s) {
  nlohmann::json j = {{"session_id", s.session_id},
                      {"method", std::string(to_string(s.method))},
                      {"scenario_id", s.scenario_id},
                      {"scene_path", s.scene_path},
                      {"seed", s.seed},
                      {"profile_name", s.profile_name},
                      {"profile", to_json(s.profile)},
                      {"tracking", to_json(s.tracking)},
                      {"ramp", to_json(s.ramp)},
                      {"tick_ms", s.tick_ms},
                      {"max_duration_ms", s.max_duration_ms},
                      {"latency_ms", s.latency_ms}};
  if (s.disconnect_at_ms) j["disconnect_at_ms"] = *s.disconnect_at_ms;
  if (s.forced_faults) j["forced_faults"] = to_json(*s.forced_faults);
  return j;
}

inline RunSpec run_spec_from_json(const nlohmann::json& j) {
  RunSpec s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    const auto m = parse_method(j.at("method").get<std::string>());
    if (!m) throw ConfigError("unknown method in run config");
    s.method = *m;
    s.scenario_id = j.at("scenario_id").get<std::string>();
    if (j.contains("scene_path")) s.scene_path = j.at("scene_path").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.profile_name = j.at("profile_name").get<std::string>();
    s.profile = profile_from_json(j.at("profile"));
    const auto& t = j.at("tracking");
    s.tracking.drift_rate = t.at("drift_rate").get<double>();
    s.tracking.loss_rate = t.at("loss_rate").get<double>();
    s.tracking.redetect_delay = t.at("redetect_delay").get<double>();
    s.tracking.engage_threshold = t.at("engage_threshold").get<double>();
    s.tracking.ambiguity_epsilon = t.at("ambiguity_epsilon").get<double>();
    if (t.contains("max_axis_angle_deg")) s.tracking.max_axis_angle_deg = t.at("max_axis_angle_deg").get<double>();
    const auto& r = j.at("ramp");
    s.ramp.ramp_rate = r.at("ramp_rate").get<double>();
    s.ramp.noise_frac = r.at("noise_frac").get<double>();
    s.ramp.overshoot_max_frac = r.at("overshoot_max_frac").get<double>();
    s.ramp.telemetry_period_ms = r.at("telemetry_period_ms").get<std::uint32_t>();
    s.tick_ms = j.at("tick_ms").get<std::uint64_t>();
    s.max_duration_ms = j.at("max_duration_ms").get<std::uint64_t>();
    s.latency_ms = j.at("latency_ms").get<std::uint64_t>();
    if (j.contains("disconnect_at_ms")) s.disconnect_at_ms = j.at("disconnect_at_ms").get<std::uint64_t>();
    if (j.contains("forced_faults")) {
      const auto& f = j.at("forced_faults");
      s.forced_faults = FaultSet{f.at("wrong_order").get<bool>(), f.at("wrong_screw").get<bool>(),
                                 f.at("stale_torque").get<bool>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  s.check();
  return s;
}

struct SessionResult {
  RunSpec spec;
  EventLog log;
  TighteningReport report;
  ManualLog manual_log;
  FaultSet committed;
  bool aborted = false;
  std::uint64_t end_ms = 0;
  std::uint64_t ticks = 0;
};

inline std::unique_ptr<Operator> make_operator(const Scene& scene, const Scenario& scenario, const RunSpec& spec) {
  const std::uint64_t seed = sub_seed(spec.seed, 3);
  if (spec.profile.adversarial) return std::make_unique<AdversarialOperator>(scene, seed);
  return std::make_unique<ScriptedOperator>(scene, scenario, spec.method, spec.profile, seed, spec.forced_faults);
}

/// Runs one session to SESSION_END or SESSION_ABORTED. A custom operator may
/// be supplied; otherwise one is built from the spec.
inline SessionResult run_session(const Scene& scene, const RunSpec& spec, Operator* custom = nullptr) {
  spec.check();
  const Scenario* scenario = scene.find_scenario(spec.scenario_id);
  if (!scenario) throw ConfigError("unknown scenario '" + spec.scenario_id + "'");

  MemoryPipe pipe(spec.latency_ms);
  auto ctrl = pipe.controller_end();
  auto dev = pipe.device_end();
  SimulatedWrench wrench(spec.ramp, sub_seed(spec.seed, 1));
  TrackingSimulator tracker(spec.tracking, sub_seed(spec.seed, 2));
  std::unique_ptr<Operator> owned;
  Operator* op = custom;
  if (!op) {
    owned = make_operator(scene, *scenario, spec);
    op = owned.get();
  }

  SessionConfig cfg;
  cfg.session_id = spec.session_id;
  cfg.method = spec.method;
  cfg.tracking = spec.tracking;
  cfg.max_duration_ms = spec.max_duration_ms;
  cfg.run_config = to_json(spec);
  SessionEngine engine(scene, *scenario, cfg, ctrl);

  const double dt = static_cast<double>(spec.tick_ms) / 1000.0;
  std::uint64_t now = 0;
  pipe.set_time(now);
  engine.start(now);

  SessionResult res;
  while (!engine.finished()) {
    now += spec.tick_ms;
    ++res.ticks;
    pipe.set_time(now);
    if (spec.disconnect_at_ms && now >= *spec.disconnect_at_ms && pipe.connected()) pipe.disconnect();

    OperatorView view;
    view.now_ms = now;
    view.dt_s = dt;
    view.scene = &scene;
    view.scenario = scenario;
    view.method = spec.method;
    view.session_finished = engine.finished();
    view.current_step = engine.step_index();
    if (spec.method == Method::kArGuided) {
      view.arrow_site = engine.current_site();
      view.target_armed = engine.target_armed();
    }
    view.wrench = wrench.state();
    const OperatorAction act = op->act(view);

    std::string out = wrench.receive(dev.receive());
    out += wrench.step(act.effort, dt);
    if (!out.empty()) dev.send(out);

    TickInput in;
    in.now_ms = now;
    in.wrench_pose = act.wrench_pose;
    if (spec.method == Method::kArGuided) {
      const TrackingEvent ev = tracker.step(dt);
      in.tracking_event = ev.kind;
      in.tracking_ok = tracker.tracking_ok();
      in.wrench_pose = tracker.report(act.wrench_pose);
    }
    in.commands = act.commands;
    engine.tick(in);
  }

  res.spec = spec;
  res.log = engine.log();
  res.report = engine.report();
  res.manual_log = engine.manual_log();
  res.committed = op->committed();
  res.aborted = engine.aborted();
  res.end_ms = now;
  return res;
}

/// Writes <id>.events.jsonl, <id>.report.csv and, for conventional sessions,
/// <id>.manual.csv into `dir`.
inline void write_session_files(const SessionResult& r, const std::filesystem::path& dir) {
  const std::string id = r.spec.session_id;
  write_text_file(dir / (id + ".events.jsonl"), r.log.to_jsonl());
  write_report(r.report, dir / (id + ".report.csv"));
  if (r.spec.method == Method::kConventional) write_text_file(dir / (id + ".manual.csv"), format_manual_log(r.manual_log));
}

}  // namespace torqueflow
