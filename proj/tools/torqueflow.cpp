// torqueflow command-line entry point.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 runtime abort.

#include <torqueflow/bench.hpp>
#include <torqueflow/fixture.hpp>
#include <torqueflow/guidance.hpp>
#include <torqueflow/live.hpp>
#include <torqueflow/metrics.hpp>
#include <torqueflow/plot.hpp>
#include <torqueflow/scene_io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace torqueflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

Method method_arg(const std::string& s) {
  const auto m = parse_method(s);
  if (!m) throw ConfigError("unknown method '" + s + "' (use ar or conventional)");
  return *m;
}

/// A profile name, or a path to a JSON profile fragment.
OperatorProfile profile_arg(const std::string& s) {
  if (fs::is_regular_file(s)) {
    try {
      return profile_from_json(nlohmann::json::parse(read_text_file(s)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("profile " + s + ": " + e.what());
    }
  }
  return named_profile(s);
}

std::string flags_text(const ErrorFlags& f) {
  if (!f.any()) return "none";
  std::string out;
  if (f.wrong_order) out += "wrong_order ";
  if (f.wrong_screw) out += "wrong_screw ";
  if (f.stale_torque) out += "stale_torque ";
  out.pop_back();
  return out;
}

// ---- simulate ----

struct SimulateArgs {
  std::string scene;
  std::string scenario;
  std::string method = "ar";
  int n = 1;
  std::uint64_t seed = 1;
  std::string profile = "perfect";
  std::string out = "out";
  int jobs = 1;
  std::uint64_t tick_ms = 10;
  std::string prefix = "S";
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.n < 1) throw ConfigError("--n must be at least 1");
  if (a.jobs < 1) throw ConfigError("--jobs must be at least 1");
  const Scene scene = load_scene(a.scene);
  if (!a.scenario.empty() && !scene.find_scenario(a.scenario)) throw ConfigError("unknown scenario '" + a.scenario + "'");
  if (scene.scenarios.empty()) throw ConfigError("scene has no scenarios");
  const Method method = method_arg(a.method);
  const OperatorProfile profile = profile_arg(a.profile);
  fs::create_directories(a.out);

  std::vector<RunSpec> specs;
  for (int i = 0; i < a.n; ++i) {
    RunSpec s;
    char id[32];
    std::snprintf(id, sizeof id, "%s%03d", a.prefix.c_str(), i + 1);
    s.session_id = id;
    s.method = method;
    s.scenario_id = a.scenario.empty() ? scene.scenarios[static_cast<std::size_t>(i) % scene.scenarios.size()].scenario_id
                                       : a.scenario;
    s.scene_path = a.scene;
    s.seed = sub_seed(a.seed, static_cast<std::uint64_t>(i));
    s.profile_name = a.profile;
    s.profile = profile;
    s.tick_ms = a.tick_ms;
    if (profile.adversarial) s.max_duration_ms = 120000;
    s.check();
    specs.push_back(std::move(s));
  }

  std::cout << "config: "
            << nlohmann::json{{"scene", a.scene},  {"scenario", a.scenario}, {"method", std::string(to_string(method))},
                              {"n", a.n},          {"seed", a.seed},         {"profile", a.profile},
                              {"out", a.out},      {"tick_ms", a.tick_ms}}
                   .dump()
            << "\n";

  std::vector<SessionResult> results(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) results[i] = run_session(scene, specs[i]);
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < a.jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int with_errors = 0, aborted = 0;
  for (const auto& r : results) {
    write_session_files(r, a.out);
    int validated = 0;
    for (const auto& row : r.report.rows) validated += row.validated;
    std::string errors = "-";
    if (r.aborted) {
      ++aborted;
      errors = "aborted(" + r.log.events().back().note.value_or("") + ")";
    } else {
      const auto f = classify_errors(r.log.events(), r.manual_log, *scene.find_scenario(r.spec.scenario_id));
      with_errors += f.any();
      errors = flags_text(f);
    }
    char line[256];
    std::snprintf(line, sizeof line, "%s %s %s seed=%llu duration=%.3fs validated=%d/%zu errors=%s",
                  r.spec.session_id.c_str(), std::string(to_string(r.spec.method)).c_str(), r.spec.scenario_id.c_str(),
                  static_cast<unsigned long long>(r.spec.seed), r.report.total_duration_s, validated, r.report.rows.size(),
                  errors.c_str());
    std::cout << line << "\n";
  }
  std::cout << "sessions=" << results.size() << " with_errors=" << with_errors << " aborted=" << aborted << "\n";
  return kExitOk;
}

// ---- serve ----

struct ServeArgs {
  std::string scene;
  std::string scenario;
  std::string method = "ar";
  std::string static_dir;
  std::string out = "out";
  std::string session_id = "LIVE";
  std::string bind = "127.0.0.1";
  std::uint64_t seed = 1;
  int wrench_port = -1;
  int console_port = -1;
};

std::uint16_t port_value(long v, const std::string& what) {
  if (v < 0 || v > 65535) throw ConfigError(what + " out of range: " + std::to_string(v));
  return static_cast<std::uint16_t>(v);
}

/// TORQUEFLOW_PORT is "<wrench>" or "<wrench>,<console>".
void apply_port_env(ServeOptions& o) {
  const char* env = std::getenv("TORQUEFLOW_PORT");
  if (!env || !*env) return;
  const std::string v = env;
  const auto comma = v.find(',');
  try {
    o.wrench_port = port_value(std::stol(v.substr(0, comma)), "TORQUEFLOW_PORT");
    if (comma != std::string::npos) o.console_port = port_value(std::stol(v.substr(comma + 1)), "TORQUEFLOW_PORT");
  } catch (const std::logic_error&) {
    throw ConfigError("TORQUEFLOW_PORT must be '<wrench>[,<console>]', got '" + v + "'");
  }
}

int cmd_serve(const ServeArgs& a) {
  ServeOptions o;
  o.scene = load_scene(a.scene);
  o.scene_path = a.scene;
  o.scenario_id = a.scenario.empty() ? (o.scene.scenarios.empty() ? "" : o.scene.scenarios.front().scenario_id) : a.scenario;
  o.method = method_arg(a.method);
  o.session_id = a.session_id;
  o.bind = a.bind;
  o.static_dir = a.static_dir;
  o.out_dir = a.out;
  o.seed = a.seed;
  apply_port_env(o);
  if (a.wrench_port >= 0) o.wrench_port = port_value(a.wrench_port, "--wrench-port");
  if (a.console_port >= 0) o.console_port = port_value(a.console_port, "--console-port");
  if (!a.static_dir.empty() && !fs::is_directory(a.static_dir)) throw ConfigError("--static is not a directory: " + a.static_dir);
  o.on_ready = [&](std::uint16_t w, std::uint16_t c) {
    std::cout << "config: "
              << nlohmann::json{{"scene", a.scene},      {"scenario", o.scenario_id}, {"method", std::string(to_string(o.method))},
                                {"session_id", a.session_id}, {"seed", a.seed},        {"wrench_port", w},
                                {"console_port", c},     {"out", a.out}}
                     .dump()
              << "\nconsole: http://" << a.bind << ":" << c << "/  channel ws://" << a.bind << ":" << c << "/ws"
              << std::endl;
  };
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const ServeOutcome r = serve(o, g_stop);
  std::cout << "log: " << r.log_path.string() << "\nreport: " << r.report_path.string() << "\n";
  if (r.aborted) {
    std::cout << "session aborted: " << r.abort_reason << "\n";
    return kExitRuntime;
  }
  std::cout << "session complete\n";
  return kExitOk;
}

// ---- replay ----

int cmd_replay(const std::string& log_path, const std::string& scene_override, bool resimulate) {
  const auto events = read_event_log(log_path);
  const auto recorded = encode_guidance_stream(recorded_guidance(events));
  const auto derived = encode_guidance_stream(derive_guidance(events));
  const SessionHeader h = read_session_header(events.front());
  std::cout << "session: " << h.session_id << " " << to_string(h.method) << " " << h.scenario.scenario_id << " events=" << events.size()
            << "\n";
  bool ok = true;
  if (recorded == derived) {
    std::cout << "guidance: " << recorded_guidance(events).size() << " items match the derived stream\n";
  } else {
    std::cout << "guidance: recorded stream differs from the derived stream\n";
    ok = false;
  }

  const auto& cfg = *events.front().config;
  if (resimulate && cfg.contains("seed") && cfg.contains("profile")) {
    const RunSpec spec = run_spec_from_json(cfg);
    const std::string scene_path = scene_override.empty() ? spec.scene_path : scene_override;
    if (scene_path.empty()) throw ConfigError("log does not name its scene; pass --scene");
    const Scene scene = load_scene(scene_path);
    const SessionResult again = run_session(scene, spec);
    const std::string original = read_text_file(log_path);
    if (again.log.to_jsonl() == original) {
      std::cout << "resimulation: event log byte-identical\n";
    } else {
      std::cout << "resimulation: event log differs\n";
      ok = false;
    }
    if (encode_guidance_stream(recorded_guidance(again.log.events())) != recorded) ok = false;
  }
  std::cout << "deterministic: " << (ok ? "OK" : "FAILED") << "\n";
  return ok ? kExitOk : kExitRuntime;
}

// ---- score / plot / fixture ----

int cmd_score(const std::string& dir, const std::string& out_dir) {
  const LoadedStudy study = load_study(dir);
  const StudySummary s = aggregate_study(study.sessions);
  const fs::path out = out_dir.empty() ? fs::path(dir) : fs::path(out_dir);
  fs::create_directories(out);
  const std::string table = format_table1(s);
  write_text_file(out / "table1.csv", table);
  write_text_file(out / "radar.json", radar_json(s).dump(1) + "\n");
  std::cout << table;
  if (!study.excluded.empty()) {
    std::cout << "excluded (aborted):";
    for (const auto& id : study.excluded) std::cout << " " << id;
    std::cout << "\n";
  }
  char line[160];
  std::snprintf(line, sizeof line, "reliability %.1f / %.1f  efficiency %.1f / %.1f", s.conventional.radar.reliability,
                s.ar.radar.reliability, s.conventional.radar.efficiency, s.ar.radar.efficiency);
  std::cout << line;
  if (s.tlx_reduction_pct) {
    std::snprintf(line, sizeof line, "  task load reduction %.1f%%", *s.tlx_reduction_pct);
    std::cout << line;
  }
  std::cout << "\nwrote " << (out / "table1.csv").string() << " and " << (out / "radar.json").string() << "\n";
  return kExitOk;
}

int cmd_plot(const std::string& radar_path, const std::string& out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(radar_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(radar_path, 0, e.what());
  }
  write_text_file(out, radar_svg(j));
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_fixture(const std::string& scene_path, const std::string& out, std::uint64_t seed) {
  const Scene scene = load_scene(scene_path);
  const auto sessions = generate_fixture(scene, scene_path, seed);
  write_fixture(sessions, out);
  std::cout << "wrote " << sessions.size() << " sessions to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torqueflow: guided screw tightening sessions, simulation and scoring"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run headless sessions with a scripted operator");
  s->add_option("--scene", sim.scene, "Scene file")->required();
  s->add_option("--scenario", sim.scenario, "Scenario id (default: cycle through all)");
  s->add_option("--method", sim.method, "ar or conventional")->capture_default_str();
  s->add_option("--n", sim.n, "Number of sessions")->capture_default_str();
  s->add_option("--seed", sim.seed, "Base seed")->capture_default_str();
  s->add_option("--profile", sim.profile, "perfect, paper-rates, paper-rates-paced, adversarial, or a JSON file")
      ->capture_default_str();
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();
  s->add_option("--jobs", sim.jobs, "Parallel sessions")->capture_default_str();
  s->add_option("--tick-ms", sim.tick_ms, "Simulation tick")->capture_default_str();
  s->add_option("--prefix", sim.prefix, "Session id prefix")->capture_default_str();

  ServeArgs srv;
  auto* v = app.add_subcommand("serve", "Run a live session: wrench endpoint, orchestrator and console channel");
  v->add_option("--scene", srv.scene, "Scene file")->required();
  v->add_option("--scenario", srv.scenario, "Scenario id (default: first)");
  v->add_option("--method", srv.method, "ar or conventional")->capture_default_str();
  v->add_option("--static", srv.static_dir, "Directory with the operator console assets");
  v->add_option("--out", srv.out, "Output directory")->capture_default_str();
  v->add_option("--session-id", srv.session_id, "Session id")->capture_default_str();
  v->add_option("--bind", srv.bind, "Bind address")->capture_default_str();
  v->add_option("--seed", srv.seed, "Wrench and tracking seed")->capture_default_str();
  v->add_option("--wrench-port", srv.wrench_port, "Wrench port (default 7401 or TORQUEFLOW_PORT)");
  v->add_option("--console-port", srv.console_port, "Console port (default 8080 or TORQUEFLOW_PORT)");

  std::string replay_log, replay_scene;
  bool no_resim = false;
  auto* r = app.add_subcommand("replay", "Re-derive the guidance stream of a log and check determinism");
  r->add_option("log", replay_log, "Event log (.events.jsonl)")->required();
  r->add_option("--scene", replay_scene, "Scene file (default: the one named in the log)");
  r->add_flag("--no-resim", no_resim, "Skip re-running the simulation");

  std::string score_dir, score_out;
  auto* c = app.add_subcommand("score", "Aggregate a study bundle into table1.csv and radar.json");
  c->add_option("dir", score_dir, "Study bundle directory")->required();
  c->add_option("--out", score_out, "Output directory (default: the bundle)");

  std::string plot_in, plot_out = "radar.svg";
  auto* p = app.add_subcommand("plot", "Render radar.json as an SVG radar chart");
  p->add_option("radar", plot_in, "radar.json")->required();
  p->add_option("--out", plot_out, "SVG output")->capture_default_str();

  std::string fx_scene, fx_out = "data/fixtures/paper_study";
  std::uint64_t fx_seed = 20240611;
  auto* f = app.add_subcommand("fixture", "Regenerate the calibrated study bundle");
  f->add_option("--scene", fx_scene, "Scene file")->required();
  f->add_option("--out", fx_out, "Output directory")->capture_default_str();
  f->add_option("--seed", fx_seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*v) return cmd_serve(srv);
    if (*r) return cmd_replay(replay_log, replay_scene, !no_resim);
    if (*c) return cmd_score(score_dir, score_out);
    if (*p) return cmd_plot(plot_in, plot_out);
    if (*f) return cmd_fixture(fx_scene, fx_out, fx_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SceneError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
