#pragma once

// Live service: simulated wrench on a TCP port, the session engine connected
// to it as a client, and the operator console channel (HTTP static files plus
// one WebSocket at /ws) on a second port.
//
// Console channel, one JSON object per WebSocket text message.
// Server to console:
//   {"hello":{"session_id":..,"method":..,"scenario":{..},"sites":[..],"tool_offset_mm":[..]}}
//   {"event":{<session event>}}          every logged event, in order
//   {"g":"ARROW",...}                   every guidance item (same as the log)
//   {"wrench":{"mode":..,"target_cnm":..,"applied_cnm":..,"peak_cnm":..,"led":n,"red":b}}
//   {"error":"session occupied"} | {"rejected":"<reason>"}
// Console to server:
//   {"op":"pose","x":..,"y":..,"z":..}   bit-tip position, world mm (z optional)
//   {"op":"press"} | {"op":"release"}
//   {"op":"manual_set","target_cnm":n}
//   {"op":"manual_log","part":..,"site":..,"torque_cnm":n}
//   {"op":"finish"} | {"op":"abort"}
// A console that reconnects receives hello plus every event and guidance
// message again, so it rebuilds the same view.

#include <torqueflow/engagement.hpp>
#include <torqueflow/device.hpp>
#include <torqueflow/net.hpp>
#include <torqueflow/orchestrator.hpp>
#include <torqueflow/report.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace torqueflow {

struct ServeOptions {
  Scene scene;
  std::string scene_path;
  std::string scenario_id;
  Method method = Method::kArGuided;
  std::string session_id = "LIVE";
  std::string bind = "127.0.0.1";
  std::uint16_t wrench_port = 7401;
  std::uint16_t console_port = 8080;
  std::filesystem::path static_dir;  // empty: built-in placeholder page
  std::filesystem::path out_dir = ".";
  TrackingConfig tracking;
  RampConfig ramp;
  std::uint64_t seed = 1;
  std::uint64_t tick_ms = 10;
  std::uint64_t max_duration_ms = 0;
  std::function<void(std::uint16_t wrench_port, std::uint16_t console_port)> on_ready;
};

struct ServeOutcome {
  bool aborted = false;
  std::string abort_reason;
  std::filesystem::path log_path;
  std::filesystem::path report_path;
};

namespace live_detail {

using Clock = std::chrono::steady_clock;

/// Messages for the console. `history` holds everything a reconnecting
/// console must see again; `live` holds transient wrench state.
struct ConsoleOutbox {
  std::mutex mu;
  std::vector<std::string> history;
  std::optional<std::string> wrench_state;
  bool closing = false;
};

struct ConsoleInbox {
  std::mutex mu;
  std::deque<nlohmann::json> ops;
};

inline nlohmann::json hello(const ServeOptions& o, const Scenario& sc) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : world_sites(o.scene.parts))
    sites.push_back({{"part", s.ref.part_id}, {"site", s.ref.site_id}, {"x", s.head.x()}, {"y", s.head.y()}, {"z", s.head.z()}});
  const Vec3& off = o.scene.tool.bit_tip_offset.translation;
  return {{"hello",
           {{"session_id", o.session_id},
            {"method", std::string(to_string(o.method))},
            {"scenario", scenario_to_json(sc)},
            {"sites", sites},
            {"tool_offset_mm", {off.x(), off.y(), off.z()}}}}};
}

inline std::string placeholder_page() {
  return "<!doctype html><title>torqueflow</title><p>Console channel at <code>/ws</code>. "
         "Start serve with --static to host the operator console.</p>\n";
}

/// Resolves a request path inside `root`, refusing anything that escapes it.
inline std::optional<std::filesystem::path> static_path(const std::filesystem::path& root, std::string path) {
  if (const auto q = path.find('?'); q != std::string::npos) path.resize(q);
  if (path.empty() || path == "/") path = "/index.html";
  if (path.find("..") != std::string::npos) return std::nullopt;
  const auto p = root / path.substr(1);
  if (!std::filesystem::is_regular_file(p)) return std::nullopt;
  return p;
}

/// Simulated wrench endpoint. Serves one controller connection at a time.
class WrenchServer {
 public:
  WrenchServer(const ServeOptions& o, std::atomic<bool>& effort, std::atomic<bool>& stop)
      : listener_(net::listen_tcp(o.wrench_port, o.bind)),
        wrench_(o.ramp, o.seed),
        tick_ms_(o.tick_ms),
        effort_(effort),
        stop_(stop) {}

  std::uint16_t port() const { return net::local_port(listener_); }
  void start() { thread_ = std::thread([this] { run(); }); }
  void join() {
    if (thread_.joinable()) thread_.join();
  }

  WrenchState snapshot() {
    std::lock_guard lk(mu_);
    return state_;
  }

 private:
  void run() {
    while (!stop_) {
      auto client = net::accept_for(listener_, 50);
      if (!client) continue;
      auto next = Clock::now();
      std::string in;
      while (!stop_) {
        next += std::chrono::milliseconds(tick_ms_);
        std::this_thread::sleep_until(next);
        in.clear();
        if (net::read_available(client->fd(), in) == net::ReadStatus::kClosed) break;
        std::string out = wrench_.receive(in);
        out += wrench_.step(effort_.load(), static_cast<double>(tick_ms_) / 1000.0);
        {
          std::lock_guard lk(mu_);
          state_ = wrench_.state();
        }
        if (!out.empty() && !net::send_all(client->fd(), out)) break;
      }
    }
  }

  net::Socket listener_;
  SimulatedWrench wrench_;
  std::uint64_t tick_ms_;
  std::atomic<bool>& effort_;
  std::atomic<bool>& stop_;
  std::mutex mu_;
  WrenchState state_;
  std::thread thread_;
};

/// HTTP static files plus the single console WebSocket.
class ConsoleServer {
 public:
  ConsoleServer(const ServeOptions& o, ConsoleOutbox& out, ConsoleInbox& in, std::atomic<bool>& effort,
                std::atomic<bool>& stop)
      : listener_(net::listen_tcp(o.console_port, o.bind)),
        static_dir_(o.static_dir),
        ar_(o.method == Method::kArGuided),
        out_(out),
        in_(in),
        effort_(effort),
        stop_(stop) {}

  std::uint16_t port() const { return net::local_port(listener_); }
  void start() { thread_ = std::thread([this] { run(); }); }
  void join() {
    if (thread_.joinable()) thread_.join();
  }

 private:
  struct Client {
    net::Socket sock;
    net::WsDecoder decoder;
    std::size_t cursor = 0;
    std::string last_wrench;
  };

  void run() {
    while (!stop_) {
      std::vector<pollfd> fds{{listener_.fd(), POLLIN, 0}};
      if (client_) fds.push_back({client_->sock.fd(), POLLIN, 0});
      ::poll(fds.data(), fds.size(), 10);
      if (fds[0].revents & POLLIN) accept_one();
      if (client_ && fds.size() > 1 && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) read_client();
      if (client_) flush_client();
      bool closing;
      {
        std::lock_guard lk(out_.mu);
        closing = out_.closing;
      }
      if (closing && client_) {
        flush_client();
        net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kClose, std::string("\x03\xe8", 2)));
        client_.reset();
      }
    }
    if (client_) net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kClose, std::string("\x03\xe9", 2)));
  }

  void accept_one() {
    auto s = net::accept_for(listener_, 0);
    if (!s) return;
    std::string buf;
    std::optional<net::HttpRequest> req;
    const auto deadline = Clock::now() + std::chrono::seconds(2);
    try {
      while (!req && Clock::now() < deadline) {
        if (!net::wait_readable(s->fd(), 50)) continue;
        if (net::read_available(s->fd(), buf) == net::ReadStatus::kClosed && buf.empty()) return;
        req = net::take_http_request(buf);
      }
    } catch (const Error&) {
      net::send_all(s->fd(), net::http_response(400, "Bad Request", "text/plain", "bad request\n"));
      return;
    }
    if (!req) return;
    if (net::is_websocket_upgrade(*req)) {
      if (req->path != "/ws") {
        net::send_all(s->fd(), net::http_response(404, "Not Found", "text/plain", "no such channel\n"));
        return;
      }
      net::send_all(s->fd(), net::websocket_handshake_response(*req));
      if (client_) {
        net::send_all(s->fd(), net::ws_frame(net::WsOpcode::kText, R"({"error":"session occupied"})"));
        net::send_all(s->fd(), net::ws_frame(net::WsOpcode::kClose, std::string("\x03\xf0", 2) + "session occupied"));
        return;
      }
      client_ = Client{std::move(*s), {}, 0, {}};
      client_->decoder.feed(buf);
      return;
    }
    if (req->method != "GET") {
      net::send_all(s->fd(), net::http_response(405, "Method Not Allowed", "text/plain", "GET only\n"));
      return;
    }
    if (static_dir_.empty()) {
      const bool root = req->path == "/" || req->path == "/index.html";
      net::send_all(s->fd(), root ? net::http_response(200, "OK", "text/html; charset=utf-8", placeholder_page())
                                  : net::http_response(404, "Not Found", "text/plain", "not found\n"));
      return;
    }
    const auto p = static_path(static_dir_, req->path);
    if (!p) {
      net::send_all(s->fd(), net::http_response(404, "Not Found", "text/plain", "not found\n"));
      return;
    }
    net::send_all(s->fd(), net::http_response(200, "OK", net::content_type_for(p->string()), read_text_file(*p)));
  }

  void read_client() {
    std::string bytes;
    const auto st = net::read_available(client_->sock.fd(), bytes);
    client_->decoder.feed(bytes);
    try {
      while (auto m = client_->decoder.next()) {
        if (m->opcode == net::WsOpcode::kClose) {
          drop_client();
          return;
        }
        if (m->opcode == net::WsOpcode::kPing) {
          net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kPong, m->payload));
          continue;
        }
        if (m->opcode == net::WsOpcode::kText) on_text(m->payload);
      }
    } catch (const Error&) {
      drop_client();
      return;
    }
    if (st == net::ReadStatus::kClosed) drop_client();
  }

  void drop_client() {
    client_.reset();
    effort_ = false;  // a vanished console cannot hold the trigger
  }

  void reject(const std::string& why) {
    net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kText, nlohmann::json{{"rejected", why}}.dump()));
  }

  void on_text(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      return reject("malformed JSON");
    }
    if (!j.is_object() || !j.contains("op") || !j["op"].is_string()) return reject("missing op");
    const std::string op = j["op"].get<std::string>();
    if (op == "press") {
      effort_ = true;
      return;
    }
    if (op == "release") {
      effort_ = false;
      return;
    }
    if ((op == "manual_set" || op == "manual_log") && ar_) return reject(op + " is not available in AR_GUIDED mode");
    if (op != "pose" && op != "manual_set" && op != "manual_log" && op != "finish" && op != "abort")
      return reject("unknown op '" + op + "'");
    std::lock_guard lk(in_.mu);
    in_.ops.push_back(std::move(j));
  }

  void flush_client() {
    std::vector<std::string> pending;
    std::optional<std::string> wrench;
    {
      std::lock_guard lk(out_.mu);
      for (std::size_t i = client_->cursor; i < out_.history.size(); ++i) pending.push_back(out_.history[i]);
      client_->cursor = out_.history.size();
      wrench = out_.wrench_state;
    }
    for (const auto& m : pending)
      if (!net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kText, m))) return drop_client();
    if (wrench && *wrench != client_->last_wrench) {
      client_->last_wrench = *wrench;
      if (!net::send_all(client_->sock.fd(), net::ws_frame(net::WsOpcode::kText, *wrench))) return drop_client();
    }
  }

  net::Socket listener_;
  std::filesystem::path static_dir_;
  bool ar_;
  ConsoleOutbox& out_;
  ConsoleInbox& in_;
  std::atomic<bool>& effort_;
  std::atomic<bool>& stop_;
  std::optional<Client> client_;
  std::thread thread_;
};

inline std::string wrench_json(const WrenchState& w) {
  return nlohmann::json{{"wrench",
                         {{"mode", std::string(to_string(w.mode))},
                          {"target_cnm", w.target_cnm},
                          {"applied_cnm", w.applied_cnm},
                          {"peak_cnm", w.peak_cnm},
                          {"led", w.led.lit_segments},
                          {"red", w.led.red}}}}
      .dump();
}

}  // namespace live_detail

/// Runs one live session until it ends or `stop` is set. On stop an unfinished
/// session is closed as SESSION_ABORTED. Log and report are written to out_dir.
inline ServeOutcome serve(const ServeOptions& o, std::atomic<bool>& stop) {
  using namespace live_detail;
  const Scenario* sc = o.scene.find_scenario(o.scenario_id);
  if (!sc) throw ConfigError("unknown scenario '" + o.scenario_id + "'");
  if (o.tick_ms == 0) throw ConfigError("tick_ms must be >= 1");
  std::filesystem::create_directories(o.out_dir);

  std::atomic<bool> effort{false};
  std::atomic<bool> halt{false};  // stops the worker threads
  ConsoleOutbox outbox;
  ConsoleInbox inbox;
  WrenchServer wrench(o, effort, halt);
  ConsoleServer console(o, outbox, inbox, effort, halt);
  outbox.history.push_back(hello(o, *sc).dump());
  wrench.start();
  console.start();

  ServeOutcome outcome;
  auto shutdown = [&] {
    halt = true;
    wrench.join();
    console.join();
  };
  try {
    net::TcpLink link(net::connect_tcp(o.bind == "0.0.0.0" ? "127.0.0.1" : o.bind, wrench.port()));
    if (o.on_ready) o.on_ready(wrench.port(), console.port());

    SessionConfig cfg;
    cfg.session_id = o.session_id;
    cfg.method = o.method;
    cfg.tracking = o.tracking;
    cfg.max_duration_ms = o.max_duration_ms;
    cfg.run_config = {{"mode", "live"}, {"scene_path", o.scene_path}, {"scenario_id", o.scenario_id}, {"seed", o.seed}};
    SessionEngine engine(o.scene, *sc, cfg, link);
    engine.log().set_listener([&](const SessionEvent& e) {
      std::lock_guard lk(outbox.mu);
      outbox.history.push_back("{\"event\":" + encode_event(e) + "}");
      if (auto g = from_session_event(e)) outbox.history.push_back(encode_guidance(*g));
    });
    TrackingSimulator tracker(o.tracking, o.seed ^ 0x5eedULL);

    const auto t0 = Clock::now();
    auto now_ms = [&] {
      return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count());
    };
    engine.start(now_ms());
    Vec3 tip = Vec3(-100, -100, 100);
    auto next = Clock::now();
    while (!engine.finished()) {
      next += std::chrono::milliseconds(o.tick_ms);
      std::this_thread::sleep_until(next);
      const std::uint64_t now = now_ms();
      if (stop) {
        engine.abort(now, "shutdown");
        break;
      }
      std::vector<OperatorCommand> cmds;
      {
        std::lock_guard lk(inbox.mu);
        for (const auto& j : inbox.ops) {
          const std::string op = j["op"].get<std::string>();
          try {
            if (op == "pose") {
              tip = Vec3(j.at("x").get<double>(), j.at("y").get<double>(), j.value("z", tip.z()));
            } else if (op == "manual_set") {
              cmds.push_back(OperatorCommand::manual_set(j.at("target_cnm").get<TorqueCnm>()));
            } else if (op == "manual_log") {
              cmds.push_back(OperatorCommand::manual_log({j.at("part").get<std::string>(), j.at("site").get<std::string>()},
                                                         j.at("torque_cnm").get<TorqueCnm>()));
            } else if (op == "finish") {
              cmds.push_back(OperatorCommand::finish());
            } else if (op == "abort") {
              cmds.push_back(OperatorCommand::abort("operator_abort"));
            }
          } catch (const nlohmann::json::exception&) {
            // Malformed op fields: ignored, the console validates its own input.
          }
        }
        inbox.ops.clear();
      }
      Pose pose;
      pose.translation = tip - o.scene.tool.bit_tip_offset.translation;
      TickInput in;
      in.now_ms = now;
      in.wrench_pose = pose;
      if (o.method == Method::kArGuided) {
        const auto ev = tracker.step(static_cast<double>(o.tick_ms) / 1000.0);
        in.tracking_event = ev.kind;
        in.tracking_ok = tracker.tracking_ok();
        in.wrench_pose = tracker.report(pose);
      }
      in.commands = cmds;
      engine.tick(in);
      {
        std::lock_guard lk(outbox.mu);
        outbox.wrench_state = wrench_json(wrench.snapshot());
      }
    }

    outcome.aborted = engine.aborted();
    if (outcome.aborted) outcome.abort_reason = engine.log().events().back().note.value_or("");
    outcome.log_path = o.out_dir / (o.session_id + ".events.jsonl");
    outcome.report_path = o.out_dir / (o.session_id + ".report.csv");
    write_text_file(outcome.log_path, engine.log().to_jsonl());
    write_report(engine.report(), outcome.report_path);
    if (o.method == Method::kConventional)
      write_text_file(o.out_dir / (o.session_id + ".manual.csv"), format_manual_log(engine.manual_log()));

    // Let the console drain the final events before closing.
    {
      std::lock_guard lk(outbox.mu);
      outbox.closing = true;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
  return outcome;
}

}  // namespace torqueflow
