#pragma once

// Session engine. One logical event loop per session: each tick consumes the
// wrench messages that arrived, the tracked wrench pose and operator
// commands, and appends to the session's event log.
//
// AR_GUIDED: steps run strictly in scenario order. Engaging the current
// step's screw pushes its target torque to the wrench; engaging any other
// screw re-shows the arrow and pushes nothing. A step validates only when a
// TARGET_REACHED for the step's target arrives while the current engagement
// holds the step's screw and the push made during that engagement was
// acknowledged.
//
// CONVENTIONAL: nothing is enforced. Manual torque sets and log entries are
// forwarded and recorded; every torque episode is attributed to the screw
// the wrench was actually on.

#include <torqueflow/engagement.hpp>
#include <torqueflow/guidance.hpp>
#include <torqueflow/link.hpp>
#include <torqueflow/protocol.hpp>
#include <torqueflow/report.hpp>
#include <torqueflow/scene.hpp>
#include <torqueflow/session_log.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace torqueflow {

enum class StepPhase : std::uint8_t { kAwaitEngage, kEngaged, kTightening, kValidated };

inline std::string_view to_string(StepPhase p) {
  switch (p) {
    case StepPhase::kAwaitEngage: return "AWAIT_ENGAGE";
    case StepPhase::kEngaged: return "ENGAGED";
    case StepPhase::kTightening: return "TIGHTENING";
    case StepPhase::kValidated: return "VALIDATED";
  }
  return "?";
}

struct OperatorCommand {
  enum class Kind : std::uint8_t { kManualSet, kManualLog, kFinish, kAbort };
  Kind kind = Kind::kFinish;
  TorqueCnm torque_cnm = 0;
  SiteRef site;
  std::string note;

  static OperatorCommand manual_set(TorqueCnm cnm) { return {Kind::kManualSet, cnm, {}, {}}; }
  static OperatorCommand manual_log(SiteRef site, TorqueCnm cnm) { return {Kind::kManualLog, cnm, std::move(site), {}}; }
  static OperatorCommand finish() { return {Kind::kFinish, 0, {}, {}}; }
  static OperatorCommand abort(std::string why) { return {Kind::kAbort, 0, {}, std::move(why)}; }
};

struct SessionConfig {
  std::string session_id = "session";
  Method method = Method::kArGuided;
  TrackingConfig tracking;
  std::uint64_t heartbeat_period_ms = 2000;
  int heartbeat_max_missed = 3;
  std::uint64_t max_duration_ms = 0;  // 0: unlimited
  // Echoed verbatim into SESSION_START next to session_id/method/scenario.
  nlohmann::json run_config = nlohmann::json::object();
};

struct TickInput {
  std::uint64_t now_ms = 0;
  Pose wrench_pose;  // as reported by tracking
  bool tracking_ok = true;
  TrackingEventKind tracking_event = TrackingEventKind::kNone;
  std::span<const OperatorCommand> commands;
};

class SessionEngine {
 public:
  SessionEngine(const Scene& scene, Scenario scenario, SessionConfig cfg, ByteLink& link)
      : scenario_(std::move(scenario)),
        cfg_(std::move(cfg)),
        link_(link),
        tool_(scene.tool),
        sites_(world_sites(scene.parts)),
        heartbeat_(cfg_.heartbeat_period_ms, cfg_.heartbeat_max_missed),
        rows_(scenario_.steps.size()) {
    cfg_.tracking.check();
    if (scenario_.steps.empty()) throw ConfigError("scenario has no steps");
    for (std::size_t i = 0; i < scenario_.steps.size(); ++i) {
      rows_[i].part_id = scenario_.steps[i].site.part_id;
      rows_[i].site_id = scenario_.steps[i].site.site_id;
      rows_[i].target_cnm = scenario_.steps[i].target_cnm;
    }
  }

  void start(std::uint64_t now_ms) {
    SessionEvent e;
    e.ts_ms = now_ms;
    e.kind = EventKind::kSessionStart;
    nlohmann::json c = cfg_.run_config.is_object() ? cfg_.run_config : nlohmann::json::object();
    c["session_id"] = cfg_.session_id;
    c["method"] = std::string(to_string(cfg_.method));
    c["scenario"] = scenario_to_json(scenario_);
    e.config = std::move(c);
    const auto& start = log_.append(std::move(e));
    start_ms_ = start.ts_ms;
    heartbeat_.start(now_ms);
    if (ar()) show_arrow(now_ms);
  }

  void tick(const TickInput& in) {
    if (finished()) return;
    now_ = in.now_ms;
    if (!link_.connected()) return abort(in.now_ms, "wrench_disconnected");

    reader_.feed(link_.receive());
    for (;;) {
      std::optional<WrenchMessage> msg;
      try {
        msg = reader_.next();
      } catch (const ProtocolError& e) {
        SessionEvent ev = event(EventKind::kWrenchNack);
        ev.note = "bad_frame: " + std::string(e.what());
        log_.append(std::move(ev));
        continue;
      }
      if (!msg) break;
      on_message(*msg);
      if (finished()) return;
    }

    if (ar()) {
      if (in.tracking_event == TrackingEventKind::kLoss) {
        log_.append(event(EventKind::kTrackingLost));
        guide({GuidanceKind::kTrackingLost, {}, {}, {}, {}, {}});
      } else if (in.tracking_event == TrackingEventKind::kRedetect) {
        log_.append(event(EventKind::kTrackingRedetected));
        guide({GuidanceKind::kTrackingOk, {}, {}, {}, {}, {}});
      }
    }
    const bool tracking_ok = ar() ? in.tracking_ok : true;
    update_engagement(classify_engagement(in.wrench_pose, tool_, sites_, cfg_.tracking, tracking_ok));

    if (ar() && retry_push_ && !push_pending_ && !push_acked_ && last_applied_ == 0 && on_current_site())
      push_target();

    for (const auto& cmd : in.commands) {
      on_command(cmd);
      if (finished()) return;
    }

    if (heartbeat_.ping_due(in.now_ms)) {
      WrenchMessage ping;
      ping.type = MsgType::kPing;
      ping.seq = next_seq_++;
      ping.ts_ms = in.now_ms;
      link_.send(encode(ping));
    }
    if (heartbeat_.lost()) return abort(in.now_ms, "heartbeat_lost");
    if (cfg_.max_duration_ms && in.now_ms >= start_ms_ + cfg_.max_duration_ms) return abort(in.now_ms, "timeout");
  }

  void abort(std::uint64_t now_ms, const std::string& reason) {
    if (finished()) return;
    now_ = std::max(now_, now_ms);
    SessionEvent e = event(EventKind::kSessionAborted);
    e.note = reason;
    log_.append(std::move(e));
  }

  bool finished() const { return log_.closed(); }
  bool aborted() const { return log_.aborted(); }
  Method method() const { return cfg_.method; }
  const Scenario& scenario() const { return scenario_; }
  std::size_t step_index() const { return step_; }
  StepPhase phase() const { return phase_; }
  const EngagementState& engagement() const { return engagement_; }
  /// AR: the current step's target was pushed during this engagement and ACKed.
  bool target_armed() const { return push_acked_ && on_current_site(); }
  TorqueCnm last_applied_cnm() const { return last_applied_; }
  const EventLog& log() const { return log_; }
  EventLog& log() { return log_; }
  const ManualLog& manual_log() const { return manual_log_; }

  std::optional<SiteRef> current_site() const {
    if (step_ >= scenario_.steps.size()) return std::nullopt;
    return scenario_.steps[step_].site;
  }

  std::vector<GuidanceEvent> guidance() const { return recorded_guidance(log_.events()); }

  TighteningReport report() const {
    TighteningReport r;
    r.session_id = cfg_.session_id;
    r.method = cfg_.method;
    r.rows = rows_;
    if (!log_.events().empty())
      r.total_duration_s = static_cast<double>(log_.events().back().ts_ms - log_.events().front().ts_ms) / 1000.0;
    return r;
  }

 private:
  bool ar() const { return cfg_.method == Method::kArGuided; }

  bool on_current_site() const {
    const auto cur = current_site();
    return cur && engagement_.engaged_site && *engagement_.engaged_site == *cur;
  }

  SessionEvent event(EventKind kind) const {
    SessionEvent e;
    e.ts_ms = now_;
    e.kind = kind;
    return e;
  }

  void guide(const GuidanceEvent& g) { log_.append(to_session_event(g, now_)); }

  void show_arrow(std::uint64_t now_ms) {
    now_ = std::max(now_, now_ms);
    if (step_ >= scenario_.steps.size()) return;
    const auto& st = scenario_.steps[step_];
    guide({GuidanceKind::kArrow, static_cast<std::int64_t>(step_), st.site, st.target_cnm, {}, {}});
  }

  void send_set_target(TorqueCnm cnm, std::uint32_t& seq_out) {
    WrenchMessage m;
    m.type = MsgType::kSetTarget;
    m.seq = next_seq_++;
    m.target_cnm = cnm;
    seq_out = m.seq;
    link_.send(encode_unvalidated(m));
  }

  void push_target() {
    const auto& st = scenario_.steps[step_];
    send_set_target(st.target_cnm, push_seq_);
    push_pending_ = true;
    push_acked_ = false;
    retry_push_ = false;
    SessionEvent e = event(EventKind::kTargetPushed);
    e.step = static_cast<std::int64_t>(step_);
    e.set_site(st.site);
    e.target_cnm = st.target_cnm;
    log_.append(std::move(e));
  }

  void update_engagement(const EngagementState& next) {
    const auto before = engagement_.engaged_site;
    engagement_ = next;
    if (before == next.engaged_site) return;
    if (before) {
      SessionEvent e = event(EventKind::kDisengage);
      e.set_site(*before);
      log_.append(std::move(e));
      push_acked_ = false;
      push_pending_ = false;
      retry_push_ = false;
      if (phase_ != StepPhase::kValidated) phase_ = StepPhase::kAwaitEngage;
    }
    if (!next.engaged_site) return;
    SessionEvent e = event(EventKind::kEngage);
    e.set_site(*next.engaged_site);
    const bool current = on_current_site();
    if (ar()) e.note = current ? "current" : "other";
    log_.append(std::move(e));
    if (!ar()) return;
    if (current) {
      phase_ = StepPhase::kEngaged;
      push_target();
    } else {
      show_arrow(now_);
    }
  }

  void close_episode() {
    if (!episode_active_) return;
    episode_active_ = false;
    SessionEvent e = event(EventKind::kTorqueApplied);
    if (episode_site_) e.set_site(*episode_site_);
    if (wrench_target_ > 0) e.target_cnm = wrench_target_;
    e.peak_cnm = episode_peak_;
    log_.append(e);
    if (ar() && episode_site_) guide({GuidanceKind::kTorque, {}, episode_site_, e.target_cnm, episode_peak_, {}});
    if (!ar() && episode_site_) record_conventional(*episode_site_, episode_peak_, false);
    if (phase_ == StepPhase::kTightening) phase_ = on_current_site() ? StepPhase::kEngaged : StepPhase::kAwaitEngage;
  }

  void note_torque(TorqueCnm applied) {
    if (applied > 0 && !episode_active_) {
      episode_active_ = true;
      episode_peak_ = 0;
      episode_site_.reset();
    }
    if (episode_active_ && applied > episode_peak_) {
      episode_peak_ = applied;
      episode_site_ = engagement_.engaged_site;
    }
    if (episode_active_ && phase_ == StepPhase::kEngaged && on_current_site()) phase_ = StepPhase::kTightening;
  }

  void on_message(const WrenchMessage& m) {
    switch (m.type) {
      case MsgType::kAck:
        if (m.target_cnm) wrench_target_ = *m.target_cnm;
        if (push_pending_ && m.ref && *m.ref == push_seq_) {
          push_pending_ = false;
          push_acked_ = true;
        }
        break;
      case MsgType::kNack: {
        SessionEvent e = event(EventKind::kWrenchNack);
        e.note = std::string(to_string(*m.err)) + " ref=" + std::to_string(*m.ref);
        log_.append(std::move(e));
        if (push_pending_ && *m.ref == push_seq_) {
          push_pending_ = false;
          retry_push_ = true;
        }
        break;
      }
      case MsgType::kTelemetry:
        if (m.target_cnm) wrench_target_ = *m.target_cnm;
        last_applied_ = *m.applied_cnm;
        note_torque(*m.applied_cnm);
        if (*m.applied_cnm == 0) close_episode();
        break;
      case MsgType::kTargetReached:
        on_reached(m);
        break;
      case MsgType::kPong:
        heartbeat_.pong();
        break;
      default:
        break;
    }
  }

  void on_reached(const WrenchMessage& m) {
    note_torque(*m.peak_cnm);
    const TorqueCnm target = m.target_cnm ? *m.target_cnm : wrench_target_;
    SessionEvent e = event(EventKind::kReached);
    if (engagement_.engaged_site) e.set_site(*engagement_.engaged_site);
    e.target_cnm = target;
    e.peak_cnm = *m.peak_cnm;
    log_.append(e);
    if (!ar()) {
      if (engagement_.engaged_site) record_conventional(*engagement_.engaged_site, *m.peak_cnm, true);
      return;
    }
    if (engagement_.engaged_site)
      guide({GuidanceKind::kTorque, {}, engagement_.engaged_site, target, *m.peak_cnm, {}});
    const auto cur = current_site();
    if (!cur || !on_current_site() || !push_acked_ || target != scenario_.steps[step_].target_cnm) return;

    const auto& st = scenario_.steps[step_];
    SessionEvent v = event(EventKind::kStepValidated);
    v.step = static_cast<std::int64_t>(step_);
    v.set_site(st.site);
    v.target_cnm = st.target_cnm;
    v.peak_cnm = *m.peak_cnm;
    const auto& logged = log_.append(std::move(v));
    rows_[step_].peak_applied_cnm = *m.peak_cnm;
    rows_[step_].validated = true;
    rows_[step_].ts_ms = logged.ts_ms;
    guide({GuidanceKind::kDone, static_cast<std::int64_t>(step_), st.site, {}, {}, *m.peak_cnm});
    phase_ = StepPhase::kValidated;
    ++step_;
    push_acked_ = false;
    push_pending_ = false;
    retry_push_ = false;
    if (step_ == scenario_.steps.size()) {
      log_.append(event(EventKind::kSessionEnd));
      return;
    }
    phase_ = StepPhase::kAwaitEngage;
    show_arrow(now_);
  }

  void record_conventional(const SiteRef& site, TorqueCnm peak, bool reached) {
    const auto k = scenario_.step_of(site);
    if (!k) return;
    ReportRow& row = rows_[*k];
    row.peak_applied_cnm = std::max(row.peak_applied_cnm, peak);
    if (reached && !row.validated && peak >= row.target_cnm) {
      row.validated = true;
      row.ts_ms = log_.events().back().ts_ms;
    }
  }

  void on_command(const OperatorCommand& cmd) {
    using K = OperatorCommand::Kind;
    switch (cmd.kind) {
      case K::kManualSet: {
        if (ar()) return;
        SessionEvent e = event(EventKind::kManualSet);
        e.target_cnm = cmd.torque_cnm;
        log_.append(std::move(e));
        std::uint32_t seq = 0;
        send_set_target(cmd.torque_cnm, seq);
        break;
      }
      case K::kManualLog: {
        if (ar()) return;
        SessionEvent e = event(EventKind::kManualLogEntry);
        e.set_site(cmd.site);
        e.applied_cnm = cmd.torque_cnm;
        const auto& logged = log_.append(std::move(e));
        manual_log_.push_back({logged.ts_ms, cmd.site, cmd.torque_cnm});
        break;
      }
      case K::kFinish:
        if (ar()) return abort(now_, "operator_stop");
        close_episode();
        log_.append(event(EventKind::kSessionEnd));
        break;
      case K::kAbort:
        abort(now_, cmd.note.empty() ? "operator_abort" : cmd.note);
        break;
    }
  }

  Scenario scenario_;
  SessionConfig cfg_;
  ByteLink& link_;
  ToolModel tool_;
  std::vector<WorldSite> sites_;
  Heartbeat heartbeat_;
  FrameReader reader_;
  EventLog log_;
  ManualLog manual_log_;
  std::vector<ReportRow> rows_;

  std::uint64_t now_ = 0;
  std::uint64_t start_ms_ = 0;
  std::uint32_t next_seq_ = 1;
  std::size_t step_ = 0;
  StepPhase phase_ = StepPhase::kAwaitEngage;
  EngagementState engagement_;

  std::uint32_t push_seq_ = 0;
  bool push_pending_ = false;
  bool push_acked_ = false;
  bool retry_push_ = false;

  TorqueCnm wrench_target_ = 0;
  TorqueCnm last_applied_ = 0;
  bool episode_active_ = false;
  TorqueCnm episode_peak_ = 0;
  std::optional<SiteRef> episode_site_;
};

}  // namespace torqueflow
