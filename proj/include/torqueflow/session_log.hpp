#pragma once

// Append-only session event log. On disk: one strict-JSON object per LF
// line, keys in the fixed order ts_ms, kind, step, part, site, target_cnm,
// applied_cnm, peak_cnm, note, config; absent fields omitted.

#include <torqueflow/error.hpp>
#include <torqueflow/scene.hpp>

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace torqueflow {

enum class EventKind : std::uint8_t {
  kSessionStart,
  kEngage,
  kDisengage,
  kTargetPushed,
  kTorqueApplied,
  kReached,
  kStepValidated,
  kManualSet,
  kManualLogEntry,
  kTrackingLost,
  kTrackingRedetected,
  kGuidanceShown,
  kSessionEnd,
  kSessionAborted,
  kWrenchNack,
};

inline constexpr std::array<std::string_view, 15> kEventKindNames = {
    "SESSION_START", "ENGAGE",          "DISENGAGE",    "TARGET_PUSHED",       "TORQUE_APPLIED",
    "REACHED",       "STEP_VALIDATED",  "MANUAL_SET",   "MANUAL_LOG_ENTRY",    "TRACKING_LOST",
    "TRACKING_REDETECTED", "GUIDANCE_SHOWN", "SESSION_END", "SESSION_ABORTED", "WRENCH_NACK"};

inline std::string_view to_string(EventKind k) { return kEventKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEventKindNames.size(); ++i)
    if (kEventKindNames[i] == s) return static_cast<EventKind>(i);
  return std::nullopt;
}

inline bool is_terminal(EventKind k) { return k == EventKind::kSessionEnd || k == EventKind::kSessionAborted; }

struct SessionEvent {
  std::uint64_t ts_ms = 0;
  EventKind kind = EventKind::kSessionStart;
  std::optional<std::int64_t> step;
  std::optional<std::string> part;
  std::optional<std::string> site;
  std::optional<TorqueCnm> target_cnm;
  std::optional<TorqueCnm> applied_cnm;
  std::optional<TorqueCnm> peak_cnm;
  std::optional<std::string> note;
  std::optional<nlohmann::json> config;

  std::optional<SiteRef> site_ref() const {
    if (!part || !site) return std::nullopt;
    return SiteRef{*part, *site};
  }
  void set_site(const SiteRef& ref) {
    part = ref.part_id;
    site = ref.site_id;
  }

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

inline std::string encode_event(const SessionEvent& e) {
  using nlohmann::json;
  std::string out = "{\"ts_ms\":" + std::to_string(e.ts_ms) + ",\"kind\":\"" + std::string(to_string(e.kind)) + "\"";
  if (e.step) out += ",\"step\":" + std::to_string(*e.step);
  if (e.part) out += ",\"part\":" + json(*e.part).dump();
  if (e.site) out += ",\"site\":" + json(*e.site).dump();
  if (e.target_cnm) out += ",\"target_cnm\":" + std::to_string(*e.target_cnm);
  if (e.applied_cnm) out += ",\"applied_cnm\":" + std::to_string(*e.applied_cnm);
  if (e.peak_cnm) out += ",\"peak_cnm\":" + std::to_string(*e.peak_cnm);
  if (e.note) out += ",\"note\":" + json(*e.note).dump();
  if (e.config) out += ",\"config\":" + e.config->dump();
  out += "}";
  return out;
}

/// Parses one log line. Throws std::invalid_argument describing the problem.
inline SessionEvent decode_event(std::string_view line) {
  using nlohmann::json;
  json obj;
  try {
    obj = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON at byte " + std::to_string(e.byte));
  }
  if (!obj.is_object()) throw std::invalid_argument("line is not a JSON object");
  SessionEvent ev;
  bool have_ts = false, have_kind = false;
  auto integer = [](const json& v, const std::string& key) -> std::int64_t {
    if (!v.is_number_integer()) throw std::invalid_argument(key + " must be an integer");
    return v.get<std::int64_t>();
  };
  auto text = [](const json& v, const std::string& key) -> std::string {
    if (!v.is_string()) throw std::invalid_argument(key + " must be a string");
    return v.get<std::string>();
  };
  for (const auto& [key, v] : obj.items()) {
    if (key == "ts_ms") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw std::invalid_argument("ts_ms must be a non-negative integer");
      ev.ts_ms = v.get<std::uint64_t>();
      have_ts = true;
    } else if (key == "kind") {
      const auto k = parse_event_kind(text(v, key));
      if (!k) throw std::invalid_argument("unknown event kind '" + v.get<std::string>() + "'");
      ev.kind = *k;
      have_kind = true;
    } else if (key == "step") {
      ev.step = integer(v, key);
    } else if (key == "part") {
      ev.part = text(v, key);
    } else if (key == "site") {
      ev.site = text(v, key);
    } else if (key == "target_cnm") {
      ev.target_cnm = static_cast<TorqueCnm>(integer(v, key));
    } else if (key == "applied_cnm") {
      ev.applied_cnm = static_cast<TorqueCnm>(integer(v, key));
    } else if (key == "peak_cnm") {
      ev.peak_cnm = static_cast<TorqueCnm>(integer(v, key));
    } else if (key == "note") {
      ev.note = text(v, key);
    } else if (key == "config") {
      if (!v.is_object()) throw std::invalid_argument("config must be an object");
      ev.config = v;
    } else {
      throw std::invalid_argument("unknown key '" + key + "'");
    }
  }
  if (!have_ts || !have_kind) throw std::invalid_argument("missing ts_ms or kind");
  return ev;
}

/// Append-only, strictly time-ordered record of one session. Events that
/// arrive in the same millisecond as their predecessor are stamped one
/// millisecond later so timestamps stay strictly increasing.
class EventLog {
 public:
  using Listener = std::function<void(const SessionEvent&)>;

  const SessionEvent& append(SessionEvent ev) {
    if (events_.empty() && ev.kind != EventKind::kSessionStart)
      throw std::logic_error("first event must be SESSION_START");
    if (closed()) throw std::logic_error("session already closed");
    if (!events_.empty() && ev.ts_ms <= events_.back().ts_ms) ev.ts_ms = events_.back().ts_ms + 1;
    events_.push_back(std::move(ev));
    if (listener_) listener_(events_.back());
    return events_.back();
  }

  bool closed() const { return !events_.empty() && is_terminal(events_.back().kind); }
  bool aborted() const { return closed() && events_.back().kind == EventKind::kSessionAborted; }
  const std::vector<SessionEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  void set_listener(Listener l) { listener_ = std::move(l); }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
      out += encode_event(e);
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<SessionEvent> events_;
  Listener listener_;
};

/// Checks the ordering invariants of a complete log.
inline void validate_log(const std::vector<SessionEvent>& events, const std::string& source = "log") {
  if (events.empty()) throw FormatError(source, 0, "empty event log");
  if (events.front().kind != EventKind::kSessionStart) throw FormatError(source, 1, "first event is not SESSION_START");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].ts_ms <= events[i - 1].ts_ms) throw FormatError(source, i + 1, "timestamps not strictly increasing");
    if (events[i].kind == EventKind::kSessionStart) throw FormatError(source, i + 1, "SESSION_START repeated");
    if (is_terminal(events[i - 1].kind)) throw FormatError(source, i + 1, "event after session end");
  }
  if (!is_terminal(events.back().kind)) throw FormatError(source, events.size(), "log has no SESSION_END or SESSION_ABORTED");
}

inline std::vector<SessionEvent> parse_event_log(std::string_view text, const std::string& source = "log") {
  std::vector<SessionEvent> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError(source, line_no + 1, "unterminated last line");
    ++line_no;
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    try {
      out.push_back(decode_event(line));
    } catch (const std::invalid_argument& e) {
      throw FormatError(source, line_no, e.what());
    }
  }
  validate_log(out, source);
  return out;
}

inline std::vector<SessionEvent> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "cannot open event log");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_event_log(ss.str(), path.string());
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace torqueflow
