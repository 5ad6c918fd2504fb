#pragma once

// Operator guidance: the arrow on the current target screw, target/applied
// torque labels, DONE markers on validated screws and tracking badges.
//
// The session engine records every guidance item it shows as a GUIDANCE_SHOWN
// event. derive_guidance() rebuilds the same stream from the other events of
// a finished log, which is how replays check determinism.

#include <torqueflow/report.hpp>
#include <torqueflow/scene.hpp>
#include <torqueflow/session_log.hpp>

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace torqueflow {

enum class GuidanceKind : std::uint8_t { kArrow, kTorque, kDone, kTrackingLost, kTrackingOk };

inline constexpr std::array<std::string_view, 5> kGuidanceKindNames = {"ARROW", "TORQUE", "DONE", "TRACKING_LOST",
                                                                       "TRACKING_OK"};

inline std::string_view to_string(GuidanceKind k) { return kGuidanceKindNames[static_cast<std::size_t>(k)]; }

inline std::optional<GuidanceKind> parse_guidance_kind(std::string_view s) {
  for (std::size_t i = 0; i < kGuidanceKindNames.size(); ++i)
    if (kGuidanceKindNames[i] == s) return static_cast<GuidanceKind>(i);
  return std::nullopt;
}

struct GuidanceEvent {
  GuidanceKind kind = GuidanceKind::kArrow;
  std::optional<std::int64_t> step;
  std::optional<SiteRef> site;
  std::optional<TorqueCnm> target_cnm;
  std::optional<TorqueCnm> applied_cnm;
  std::optional<TorqueCnm> peak_cnm;

  friend bool operator==(const GuidanceEvent&, const GuidanceEvent&) = default;
};

inline SessionEvent to_session_event(const GuidanceEvent& g, std::uint64_t ts_ms) {
  SessionEvent e;
  e.ts_ms = ts_ms;
  e.kind = EventKind::kGuidanceShown;
  e.note = std::string(to_string(g.kind));
  e.step = g.step;
  if (g.site) e.set_site(*g.site);
  e.target_cnm = g.target_cnm;
  e.applied_cnm = g.applied_cnm;
  e.peak_cnm = g.peak_cnm;
  return e;
}

inline std::optional<GuidanceEvent> from_session_event(const SessionEvent& e) {
  if (e.kind != EventKind::kGuidanceShown || !e.note) return std::nullopt;
  const auto k = parse_guidance_kind(*e.note);
  if (!k) return std::nullopt;
  return GuidanceEvent{*k, e.step, e.site_ref(), e.target_cnm, e.applied_cnm, e.peak_cnm};
}

/// One JSON object per guidance item; the console channel uses the same text.
inline std::string encode_guidance(const GuidanceEvent& g) {
  using nlohmann::json;
  std::string out = "{\"g\":\"" + std::string(to_string(g.kind)) + "\"";
  if (g.step) out += ",\"step\":" + std::to_string(*g.step);
  if (g.site) out += ",\"part\":" + json(g.site->part_id).dump() + ",\"site\":" + json(g.site->site_id).dump();
  if (g.target_cnm) out += ",\"target_cnm\":" + std::to_string(*g.target_cnm);
  if (g.applied_cnm) out += ",\"applied_cnm\":" + std::to_string(*g.applied_cnm);
  if (g.peak_cnm) out += ",\"peak_cnm\":" + std::to_string(*g.peak_cnm);
  out += "}";
  return out;
}

inline std::string encode_guidance_stream(const std::vector<GuidanceEvent>& stream) {
  std::string out;
  for (const auto& g : stream) {
    out += encode_guidance(g);
    out += '\n';
  }
  return out;
}

/// GUIDANCE_SHOWN events as recorded during the session.
inline std::vector<GuidanceEvent> recorded_guidance(const std::vector<SessionEvent>& events) {
  std::vector<GuidanceEvent> out;
  for (const auto& e : events)
    if (auto g = from_session_event(e)) out.push_back(*g);
  return out;
}

/// Scenario and method echoed in the SESSION_START config.
struct SessionHeader {
  std::string session_id;
  Method method = Method::kArGuided;
  Scenario scenario;
};

inline SessionHeader read_session_header(const SessionEvent& start) {
  if (start.kind != EventKind::kSessionStart || !start.config)
    throw FormatError("log", 1, "SESSION_START carries no config");
  const auto& c = *start.config;
  SessionHeader h;
  try {
    h.session_id = c.at("session_id").get<std::string>();
    const auto m = parse_method(c.at("method").get<std::string>());
    if (!m) throw FormatError("log", 1, "unknown method in config");
    h.method = *m;
    const auto& sc = c.at("scenario");
    h.scenario.scenario_id = sc.at("id").get<std::string>();
    for (const auto& st : sc.at("steps")) {
      if (!st.is_array() || st.size() != 3) throw FormatError("log", 1, "bad scenario step in config");
      h.scenario.steps.push_back({{st[0].get<std::string>(), st[1].get<std::string>()}, st[2].get<TorqueCnm>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("log", 1, std::string("bad SESSION_START config: ") + e.what());
  }
  return h;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& st : sc.steps) steps.push_back({st.site.part_id, st.site.site_id, st.target_cnm});
  return {{"id", sc.scenario_id}, {"steps", steps}};
}

/// Rebuilds the guidance stream from a log's non-guidance events.
inline std::vector<GuidanceEvent> derive_guidance(const std::vector<SessionEvent>& events) {
  std::vector<GuidanceEvent> out;
  if (events.empty()) return out;
  const SessionHeader h = read_session_header(events.front());
  if (h.method != Method::kArGuided) return out;
  const auto& steps = h.scenario.steps;
  std::size_t current = 0;
  auto arrow = [&](std::size_t k) {
    out.push_back({GuidanceKind::kArrow, static_cast<std::int64_t>(k), steps[k].site, steps[k].target_cnm,
                   std::nullopt, std::nullopt});
  };
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::kSessionStart:
        if (!steps.empty()) arrow(0);
        break;
      case EventKind::kEngage:
        if (current < steps.size() && e.site_ref() != steps[current].site) arrow(current);
        break;
      case EventKind::kTorqueApplied:
      case EventKind::kReached:
        if (e.site_ref())
          out.push_back({GuidanceKind::kTorque, std::nullopt, e.site_ref(), e.target_cnm, e.peak_cnm, std::nullopt});
        break;
      case EventKind::kStepValidated:
        out.push_back({GuidanceKind::kDone, e.step, e.site_ref(), std::nullopt, std::nullopt, e.peak_cnm});
        current = static_cast<std::size_t>(*e.step) + 1;
        if (current < steps.size()) arrow(current);
        break;
      case EventKind::kTrackingLost:
        out.push_back({GuidanceKind::kTrackingLost, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt});
        break;
      case EventKind::kTrackingRedetected:
        out.push_back({GuidanceKind::kTrackingOk, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt});
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace torqueflow
