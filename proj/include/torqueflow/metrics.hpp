#pragma once

// Error classification, questionnaire scoring and study aggregation.
//
// A study bundle is a directory holding, per session,
//   <id>.events.jsonl   event log
//   <id>.report.csv     tightening report (not needed for scoring)
//   <id>.manual.csv     manual log, conventional sessions only
// plus an optional questionnaires.json:
//   {"<id>": {"sus": [10 items 1..5], "tlx": [6 items 1..20]}, ...}

#include <torqueflow/error.hpp>
#include <torqueflow/guidance.hpp>
#include <torqueflow/report.hpp>
#include <torqueflow/scene.hpp>
#include <torqueflow/session_log.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace torqueflow {

struct ErrorFlags {
  bool wrong_order = false;
  bool wrong_screw = false;
  bool stale_torque = false;

  bool any() const { return wrong_order || wrong_screw || stale_torque; }
  friend bool operator==(const ErrorFlags&, const ErrorFlags&) = default;
};

/// Classifies a normally ended session against its scenario.
///
/// Completions are STEP_VALIDATED events in AR logs (the only thing the AR
/// method accepts as done) and REACHED events in conventional logs.
inline ErrorFlags classify_errors(const std::vector<SessionEvent>& events, const ManualLog& manual,
                                  const Scenario& scenario) {
  try {
    validate_log(events);
  } catch (const FormatError& e) {
    throw DataError(std::string("cannot classify: ") + e.what());
  }
  if (events.back().kind != EventKind::kSessionEnd) throw DataError("cannot classify an aborted session");
  const SessionHeader h = read_session_header(events.front());
  if (h.scenario.scenario_id != scenario.scenario_id || h.scenario.steps != scenario.steps)
    throw DataError("log was recorded for scenario '" + h.scenario.scenario_id + "', not '" + scenario.scenario_id + "'");

  const bool ar = h.method == Method::kArGuided;
  const EventKind completion = ar ? EventKind::kStepValidated : EventKind::kReached;

  ErrorFlags f;
  std::set<std::size_t> completed;
  for (const auto& e : events) {
    if (e.kind != completion) continue;
    const auto site = e.site_ref();
    if (!site) continue;  // pulled in the air
    const auto k = scenario.step_of(*site);
    if (!k) {
      f.wrong_screw = true;
      continue;
    }
    // First completions must come in scenario order. A step that never
    // completes (tightened elsewhere) does not count as out of order.
    if (!completed.count(*k)) {
      if (!completed.empty() && *completed.rbegin() > *k) f.wrong_order = true;
      completed.insert(*k);
    }
    if (e.target_cnm && *e.target_cnm != scenario.steps[*k].target_cnm) f.stale_torque = true;
    if (!ar) {
      // The next entry the operator wrote down should name this screw.
      const auto it = std::find_if(manual.begin(), manual.end(), [&](const ManualLogEntry& m) { return m.ts_ms > e.ts_ms; });
      if (it != manual.end() && it->site != *site) f.wrong_screw = true;
    }
  }
  return f;
}

struct QuestionnaireResponse {
  std::array<int, 10> sus_items{};
  std::array<int, 6> tlx_items{};  // mental, physical, temporal, performance, effort, frustration
  friend bool operator==(const QuestionnaireResponse&, const QuestionnaireResponse&) = default;
};

/// SUS on 0..100. Items 1, 3, 5, 7, 9 are positively worded.
inline double score_sus(const std::array<int, 10>& items) {
  int sum = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int v = items[i];
    if (v < 1 || v > 5) throw DataError("SUS item " + std::to_string(i + 1) + " out of range 1..5: " + std::to_string(v));
    sum += (i % 2 == 0) ? v - 1 : 5 - v;
  }
  return sum * 2.5;
}

/// Raw (unweighted) NASA-TLX on 1..20.
inline double score_tlx(const std::array<int, 6>& items) {
  int sum = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int v = items[i];
    if (v < 1 || v > 20) throw DataError("TLX item " + std::to_string(i + 1) + " out of range 1..20: " + std::to_string(v));
    sum += v;
  }
  return sum / 6.0;
}

inline double invert_tlx(double raw) { return 100.0 * (20.0 - raw) / 19.0; }

struct SessionRecord {
  std::string session_id;
  Method method = Method::kArGuided;
  double exec_time_s = 0;
  ErrorFlags errors;
  std::optional<QuestionnaireResponse> questionnaire;
};

struct RadarScores {
  std::optional<double> usability;
  std::optional<double> inverted_task_load;
  double efficiency = 0;
  double reliability = 0;
};

struct MethodSummary {
  Method method = Method::kArGuided;
  std::optional<double> usability;  // mean SUS
  std::optional<double> task_load;  // mean raw TLX
  double mean_exec_time_s = 0;
  double min_exec_time_s = 0;
  int n_with_errors = 0;
  int n_sessions = 0;
  // Per error type.
  int n_wrong_order = 0;
  int n_wrong_screw = 0;
  int n_stale_torque = 0;
  RadarScores radar;
};

struct StudySummary {
  MethodSummary conventional;
  MethodSummary ar;
  double min_exec_time_s = 0;
  std::optional<double> tlx_reduction_pct;  // conventional -> AR
};

inline double reliability(int n_sessions, int n_with_errors) {
  if (n_sessions <= 0) throw DataError("reliability needs at least one session");
  return 100.0 * (n_sessions - n_with_errors) / n_sessions;
}

inline double efficiency(double min_time_s, double mean_time_s) {
  if (!(mean_time_s > 0)) throw DataError("efficiency needs a positive mean time");
  return 100.0 * min_time_s / mean_time_s;
}

/// Fills the radar scores of both summaries. `min_time_s` is the fastest
/// session across both methods.
inline void radar(MethodSummary& a, MethodSummary& b, double min_time_s) {
  for (MethodSummary* m : {&a, &b}) {
    if (m->n_sessions <= 0) throw DataError("radar needs at least one session per method");
    m->radar.usability = m->usability;
    m->radar.inverted_task_load = m->task_load ? std::optional<double>(invert_tlx(*m->task_load)) : std::nullopt;
    m->radar.efficiency = efficiency(min_time_s, m->mean_exec_time_s);
    m->radar.reliability = reliability(m->n_sessions, m->n_with_errors);
  }
}

namespace metrics_detail {

inline MethodSummary summarize(Method method, const std::vector<const SessionRecord*>& rs) {
  MethodSummary m;
  m.method = method;
  m.n_sessions = static_cast<int>(rs.size());
  double time_sum = 0, sus_sum = 0, tlx_sum = 0;
  int n_q = 0;
  m.min_exec_time_s = rs.empty() ? 0 : rs.front()->exec_time_s;
  for (const auto* r : rs) {
    time_sum += r->exec_time_s;
    m.min_exec_time_s = std::min(m.min_exec_time_s, r->exec_time_s);
    m.n_with_errors += r->errors.any();
    m.n_wrong_order += r->errors.wrong_order;
    m.n_wrong_screw += r->errors.wrong_screw;
    m.n_stale_torque += r->errors.stale_torque;
    if (r->questionnaire) {
      sus_sum += score_sus(r->questionnaire->sus_items);
      tlx_sum += score_tlx(r->questionnaire->tlx_items);
      ++n_q;
    }
  }
  if (!rs.empty()) m.mean_exec_time_s = time_sum / m.n_sessions;
  if (n_q > 0) {
    m.usability = sus_sum / n_q;
    m.task_load = tlx_sum / n_q;
  }
  return m;
}

}  // namespace metrics_detail

/// Table-1 style aggregate. Session order does not matter: records are sorted
/// by id before any floating-point summation.
inline StudySummary aggregate_study(std::vector<SessionRecord> records) {
  if (records.empty()) throw DataError("empty study bundle");
  std::sort(records.begin(), records.end(),
            [](const SessionRecord& a, const SessionRecord& b) { return a.session_id < b.session_id; });
  std::vector<const SessionRecord*> ar, conv;
  for (const auto& r : records) (r.method == Method::kArGuided ? ar : conv).push_back(&r);
  if (ar.empty() || conv.empty()) throw DataError("study needs at least one session per method");
  StudySummary s;
  s.ar = metrics_detail::summarize(Method::kArGuided, ar);
  s.conventional = metrics_detail::summarize(Method::kConventional, conv);
  s.min_exec_time_s = std::min(s.ar.min_exec_time_s, s.conventional.min_exec_time_s);
  radar(s.conventional, s.ar, s.min_exec_time_s);
  if (s.ar.task_load && s.conventional.task_load && *s.conventional.task_load > 0)
    s.tlx_reduction_pct = 100.0 * (*s.conventional.task_load - *s.ar.task_load) / *s.conventional.task_load;
  return s;
}

// ---- bundle IO ----

inline nlohmann::json to_json(const QuestionnaireResponse& q) { return {{"sus", q.sus_items}, {"tlx", q.tlx_items}}; }

inline std::map<std::string, QuestionnaireResponse> parse_questionnaires(const std::string& text,
                                                                        const std::string& source = "questionnaires.json") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source, 0, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError(source, 0, "expected an object keyed by session id");
  std::map<std::string, QuestionnaireResponse> out;
  for (const auto& [id, v] : j.items()) {
    try {
      QuestionnaireResponse q;
      const auto& sus = v.at("sus");
      const auto& tlx = v.at("tlx");
      if (sus.size() != 10 || tlx.size() != 6 || v.size() != 2) throw FormatError(source, 0, "session " + id + ": need sus[10] and tlx[6]");
      for (std::size_t i = 0; i < 10; ++i) q.sus_items[i] = sus[i].get<int>();
      for (std::size_t i = 0; i < 6; ++i) q.tlx_items[i] = tlx[i].get<int>();
      score_sus(q.sus_items);
      score_tlx(q.tlx_items);
      out[id] = q;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(source, 0, "session " + id + ": " + e.what());
    } catch (const DataError& e) {
      throw FormatError(source, 0, "session " + id + ": " + e.what());
    }
  }
  return out;
}

inline std::string format_questionnaires(const std::map<std::string, QuestionnaireResponse>& qs) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, q] : qs) j[id] = {{"sus", q.sus_items}, {"tlx", q.tlx_items}};
  return j.dump(1) + "\n";
}

struct LoadedStudy {
  std::vector<SessionRecord> sessions;
  std::vector<std::string> excluded;  // aborted session ids
};

/// Reads every *.events.jsonl in `dir`; aborted sessions are left out.
inline LoadedStudy load_study(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> logs;
  for (const auto& ent : fs::directory_iterator(dir)) {
    const auto name = ent.path().filename().string();
    if (ent.is_regular_file() && name.size() > 13 && name.ends_with(".events.jsonl")) logs.push_back(ent.path());
  }
  std::sort(logs.begin(), logs.end());
  if (logs.empty()) throw DataError("no session logs in " + dir.string());

  std::map<std::string, QuestionnaireResponse> qs;
  const auto qpath = dir / "questionnaires.json";
  if (fs::exists(qpath)) qs = parse_questionnaires(read_text_file(qpath), qpath.string());

  LoadedStudy out;
  for (const auto& path : logs) {
    const auto events = read_event_log(path);
    const SessionHeader h = read_session_header(events.front());
    if (events.back().kind == EventKind::kSessionAborted) {
      out.excluded.push_back(h.session_id);
      continue;
    }
    ManualLog manual;
    const auto mpath = dir / (h.session_id + ".manual.csv");
    if (fs::exists(mpath)) manual = parse_manual_log(read_text_file(mpath), mpath.string());
    SessionRecord r;
    r.session_id = h.session_id;
    r.method = h.method;
    r.exec_time_s = static_cast<double>(events.back().ts_ms - events.front().ts_ms) / 1000.0;
    r.errors = classify_errors(events, manual, h.scenario);
    if (auto it = qs.find(h.session_id); it != qs.end()) r.questionnaire = it->second;
    out.sessions.push_back(std::move(r));
  }
  if (out.sessions.empty()) throw DataError("every session in " + dir.string() + " was aborted");
  return out;
}

namespace metrics_detail {

inline std::string num(std::optional<double> v, const char* fmt = "%.3f") {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, *v);
  return buf;
}

inline nlohmann::ordered_json opt(std::optional<double> v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); }

}  // namespace metrics_detail

/// metric,CONVENTIONAL,AR_GUIDED
inline std::string format_table1(const StudySummary& s) {
  using metrics_detail::num;
  const auto& c = s.conventional;
  const auto& a = s.ar;
  std::string out = "metric,CONVENTIONAL,AR_GUIDED\n";
  out += "usability_sus," + num(c.usability) + "," + num(a.usability) + "\n";
  out += "task_load_tlx," + num(c.task_load) + "," + num(a.task_load) + "\n";
  out += "mean_exec_time_s," + num(c.mean_exec_time_s) + "," + num(a.mean_exec_time_s) + "\n";
  out += "n_with_errors," + std::to_string(c.n_with_errors) + "," + std::to_string(a.n_with_errors) + "\n";
  out += "n_sessions," + std::to_string(c.n_sessions) + "," + std::to_string(a.n_sessions) + "\n";
  out += "n_wrong_order," + std::to_string(c.n_wrong_order) + "," + std::to_string(a.n_wrong_order) + "\n";
  out += "n_wrong_screw," + std::to_string(c.n_wrong_screw) + "," + std::to_string(a.n_wrong_screw) + "\n";
  out += "n_stale_torque," + std::to_string(c.n_stale_torque) + "," + std::to_string(a.n_stale_torque) + "\n";
  return out;
}

inline nlohmann::ordered_json radar_json(const StudySummary& s) {
  using metrics_detail::opt;
  auto one = [](const MethodSummary& m) {
    return nlohmann::ordered_json{{"usability", opt(m.radar.usability)},
                                  {"inverted_task_load", opt(m.radar.inverted_task_load)},
                                  {"efficiency", m.radar.efficiency},
                                  {"reliability", m.radar.reliability}};
  };
  return {{"axes", {"usability", "inverted_task_load", "efficiency", "reliability"}},
          {"CONVENTIONAL", one(s.conventional)},
          {"AR_GUIDED", one(s.ar)},
          {"min_exec_time_s", s.min_exec_time_s},
          {"tlx_reduction_pct", opt(s.tlx_reduction_pct)}};
}

}  // namespace torqueflow
