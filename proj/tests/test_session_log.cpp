#include "support.hpp"

#include <torqueflow/report.hpp>
#include <torqueflow/session_log.hpp>

#include <gtest/gtest.h>

using namespace torqueflow;

namespace {

SessionEvent ev(std::uint64_t ts, EventKind k) {
  SessionEvent e;
  e.ts_ms = ts;
  e.kind = k;
  return e;
}

std::size_t error_line(std::string_view text) {
  try {
    parse_event_log(text, "t.jsonl");
  } catch (const FormatError& e) {
    return e.line();
  }
  ADD_FAILURE() << "accepted: " << text;
  return 0;
}

}  // namespace

TEST(SessionEvent, EncodeDecodeRoundTrip) {
  SessionEvent e = ev(42, EventKind::kReached);
  e.step = 3;
  e.set_site({"grid", "r1c2"});
  e.target_cnm = 300;
  e.peak_cnm = 305;
  e.note = "quote \" and \\ backslash";
  EXPECT_EQ(decode_event(encode_event(e)), e);
  SessionEvent s = ev(0, EventKind::kSessionStart);
  s.config = nlohmann::json{{"seed", 7}, {"method", "AR_GUIDED"}};
  EXPECT_EQ(decode_event(encode_event(s)), s);
}

TEST(SessionEvent, EncodingIsStable) {
  SessionEvent e = ev(5, EventKind::kEngage);
  e.set_site({"flange", "f3"});
  e.note = "current";
  EXPECT_EQ(encode_event(e), R"({"ts_ms":5,"kind":"ENGAGE","part":"flange","site":"f3","note":"current"})");
}

TEST(EventLog, BumpsEqualTimestamps) {
  EventLog log;
  log.append(ev(10, EventKind::kSessionStart));
  log.append(ev(10, EventKind::kEngage));
  log.append(ev(5, EventKind::kDisengage));
  log.append(ev(20, EventKind::kSessionEnd));
  ASSERT_EQ(log.size(), 4u);
  EXPECT_EQ(log.events()[1].ts_ms, 11u);
  EXPECT_EQ(log.events()[2].ts_ms, 12u);
  EXPECT_EQ(log.events()[3].ts_ms, 20u);
  EXPECT_NO_THROW(validate_log(log.events()));
  EXPECT_TRUE(log.closed());
  EXPECT_FALSE(log.aborted());
}

TEST(EventLog, RefusesEventsOutsideTheSession) {
  EventLog log;
  EXPECT_THROW(log.append(ev(0, EventKind::kEngage)), std::logic_error);
  log.append(ev(0, EventKind::kSessionStart));
  log.append(ev(1, EventKind::kSessionAborted));
  EXPECT_TRUE(log.aborted());
  EXPECT_THROW(log.append(ev(2, EventKind::kEngage)), std::logic_error);
}

TEST(EventLog, ListenerSeesEveryEvent) {
  EventLog log;
  int seen = 0;
  log.set_listener([&](const SessionEvent&) { ++seen; });
  log.append(ev(0, EventKind::kSessionStart));
  log.append(ev(1, EventKind::kSessionEnd));
  EXPECT_EQ(seen, 2);
}

TEST(ParseEventLog, RoundTrip) {
  EventLog log;
  log.append(ev(0, EventKind::kSessionStart));
  SessionEvent r = ev(100, EventKind::kReached);
  r.set_site({"grid", "r0c0"});
  r.target_cnm = 300;
  r.peak_cnm = 301;
  log.append(r);
  log.append(ev(200, EventKind::kSessionEnd));
  EXPECT_EQ(parse_event_log(log.to_jsonl()), log.events());
}

TEST(ParseEventLog, ErrorsCarryLineNumbers) {
  const std::string a = R"({"ts_ms":0,"kind":"SESSION_START"})";
  const std::string b = R"({"ts_ms":5,"kind":"ENGAGE","part":"g","site":"r0c0"})";
  const std::string end = R"({"ts_ms":9,"kind":"SESSION_END"})";
  EXPECT_EQ(error_line(a + "\n" + "{oops\n" + end + "\n"), 2u);
  EXPECT_EQ(error_line(a + "\n" + b + "\n" + R"({"ts_ms":5,"kind":"DISENGAGE"})" + "\n" + end + "\n"), 3u);
  EXPECT_EQ(error_line(a + "\n" + R"({"ts_ms":6,"kind":"EXPLODE"})" + "\n" + end + "\n"), 2u);
  EXPECT_EQ(error_line(a + "\n" + R"({"ts_ms":6,"kind":"ENGAGE","extra":1})" + "\n" + end + "\n"), 2u);
  EXPECT_EQ(error_line(b + "\n" + end + "\n"), 1u);
  EXPECT_EQ(error_line(a + "\n" + b + "\n"), 2u);  // no terminal event
  EXPECT_EQ(error_line(a + "\n" + end + "\n" + R"({"ts_ms":10,"kind":"ENGAGE"})" + "\n"), 3u);
  EXPECT_EQ(error_line(a + "\n" + end), 2u);  // missing final LF
  try {
    parse_event_log(a + "\n{oops\n", "x.jsonl");
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("x.jsonl:2"), std::string::npos);
  }
}

TEST(Report, RoundTrip) {
  TighteningReport r;
  r.session_id = "A01";
  r.method = Method::kArGuided;
  r.total_duration_s = 339.125;
  r.rows = {{"grid", "r0c0", 300, 305, true, 1200}, {"flange", "f4", 500, 0, false, 0}};
  const std::string text = format_report(r);
  EXPECT_EQ(text,
            "# session_id=A01\n# method=AR_GUIDED\n# total_duration_s=339.125\n"
            "part_id,site_id,target_cnm,peak_applied_cnm,validated,ts_ms\n"
            "grid,r0c0,300,305,true,1200\nflange,f4,500,0,false,0\n");
  EXPECT_EQ(parse_report(text), r);
}

TEST(Report, RejectsBadRows) {
  const std::string head = "# session_id=A\n# method=CONVENTIONAL\n# total_duration_s=1.000\n"
                           "part_id,site_id,target_cnm,peak_applied_cnm,validated,ts_ms\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_report(text);
    } catch (const FormatError& e) {
      return e.line();
    }
    return 999;
  };
  EXPECT_EQ(line_of(head + "grid,r0c0,300,0,maybe,0\n"), 5u);
  EXPECT_EQ(line_of(head + "grid,r0c0,300,0,true\n"), 5u);
  EXPECT_EQ(line_of(head + "grid,r0c0,300,0,true,0\ngrid,r0c1,x,0,true,0\n"), 6u);
  EXPECT_THROW(parse_report("part_id\n"), FormatError);
  TighteningReport bad;
  bad.session_id = "a,b";
  EXPECT_THROW(format_report(bad), FormatError);
}

TEST(ManualLog, RoundTrip) {
  const ManualLog log = {{100, {"grid", "r0c0"}, 300}, {250, {"flange", "f0"}, 500}};
  const std::string text = format_manual_log(log);
  EXPECT_EQ(text, "ts_ms,part_id,site_id,torque_cnm\n100,grid,r0c0,300\n250,flange,f0,500\n");
  EXPECT_EQ(parse_manual_log(text), log);
  EXPECT_THROW(parse_manual_log("nope\n"), FormatError);
}
