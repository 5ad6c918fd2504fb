#pragma once

// Traceability report (one row per scenario step) and the operator's manual
// log, both stored as CSV.
//
// Report file:
//   # session_id=S001
//   # method=AR_GUIDED
//   # total_duration_s=339.120
//   part_id,site_id,target_cnm,peak_applied_cnm,validated,ts_ms
//   grid,r0c0,300,305,true,12340
//
// The '#' preamble carries the report fields that have no column.

#include <torqueflow/error.hpp>
#include <torqueflow/scene.hpp>
#include <torqueflow/session_log.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace torqueflow {

enum class Method : std::uint8_t { kArGuided, kConventional };

inline std::string_view to_string(Method m) { return m == Method::kArGuided ? "AR_GUIDED" : "CONVENTIONAL"; }

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "AR_GUIDED" || s == "ar") return Method::kArGuided;
  if (s == "CONVENTIONAL" || s == "conventional") return Method::kConventional;
  return std::nullopt;
}

struct ReportRow {
  std::string part_id;
  std::string site_id;
  TorqueCnm target_cnm = 0;
  TorqueCnm peak_applied_cnm = 0;
  bool validated = false;
  std::uint64_t ts_ms = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct TighteningReport {
  std::string session_id;
  Method method = Method::kArGuided;
  std::vector<ReportRow> rows;
  double total_duration_s = 0;

  friend bool operator==(const TighteningReport&, const TighteningReport&) = default;
};

struct ManualLogEntry {
  std::uint64_t ts_ms = 0;
  SiteRef site;
  TorqueCnm torque_cnm = 0;  // value the operator wrote down

  friend bool operator==(const ManualLogEntry&, const ManualLogEntry&) = default;
};

using ManualLog = std::vector<ManualLogEntry>;

inline constexpr std::string_view kReportHeader = "part_id,site_id,target_cnm,peak_applied_cnm,validated,ts_ms";
inline constexpr std::string_view kManualLogHeader = "ts_ms,part_id,site_id,torque_cnm";

namespace report_detail {

inline void check_cell(std::string_view v, const std::string& source) {
  if (v.find_first_of(",\"\r\n") != std::string_view::npos)
    throw FormatError(source, 0, "value '" + std::string(v) + "' cannot be stored in a CSV cell");
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <class T>
T parse_int(std::string_view s, const std::string& source, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError(source, line, "bad integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> lines(std::string_view text, const std::string& source) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError(source, out.size() + 1, "unterminated last line");
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

}  // namespace report_detail

inline std::string format_report(const TighteningReport& r) {
  using report_detail::check_cell;
  check_cell(r.session_id, "report");
  char dur[64];
  std::snprintf(dur, sizeof dur, "%.3f", r.total_duration_s);
  std::string out = "# session_id=" + r.session_id + "\n# method=" + std::string(to_string(r.method)) +
                    "\n# total_duration_s=" + dur + "\n" + std::string(kReportHeader) + "\n";
  for (const auto& row : r.rows) {
    check_cell(row.part_id, "report");
    check_cell(row.site_id, "report");
    out += row.part_id + "," + row.site_id + "," + std::to_string(row.target_cnm) + "," +
           std::to_string(row.peak_applied_cnm) + "," + (row.validated ? "true" : "false") + "," +
           std::to_string(row.ts_ms) + "\n";
  }
  return out;
}

inline TighteningReport parse_report(std::string_view text, const std::string& source = "report") {
  using namespace report_detail;
  TighteningReport r;
  bool have_header = false, have_id = false, have_method = false, have_dur = false;
  const auto ls = lines(text, source);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = ls[i];
    if (!have_header && line.starts_with("# ")) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw FormatError(source, line_no, "bad preamble line");
      const auto key = line.substr(2, eq - 2);
      const auto value = line.substr(eq + 1);
      if (key == "session_id") {
        r.session_id = std::string(value);
        have_id = true;
      } else if (key == "method") {
        const auto m = parse_method(value);
        if (!m) throw FormatError(source, line_no, "unknown method '" + std::string(value) + "'");
        r.method = *m;
        have_method = true;
      } else if (key == "total_duration_s") {
        try {
          std::size_t used = 0;
          r.total_duration_s = std::stod(std::string(value), &used);
          if (used != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw FormatError(source, line_no, "bad total_duration_s");
        }
        have_dur = true;
      } else {
        throw FormatError(source, line_no, "unknown preamble key '" + std::string(key) + "'");
      }
      continue;
    }
    if (!have_header) {
      if (line != kReportHeader) throw FormatError(source, line_no, "missing report header");
      have_header = true;
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != 6) throw FormatError(source, line_no, "expected 6 columns");
    ReportRow row;
    row.part_id = std::string(cells[0]);
    row.site_id = std::string(cells[1]);
    row.target_cnm = parse_int<TorqueCnm>(cells[2], source, line_no);
    row.peak_applied_cnm = parse_int<TorqueCnm>(cells[3], source, line_no);
    if (cells[4] == "true") row.validated = true;
    else if (cells[4] == "false") row.validated = false;
    else throw FormatError(source, line_no, "validated must be true or false");
    row.ts_ms = parse_int<std::uint64_t>(cells[5], source, line_no);
    r.rows.push_back(std::move(row));
  }
  if (!have_header || !have_id || !have_method || !have_dur) throw FormatError(source, 0, "incomplete report");
  return r;
}

inline void write_report(const TighteningReport& r, const std::filesystem::path& path) {
  write_text_file(path, format_report(r));
}

inline TighteningReport read_report(const std::filesystem::path& path) {
  return parse_report(read_text_file(path), path.string());
}

inline std::string format_manual_log(const ManualLog& log) {
  std::string out = std::string(kManualLogHeader) + "\n";
  for (const auto& e : log) {
    report_detail::check_cell(e.site.part_id, "manual log");
    report_detail::check_cell(e.site.site_id, "manual log");
    out += std::to_string(e.ts_ms) + "," + e.site.part_id + "," + e.site.site_id + "," + std::to_string(e.torque_cnm) + "\n";
  }
  return out;
}

inline ManualLog parse_manual_log(std::string_view text, const std::string& source = "manual log") {
  using namespace report_detail;
  const auto ls = lines(text, source);
  if (ls.empty() || ls[0] != kManualLogHeader) throw FormatError(source, 1, "missing manual log header");
  ManualLog out;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto cells = split(ls[i]);
    if (cells.size() != 4) throw FormatError(source, i + 1, "expected 4 columns");
    out.push_back({parse_int<std::uint64_t>(cells[0], source, i + 1),
                   {std::string(cells[1]), std::string(cells[2])},
                   parse_int<TorqueCnm>(cells[3], source, i + 1)});
  }
  return out;
}

}  // namespace torqueflow
